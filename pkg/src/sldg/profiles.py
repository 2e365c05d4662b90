"""Named potential and initial-data profiles shared by the CLI and the lab."""

import numpy as np

from .errors import ConfigError


def potential_profile(descriptor, left, right):
    """Potential from a descriptor: a number (constant) or the name 'cos'.

    Returns None for a zero potential so solvers can skip the term.
    """
    if descriptor is None:
        return None
    if isinstance(descriptor, str):
        if descriptor == "cos":
            length = right - left

            def q_cos(x):
                return np.cos(2.0 * np.pi * (np.asarray(x) - left) / length)

            return q_cos
        try:
            descriptor = float(descriptor)
        except ValueError:
            raise ConfigError(f"unknown potential profile {descriptor!r}") from None
    value = float(descriptor)
    if value == 0.0:
        return None

    def q_const(x):
        return np.full_like(np.asarray(x, dtype=np.float64), value)

    return q_const


def initial_profile(name, left, right):
    """Smooth periodic initial data by name: plane | modulated | constant."""
    length = right - left

    if name == "constant":
        def u0(x):
            return np.ones_like(np.asarray(x, dtype=np.float64), dtype=np.complex128)
    elif name == "plane":
        def u0(x):
            phase = 2.0 * np.pi * (np.asarray(x) - left) / length
            return np.exp(1j * phase)
    elif name == "modulated":
        def u0(x):
            phase = 2.0 * np.pi * (np.asarray(x) - left) / length
            return (1.0 + 0.5 * np.cos(phase)) * np.exp(1j * phase)
    else:
        raise ConfigError(f"unknown initial profile {name!r}")
    return u0
