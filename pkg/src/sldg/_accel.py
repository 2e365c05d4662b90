"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The two call sites that dominate runtime in Monte-Carlo studies are
(a) evaluating the real Fourier noise basis on a point grid and
(b) forming per-cell weighted basis-pair integral blocks each time step.
Both have a numba ``@njit`` implementation and a vectorised numpy one.

Selection is decided once at import time from the ``SLDG_NUMBA`` env var:
  unset      -> numba when importable, numpy otherwise
  0/false/off -> numpy fallback
  1/true/on   -> numba required (ImportError surfaces)

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

import numpy as np


def _resolve_backend():
    flag = os.environ.get("SLDG_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    if flag in ("1", "true", "on", "yes"):
        import numba  # noqa: F401  (raise if unavailable, as requested)

        return True
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve_backend()


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def fourier_mode_matrix_numpy(x_rel, length, n_modes):
    """Orthonormal real Fourier basis e_k evaluated at points.

    x_rel are coordinates relative to the left domain endpoint. Returns a
    (len(x_rel), n_modes) matrix with columns 1/sqrt(L),
    sqrt(2/L)cos(2 pi m x/L), sqrt(2/L)sin(2 pi m x/L), m = 1, 2, ...
    """
    x_rel = np.asarray(x_rel, dtype=np.float64)
    out = np.empty((x_rel.shape[0], n_modes))
    out[:, 0] = 1.0 / np.sqrt(length)
    amp = np.sqrt(2.0 / length)
    for k in range(1, n_modes):
        m = (k + 1) // 2
        arg = (2.0 * np.pi * m / length) * x_rel
        out[:, k] = amp * (np.cos(arg) if k % 2 == 1 else np.sin(arg))
    return out


def weighted_blocks_numpy(vals, phi, weights, half_widths):
    """Per-cell matrices T[j,m,l] = (dx_j/2) sum_q w_q vals[j,q] phi[m,q] phi[l,q].

    vals holds a coefficient function (potential or noise increment) at the
    quadrature points of every cell; phi holds the Legendre basis at the
    reference quadrature points. The result is symmetrised exactly in (m,l);
    downstream charge conservation relies on that.
    """
    vw = vals * weights  # (J, nq)
    blocks = np.einsum("jq,mq,lq->jml", vw, phi, phi, optimize=True)
    blocks = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    return blocks * half_widths[:, None, None]


# ---------------------------------------------------------------------------
# numba fast path
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit, prange

    @njit(cache=True)
    def _fourier_mode_matrix_njit(x_rel, length, n_modes):
        npts = x_rel.shape[0]
        out = np.empty((npts, n_modes))
        inv = 1.0 / np.sqrt(length)
        amp = np.sqrt(2.0 / length)
        two_pi = 2.0 * np.pi
        for p in range(npts):
            out[p, 0] = inv
        for k in range(1, n_modes):
            m = (k + 1) // 2
            freq = two_pi * m / length
            if k % 2 == 1:
                for p in range(npts):
                    out[p, k] = amp * np.cos(freq * x_rel[p])
            else:
                for p in range(npts):
                    out[p, k] = amp * np.sin(freq * x_rel[p])
        return out

    @njit(cache=True, parallel=False)
    def _weighted_blocks_njit(vals, phi, weights, half_widths):
        ncells, nq = vals.shape
        nb = phi.shape[0]
        out = np.empty((ncells, nb, nb))
        for j in prange(ncells):
            for m in range(nb):
                for l in range(m + 1):
                    acc = 0.0
                    for q in range(nq):
                        acc += weights[q] * vals[j, q] * phi[m, q] * phi[l, q]
                    acc *= half_widths[j]
                    out[j, m, l] = acc
                    out[j, l, m] = acc
        return out

    def fourier_mode_matrix(x_rel, length, n_modes):
        return _fourier_mode_matrix_njit(
            np.ascontiguousarray(x_rel, dtype=np.float64), float(length), n_modes
        )

    def weighted_blocks(vals, phi, weights, half_widths):
        return _weighted_blocks_njit(
            np.ascontiguousarray(vals), np.ascontiguousarray(phi),
            np.ascontiguousarray(weights), np.ascontiguousarray(half_widths),
        )

else:
    fourier_mode_matrix = fourier_mode_matrix_numpy
    weighted_blocks = weighted_blocks_numpy
