"""J-function: mutual information of a consistent Gaussian LLR.

J(sigma) = I(X; L) for L ~ N(x sigma^2 / 2, sigma^2), evaluated with
Gauss-Hermite quadrature. The inverse is a monotone cubic (PCHIP) fit through
a dense tabulation. Dense uniform tables are also exported for the compiled
PEXIT kernel.
"""
import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.interpolate import PchipInterpolator

SIGMA_CAP = 60.0  # J^-1(1) maps here; J(SIGMA_CAP) == 1 in double precision
GH_NODES = 200

_gh_x, _gh_w = hermgauss(GH_NODES)
_gh_z = np.sqrt(2.0) * _gh_x
_gh_w = _gh_w / np.sqrt(np.pi)


def _j_quad(sigma):
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    llr = 0.5 * sigma[:, None] ** 2 + sigma[:, None] * _gh_z[None, :]
    loss = np.logaddexp(0.0, -llr) / np.log(2.0)
    return 1.0 - loss @ _gh_w


# fine grid where J varies, coarse beyond sigma=10 where 1 - J < 2e-6
_SIGMA_GRID = np.concatenate([np.linspace(0.0, 10.0, 4001), np.linspace(10.0, SIGMA_CAP, 501)[1:]])
_J_GRID = np.clip(_j_quad(_SIGMA_GRID), 0.0, 1.0)
_J_GRID[0] = 0.0
_J_GRID = np.maximum.accumulate(_J_GRID)

# strictly increasing part for the inverse
_keep = np.concatenate([[True], np.diff(_J_GRID) > 0])
_inv = PchipInterpolator(_J_GRID[_keep], _SIGMA_GRID[_keep])
_J_TOP = _J_GRID[_keep][-1]


def j_fun(sigma):
    """Mutual information for LLR standard deviation ``sigma`` (scalar or array)."""
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("sigma must be non-negative")
    out = np.where(s == 0, 0.0, np.clip(_j_quad(s.ravel()).reshape(s.shape), 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def j_inv(mi):
    """Inverse of :func:`j_fun`; ``mi`` = 1 maps to ``SIGMA_CAP``."""
    m = np.asarray(mi, dtype=np.float64)
    if np.any((m < 0) | (m > 1)):
        raise ValueError("mutual information must lie in [0, 1]")
    out = np.where(m >= _J_TOP, SIGMA_CAP, _inv(np.minimum(m, _J_TOP)))
    out = np.where(m <= 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


# Lookup tables for njit kernels (np.interp on the strictly increasing part).
TABLE_SIGMA = np.ascontiguousarray(_SIGMA_GRID[_keep])
TABLE_J = np.ascontiguousarray(_J_GRID[_keep])
