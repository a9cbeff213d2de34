"""Logarithmic-kernel quadrature tables and convolution engines.

Grid potentials have the form ``out[i] = sum_j T[i - j] * g[j]`` where the
table ``T`` carries the quadrature weight of the kernel
``(1/4pi) log|z - z'|^2`` for one cell-to-cell displacement.  Two tables are
provided:

``log_kernel_table``
    Plain midpoint weights ``(1/4pi) h^2 log|d|^2`` for far cells, with the
    3x3 near-field block replaced by the analytic integral of the kernel
    over the square cell.  This is the continuum-faithful quadrature used to
    build the background potential.

``inverse_laplacian_table``
    The Green function of the five-point lattice Laplacian, calibrated so
    its far field matches ``(1/4pi) h^2 log|d|^2`` up to an additive
    constant.  Applying the five-point stencil to this convolution
    reproduces the density exactly (to rounding), which makes fixed points
    of the integral-equation solver exact discrete PDE solutions.

The direct O(N^2) summation is the hot kernel; it dispatches to the
compiled extension when available and to scipy otherwise.  The fast path
embeds the table in a circulant and multiplies in Fourier space; both paths
evaluate the same sum and agree to rounding.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import fft as sfft
from scipy.signal import convolve2d

from .errors import QuadratureFailure

# Force the pure numpy/scipy code path (for benchmarks and debugging).
_PURE = os.environ.get("LIOUVILLE_PURE_PYTHON", "") not in ("", "0")

if not _PURE:
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        _ckernels = None
else:
    _ckernels = None

HAVE_EXT = _ckernels is not None

# Direct summation is the default up to this many cells per side.
DIRECT_LIMIT = 96

# Lattice Green function: G(m,n) ~ (1/4pi) log(m^2+n^2) + CGAMMA + corrections.
CGAMMA = (2.0 * np.euler_gamma + math.log(8.0)) / (4.0 * math.pi)
_C4R2 = -1.0 / (24.0 * math.pi)
_C4R4 = -0.011938085176572877
_C8R4 = -0.016607325854995778
_EXACT_RANGE = 64


def quintic_smoothstep(t):
    """C^2 ramp 6t^5 - 15t^4 + 10t^3, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def quintic_smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc * tc * (tc - 1.0) * (tc - 1.0), 0.0)


def quintic_smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * tc * (2.0 * tc - 1.0) * (tc - 1.0), 0.0)


# ---------------------------------------------------------------------------
# analytic cell integral of log|z|^2
# ---------------------------------------------------------------------------

def _F(x, y):
    """Antiderivative of log(x^2+y^2): d2F/dxdy = log(x^2+y^2).

    F = xy(log(x^2+y^2) - 3) + x^2 atan(y/x) + y^2 atan(x/y), with each term
    extended by its limit 0 where the relevant factor vanishes.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    r2 = x * x + y * y
    xs = np.where(x == 0.0, 1.0, x)
    ys = np.where(y == 0.0, 1.0, y)
    with np.errstate(divide="ignore"):
        t1 = np.where(r2 == 0.0, 0.0, x * y * (np.log(np.where(r2 == 0.0, 1.0, r2)) - 3.0))
    t2 = np.where(x == 0.0, 0.0, x * x * np.arctan(y / xs))
    t3 = np.where(y == 0.0, 0.0, y * y * np.arctan(x / ys))
    return t1 + t2 + t3


def cell_log_integral(x0, x1, y0, y1):
    """Exact integral of log(x^2 + y^2) over the rectangle [x0,x1]x[y0,y1].

    The integrand has an integrable singularity at the origin; the
    antiderivative extends continuously there.
    """
    return _F(x1, y1) - _F(x0, y1) - _F(x1, y0) + _F(x0, y0)


# ---------------------------------------------------------------------------
# kernel tables
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def _displacement_log(nmax: int):
    """(1/4pi) log(m^2 + n^2) grid for displacements 0..nmax (0 at origin)."""
    m = np.arange(nmax + 1, dtype=float)
    r2 = m[:, None] ** 2 + m[None, :] ** 2
    with np.errstate(divide="ignore"):
        out = np.log(r2) / (4.0 * math.pi)
    out[0, 0] = 0.0
    return out


@lru_cache(maxsize=4)
def log_kernel_quadrant(nmax: int, spacing: float):
    """Quadrant table (displacements 0..nmax) of the log-kernel quadrature.

    Entry (m, n) is the weight multiplying the cell value at displacement
    (m*h, n*h): ``(1/4pi) h^2 log|d|^2`` away from the origin and the exact
    cell integral of ``(1/4pi) log|z|^2`` for the 3x3 near block.
    """
    h = spacing
    T = (_displacement_log(nmax) + math.log(h * h) / (4.0 * math.pi)) * h * h
    for m in range(0, min(2, nmax + 1)):
        for n in range(0, min(2, nmax + 1)):
            T[m, n] = cell_log_integral(
                (m - 0.5) * h, (m + 0.5) * h, (n - 0.5) * h, (n + 0.5) * h
            ) / (4.0 * math.pi)
    return T


@lru_cache(maxsize=2)
def lattice_green_exact(E: int = _EXACT_RANGE):
    """Exact lattice Green values G(m,n), 0 <= m,n <= E, via recurrence.

    Seeds: G(0,0) = 0, G(1,0) = 1/4, and the closed-form diagonal
    G(k,k) = (1/pi) sum_{j<=k} 1/(2j-1).  The outward march amplifies
    rounding like (2+sqrt(3))^m, so it runs in 80-digit arithmetic.
    """
    with mp.workdps(80):
        G = {(0, 0): mp.mpf(0)}
        acc = mp.mpf(0)
        for k in range(1, E + 1):
            acc += mp.mpf(1) / (2 * k - 1)
            G[(k, k)] = acc / mp.pi
        G[(1, 0)] = mp.mpf(1) / 4
        for m in range(1, E):
            G[(m + 1, m)] = 2 * G[(m, m)] - G[(m, m - 1)]
            for n in range(m - 1, -1, -1):
                below = G[(m, 1)] if n == 0 else G[(m, n - 1)]
                G[(m + 1, n)] = 4 * G[(m, n)] - G[(m - 1, n)] - G[(m, n + 1)] - below
        out = np.empty((E + 1, E + 1))
        for (m, n), v in G.items():
            out[m, n] = float(v)
            out[n, m] = float(v)
    return out


@lru_cache(maxsize=4)
def lattice_green_quadrant(nmax: int):
    """Lattice Green function G(m,n) for displacements 0..nmax.

    Exact recurrence values inside ``_EXACT_RANGE``; beyond, the asymptotic
    series with fitted anisotropy corrections (absolute error < 2e-11 at the
    seam, decaying like r^-6).
    """
    m = np.arange(nmax + 1, dtype=float)
    M, N = np.meshgrid(m, m, indexing="ij")
    r2 = M * M + N * N
    with np.errstate(divide="ignore", invalid="ignore"):
        w4 = (M + 1j * N) ** 4 / (r2 * r2)
        c4 = w4.real
        c8 = (w4 * w4).real
        G = (
            np.log(r2) / (4.0 * math.pi)
            + CGAMMA
            + _C4R2 * c4 / r2
            + (_C4R4 * c4 + _C8R4 * c8) / (r2 * r2)
        )
    E = min(_EXACT_RANGE, nmax)
    G[: E + 1, : E + 1] = lattice_green_exact()[: E + 1, : E + 1]
    return G


def inverse_laplacian_quadrant(nmax: int, spacing: float):
    """Quadrant table whose convolution is the exact 5-point inverse.

    Calibrated additively so the far field agrees with the continuum
    quadrature table; additive kernel constants are annihilated by the
    zero-mean densities the solver feeds in.
    """
    h = spacing
    shift = math.log(h * h) / (4.0 * math.pi) - CGAMMA
    return (lattice_green_quadrant(nmax) + shift) * (h * h)


def full_table(quadrant: np.ndarray) -> np.ndarray:
    """Reflect a quadrant table to the full (2n-1)^2 displacement table."""
    q = np.asarray(quadrant)
    n = q.shape[0]
    T = np.empty((2 * n - 1, 2 * n - 1))
    T[n - 1 :, n - 1 :] = q
    T[: n - 1, n - 1 :] = q[:0:-1, :]
    T[n - 1 :, : n - 1] = q[:, :0:-1]
    T[: n - 1, : n - 1] = q[:0:-1, :0:-1]
    return T


# ---------------------------------------------------------------------------
# convolution engines
# ---------------------------------------------------------------------------

def _convolve_direct_numpy(table: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # 'valid' convolution of the (2ny-1, 2nx-1) table with the density is
    # exactly out[i,j] = sum_kl T[i-k+ny-1, j-l+nx-1] rho[k,l].
    return convolve2d(table, rho, mode="valid")


def convolve_direct(table: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Direct O(N^2) table convolution (reference path, hot kernel)."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    if _ckernels is not None:
        return _ckernels.convolve_table(table, rho)
    return _convolve_direct_numpy(table, rho)


class FFTConvolver:
    """Circulant embedding of a displacement table; reusable across applies."""

    def __init__(self, table: np.ndarray, ny: int, nx: int):
        self.ny, self.nx = ny, nx
        py, px = 2 * ny, 2 * nx
        pad = np.zeros((py, px))
        iy = np.arange(-(ny - 1), ny) % py
        ix = np.arange(-(nx - 1), nx) % px
        pad[np.ix_(iy, ix)] = table
        self._shape = (py, px)
        self._khat = sfft.rfft2(pad)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        py, px = self._shape
        buf = np.zeros((py, px))
        buf[: self.ny, : self.nx] = rho
        out = sfft.irfft2(sfft.rfft2(buf) * self._khat, s=(py, px))
        return np.ascontiguousarray(out[: self.ny, : self.nx])


class GridConvolution:
    """Convolution against a fixed displacement table, method-selectable."""

    def __init__(self, table: np.ndarray, ny: int, nx: int, method: str = "auto"):
        if table.shape != (2 * ny - 1, 2 * nx - 1):
            raise ValueError("table shape does not match the grid")
        self.table = table
        self.ny, self.nx = ny, nx
        if method == "auto":
            method = "direct" if max(nx, ny) <= DIRECT_LIMIT else "fft"
        self.method = method
        self._fft = FFTConvolver(table, ny, nx) if method == "fft" else None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.ny, self.nx):
            raise ValueError("density shape does not match the grid")
        if self._fft is not None:
            out = self._fft.apply(rho)
        else:
            out = convolve_direct(self.table, rho)
        if not np.all(np.isfinite(out)):
            raise QuadratureFailure("non-finite value in kernel convolution")
        return out


# ---------------------------------------------------------------------------
# off-grid evaluation
# ---------------------------------------------------------------------------

def potential_at_points(points, grid, rho: np.ndarray, chunk: int = 64) -> np.ndarray:
    """(1/4pi) integral of log|z - z'|^2 rho(z') over the grid, at arbitrary z.

    Far cells use the midpoint rule; the 3x3 block of cells around each
    evaluation point is integrated analytically against the cell value.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
    centers = grid.cell_centers()
    h = grid.spacing
    vals = rho * (h * h / (4.0 * math.pi))
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        zs = pts[start : start + chunk]
        d2 = np.abs(zs[:, None, None] - centers[None, :, :]) ** 2
        near = d2 < (2.5 * h) ** 2
        with np.errstate(divide="ignore"):
            contrib = np.log(d2) * vals[None, :, :]
        contrib[near] = 0.0
        acc = contrib.reshape(zs.shape[0], -1).sum(axis=1)
        # analytic near-field: integrate the kernel over each near cell
        for k in range(zs.shape[0]):
            iy, ix = np.nonzero(near[k])
            if iy.size == 0:
                continue
            cz = centers[iy, ix]
            x0 = cz.real - 0.5 * h - zs[k].real
            y0 = cz.imag - 0.5 * h - zs[k].imag
            cell = cell_log_integral(x0, x0 + h, y0, y0 + h)
            acc[k] += float(np.sum(cell * rho[iy, ix])) / (4.0 * math.pi)
        out[start : start + chunk] = acc
    if np.isscalar(points) or np.asarray(points).ndim == 0:
        return out[0]
    return out.reshape(np.asarray(points).shape)
