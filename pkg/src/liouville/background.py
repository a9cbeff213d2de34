"""Auxiliary density beta, explicit singular parts, and the background v.

The field is split as ``phi = v + U`` with all singular behavior carried by
the background

    v = phi1 + w0 + (1/4pi) integral log|z - z'|^2 (beta - lap(w0))(z') d2z'

(genus 0; the torus analogue convolves the periodic Green function).  Here

* ``phi1 = sum_K (-2 eta_K) log|z - z_K|^2 - sum_P log|z - z_P|^2``;
* ``w0`` equals ``-log log^2|z - z_P|^2`` on a disk around each cusp and is
  smoothly cut off at twice its radius;
* ``beta`` is a smooth positive density matching the singular profile of
  ``e^phi`` near each source: ``amplitude * |zeta|^(-4 eta)`` at conical
  points, exactly ``8 / (|zeta|^2 log^2|zeta|^2)`` at cusps, a constant
  plateau ``b`` in the bulk, and a ``(R/|z|)^4`` tail outside radius R on
  the genus-0 chart.

Inside each cusp disk ``lap(w0)`` equals the cusp profile identically, so
the potential integrand ``beta - lap(w0)`` vanishes there and stays smooth.

The plateau amplitude solves the mass constraint

    integral beta d2z = 4 pi (sum 2 eta + n_parabolic + 2g - 2)

exactly in the grid quadrature: beta = b*S + P with P independent of b, so
b = (target - Q[P]) / Q[S] in closed form.

The ratio ``r = e^v / beta`` is bounded above and below by positive
constants; their logs set the truncation level L used by the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    EvaluationAtSingularity,
    ParabolicMassExcess,
    QuadratureFailure,
    RBoundViolation,
)
from .kernels import (
    GridConvolution,
    full_table,
    log_kernel_quadrant,
    potential_at_points,
    quintic_smoothstep,
    quintic_smoothstep_d1,
    quintic_smoothstep_d2,
)
from .model import (
    ScalarField,
    SolverSettings,
    SourceConfiguration,
    field_integral,
    make_sphere_grid,
    make_torus_grid,
    source_distance,
    target_beta_mass,
    validate_topology,
)

# mass budget fraction the cusp patches may consume before radii shrink
PARABOLIC_MASS_FRACTION = 0.8
LN2 = math.log(2.0)


@dataclass(frozen=True)
class Patch:
    """Geometry of one source patch: exact profile inside ``r_exact``,
    quintic blend (in log-radius) to the bulk over ``[r_exact, r_outer]``."""

    center: complex
    kind: str  # "elliptic" | "parabolic"
    eta: Optional[float]
    r_exact: float
    r_outer: float


def _torus_displacements(z, center: complex, periods) -> np.ndarray:
    d = np.asarray(z, dtype=complex) - center
    if periods is not None:
        L1 = periods[0].real
        L2 = periods[1].imag
        dx = d.real - L1 * np.round(d.real / L1)
        dy = d.imag - L2 * np.round(d.imag / L2)
        return np.abs(dx + 1j * dy)
    return np.abs(d)


def patch_geometry(config: SourceConfiguration, outer_radius: Optional[float],
                   parabolic_shrink: int = 0) -> list[Patch]:
    """Per-source patch radii.

    Elliptic: r = min(0.45 * distance to the nearest other source,
    0.45 * distance to the |z| = R circle on the genus-0 chart, 0.5).
    Parabolic additionally caps at 0.2 (keeps the w0 pole at |zeta| = 1
    outside the doubled support) and at the analytic mass budget
    sum 4 pi / |ln rho| <= 0.6 * target; ``parabolic_shrink`` halves the
    parabolic radii that many extra times.

    Transition ends stop short of neighboring patches so that exactness
    inside each patch disk survives the blending.
    """
    positions = config.positions
    n_par = len(config.parabolic)
    target = target_beta_mass(config)
    rho_budget = math.inf
    if n_par:
        # sum_P 4 pi / |ln rho| <= 0.6 * target
        rho_budget = math.exp(-n_par * 4.0 * math.pi / (0.6 * target))
    patches: list[Patch] = []
    sources = [("elliptic", s.position, s.eta) for s in config.elliptic]
    sources += [("parabolic", s.position, None) for s in config.parabolic]
    radii = []
    for kind, z, eta in sources:
        others = [p for p in positions if p != z]
        d_nn = min((source_distance(config, z, p) for p in others), default=math.inf)
        r = min(0.45 * d_nn, 0.5)
        if config.genus == 0 and outer_radius is not None:
            r = min(r, 0.45 * abs(outer_radius - abs(z)))
        if config.genus == 1:
            L_min = min(config.periods[0].real, config.periods[1].imag)
            r = min(r, 0.2 * L_min)
        if kind == "parabolic":
            r = min(r, 0.2, rho_budget) * 0.5**parabolic_shrink
        radii.append(r)
    for i, (kind, z, eta) in enumerate(sources):
        limit = math.inf
        for j, (_, zj, _) in enumerate(sources):
            if i == j:
                continue
            limit = min(limit, 0.98 * (source_distance(config, z, zj) - radii[j]))
        t = min(2.0 * radii[i], limit)
        patches.append(Patch(center=z, kind=kind, eta=eta,
                             r_exact=radii[i], r_outer=t))
    return patches


@dataclass
class BetaDensity:
    """The auxiliary density with its patch geometry and normalization."""

    config: SourceConfiguration
    patches: list[Patch]
    outer_radius: Optional[float]  # R on the genus-0 chart, None on the torus
    plateau: float  # b
    grid: ScalarField
    values: np.ndarray  # grid snapshot
    mass: float  # field_integral of the snapshot

    def __call__(self, z) -> np.ndarray:
        return self.plateau * self.shape(z) + self.cusp_part(z)

    def shape(self, z) -> np.ndarray:
        """Unit-amplitude part S: beta = b*S + cusp_part."""
        z = np.asarray(z, dtype=complex)
        out = self._far_shape(z)
        for p in self.patches:
            d = _torus_displacements(z, p.center, self.config.periods)
            zone = d < p.r_outer
            if not np.any(zone):
                continue
            chi = self._chi(d[zone], p)
            if p.kind == "elliptic":
                prof = (p.r_outer / np.maximum(d[zone], 1e-300)) ** (4.0 * p.eta)
                out[zone] = chi * prof + (1.0 - chi) * out[zone]
            else:
                out[zone] = (1.0 - chi) * out[zone]
        return out

    def cusp_part(self, z) -> np.ndarray:
        """P: the b-independent cusp contribution 8/(|zeta|^2 log^2|zeta|^2)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for p in self.patches:
            if p.kind != "parabolic":
                continue
            d = _torus_displacements(z, p.center, self.config.periods)
            zone = d < p.r_outer
            if not np.any(zone):
                continue
            chi = self._chi(d[zone], p)
            out[zone] += chi * cusp_profile(d[zone])
        return out

    @staticmethod
    def _chi(d: np.ndarray, p: Patch) -> np.ndarray:
        t = (np.log(np.maximum(d, 1e-300)) - math.log(p.r_exact)) / (
            math.log(p.r_outer) - math.log(p.r_exact)
        )
        return 1.0 - quintic_smoothstep(t)

    def _far_shape(self, z: np.ndarray) -> np.ndarray:
        if self.outer_radius is None:
            return np.ones(z.shape)
        return far_shape(np.abs(z), self.outer_radius)


def cusp_profile(d: np.ndarray) -> np.ndarray:
    """8 / (|zeta|^2 log^2 |zeta|^2) = 2 / (d^2 ln^2 d)."""
    ln = np.log(np.maximum(d, 1e-300))
    return 2.0 / (np.maximum(d, 1e-300) ** 2 * ln * ln)


def far_shape(rad, R: float) -> np.ndarray:
    """1 inside |z| <= R, exactly (R/|z|)^4 beyond 2R, C^2 blend between.

    Realized as exp(-4 m(x)), x = log(|z|/R), with m(x) = x * s(x / ln 2).
    """
    rad = np.asarray(rad, dtype=float)
    x = np.log(np.maximum(rad, 1e-300) / R)
    m = np.where(x > 0.0, x * quintic_smoothstep(x / LN2), 0.0)
    return np.exp(-4.0 * m)


def build_beta(config: SourceConfiguration, settings: SolverSettings,
               grid: Optional[ScalarField] = None) -> BetaDensity:
    """Construct the normalized density on the solver grid.

    The plateau amplitude is solved in closed form against the midpoint
    quadrature of the truncated computational domain, so the snapshot mass
    matches the target to rounding.  If the fixed cusp-patch mass exhausts
    the budget, the cusp radii are halved and the build retried.
    """
    validate_topology(config)
    target = target_beta_mass(config)
    R = None
    if config.genus == 0:
        R = 2.0 * max([abs(z) for z in config.positions] + [0.0]) + 2.0
    if grid is None:
        if config.genus == 0:
            r_c = settings.r_c if settings.r_c is not None else 4.0 * R
            grid = make_sphere_grid(config, settings, r_c)
        else:
            grid = make_torus_grid(config, settings)

    for shrink in range(0, 40):
        patches = patch_geometry(config, R, parabolic_shrink=shrink)
        beta = BetaDensity(config=config, patches=patches, outer_radius=R,
                           plateau=1.0, grid=grid, values=np.empty(0), mass=0.0)
        zc = grid.cell_centers()
        shape_vals = beta.shape(zc)
        cusp_vals = beta.cusp_part(zc)
        q_shape = field_integral(grid.with_values(shape_vals))
        q_cusp = field_integral(grid.with_values(cusp_vals))
        if not (np.isfinite(q_shape) and np.isfinite(q_cusp)):
            raise QuadratureFailure("non-finite density mass")
        if q_cusp < PARABOLIC_MASS_FRACTION * target:
            b = (target - q_cusp) / q_shape
            values = b * shape_vals + cusp_vals
            beta.plateau = b
            beta.values = values
            beta.mass = field_integral(grid.with_values(values))
            return beta
    raise ParabolicMassExcess(
        f"cusp patches hold {q_cusp:.6g} of target {target:.6g} "
        "even after shrinking"
    )


# ---------------------------------------------------------------------------
# explicit singular parts
# ---------------------------------------------------------------------------

def phi1(config: SourceConfiguration, z, min_dist: float = 1e-12):
    """sum_K (-2 eta_K) log|z - z_K|^2 - sum_P log|z - z_P|^2."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    for kind, pos, eta in _source_triples(config):
        d = _torus_log_distance_arg(config, z, pos)
        if np.any(d < min_dist):
            raise EvaluationAtSingularity(f"phi1 evaluated at source {pos}")
        coeff = -2.0 * eta if kind == "elliptic" else -1.0
        out += coeff * 2.0 * np.log(d)
    return out


def _source_triples(config):
    for s in config.elliptic:
        yield "elliptic", s.position, s.eta
    for s in config.parabolic:
        yield "parabolic", s.position, None


def _torus_log_distance_arg(config, z, pos):
    # On the torus the log singular parts enter through the periodic Green
    # function instead; plain distance is only used on the genus-0 chart.
    return _torus_displacements(z, pos, config.periods)


def w0(config: SourceConfiguration, z, patches: Optional[list[Patch]] = None):
    """Compactly supported cusp compensator.

    Equals ``-log log^2 |zeta|^2`` for |zeta| <= rho_P, cut off to zero by
    |zeta| >= 2 rho_P with a quintic smoothstep in log-radius.
    """
    if patches is None:
        R = None
        if config.genus == 0:
            R = 2.0 * max([abs(p) for p in config.positions] + [0.0]) + 2.0
        patches = patch_geometry(config, R)
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    for p in patches:
        if p.kind != "parabolic":
            continue
        d = _torus_displacements(z, p.center, config.periods)
        zone = d < 2.0 * p.r_exact
        if not np.any(zone):
            continue
        xi = np.log(np.maximum(d[zone], 1e-300))
        tau = (xi - math.log(p.r_exact)) / LN2
        chi = 1.0 - quintic_smoothstep(tau)
        out[zone] += chi * (-np.log(4.0 * xi * xi))
    return out


def w0_laplacian(config: SourceConfiguration, z, patches: list[Patch]):
    """lap(w0), from the closed-form radial second derivative in log-radius.

    With xi = ln|zeta| and g(xi) = chi(xi) q(xi), q = -ln(4 xi^2):
    lap = e^(-2 xi) (chi'' q + 2 chi' q' + chi q'').  Inside the patch this
    reduces to the cusp profile 2 / (d^2 ln^2 d).
    """
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    for p in self_patches(patches):
        d = _torus_displacements(z, p.center, config.periods)
        zone = d < 2.0 * p.r_exact
        if not np.any(zone):
            continue
        xi = np.log(np.maximum(d[zone], 1e-300))
        tau = (xi - math.log(p.r_exact)) / LN2
        chi = 1.0 - quintic_smoothstep(tau)
        chi1 = -quintic_smoothstep_d1(tau) / LN2
        chi2 = -quintic_smoothstep_d2(tau) / (LN2 * LN2)
        q = -np.log(4.0 * xi * xi)
        q1 = -2.0 / xi
        q2 = 2.0 / (xi * xi)
        out[zone] += np.exp(-2.0 * xi) * (chi2 * q + 2.0 * chi1 * q1 + chi * q2)
    return out


def self_patches(patches: list[Patch]):
    return [p for p in patches if p.kind == "parabolic"]


def newtonian_potential(grid: ScalarField, rho: np.ndarray, z,
                        conv: Optional[GridConvolution] = None):
    """(1/4pi) integral log|z - z'|^2 rho(z') d2z' over the grid.

    ``z = None`` returns the full grid snapshot via the displacement-table
    convolution; otherwise evaluates at arbitrary points with analytic
    handling of the cells surrounding each point.
    """
    if z is None:
        if conv is None:
            conv = log_kernel_convolution(grid)
        return conv.apply(rho)
    return potential_at_points(z, grid, rho)


def log_kernel_convolution(grid: ScalarField, method: str = "auto") -> GridConvolution:
    q = log_kernel_quadrant(max(grid.nx, grid.ny) - 1, grid.spacing)
    T = full_table(q[: grid.ny, : grid.nx])
    return GridConvolution(T, grid.ny, grid.nx, method=method)


# ---------------------------------------------------------------------------
# the genus-0 background
# ---------------------------------------------------------------------------

@dataclass
class Background:
    """Everything the solvers consume: grids of beta and r, measured bounds,
    the truncation level L, and off-grid evaluators for verification."""

    config: SourceConfiguration
    settings: SolverSettings
    grid: ScalarField
    beta: BetaDensity
    beta_grid: np.ndarray
    v_grid: np.ndarray
    r_grid: np.ndarray
    r_bounds: tuple[float, float]
    mass: float
    v_eval: Callable
    area: Optional[float] = None  # torus fundamental-domain area

    @property
    def L(self) -> float:
        lam1, lam2 = self.r_bounds
        return max(abs(math.log(lam1)), abs(math.log(lam2)))


def build_background(config: SourceConfiguration, beta: BetaDensity,
                     settings: SolverSettings) -> Background:
    """Assemble v = phi1 + w0 + potential(beta - lap w0) and r = e^v / beta."""
    grid = beta.grid
    zc = grid.cell_centers()
    rho_v = beta.values - w0_laplacian(config, zc, beta.patches)
    conv = log_kernel_convolution(grid, method=settings.conv_method)
    pot_grid = conv.apply(rho_v)
    v_grid = phi1(config, zc) + w0(config, zc, beta.patches) + pot_grid

    def v_eval(z):
        pot = potential_at_points(z, grid, rho_v)
        return phi1(config, z) + w0(config, z, beta.patches) + pot

    log_r = v_grid - np.log(beta.values)
    if not np.all(np.isfinite(log_r)):
        raise RBoundViolation("r = e^v / beta non-finite on the grid")
    r_grid = np.exp(log_r)
    lam1 = float(r_grid.min())
    lam2 = float(r_grid.max())
    if not (0.0 < lam1 <= lam2 < math.inf):
        raise RBoundViolation(f"r bounds ({lam1}, {lam2}) out of range")
    return Background(
        config=config,
        settings=settings,
        grid=grid,
        beta=beta,
        beta_grid=beta.values,
        v_grid=v_grid,
        r_grid=r_grid,
        r_bounds=(lam1, lam2),
        mass=beta.mass,
        v_eval=v_eval,
    )
