"""Source configurations, topology checks, and sampled grid fields.

A configuration prescribes point singularities for the curvature equation
``laplacian(phi) = exp(phi)``:

* elliptic sources: conical points where ``phi + 2*eta*log|z - z_K|^2``
  stays bounded, with weight ``0 < eta < 1/2``;
* parabolic sources: cusps where ``phi + log|z - z_P|^2 +
  log(log^2 |z - z_P|^2)`` stays bounded.

A solution exists iff ``sum(2*eta) + n_parabolic + 2g - 2 > 0``, which is
exactly what :func:`validate_topology` decides.  All numerical fields are
cell-centered samples on uniform square-cell grids (:class:`ScalarField`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    CoincidentSources,
    ConfigError,
    InvalidGrid,
    InvalidWeight,
    TopologyViolation,
)

MIN_SEPARATION_FACTOR = 1e-6  # of the domain scale


@dataclass(frozen=True)
class EllipticSource:
    position: complex
    eta: float


@dataclass(frozen=True)
class ParabolicSource:
    position: complex


@dataclass(frozen=True)
class SourceConfiguration:
    genus: int
    elliptic: tuple[EllipticSource, ...] = ()
    parabolic: tuple[ParabolicSource, ...] = ()
    periods: Optional[tuple[complex, complex]] = None

    @property
    def positions(self) -> list[complex]:
        return [s.position for s in self.elliptic] + [s.position for s in self.parabolic]

    @property
    def deficit(self) -> float:
        """sum(2*eta) + n_parabolic + 2g - 2, positive iff solvable."""
        return (
            sum(2.0 * s.eta for s in self.elliptic)
            + len(self.parabolic)
            + 2 * self.genus
            - 2.0
        )

    def domain_scale(self) -> float:
        if self.genus == 1 and self.periods is not None:
            return min(abs(self.periods[0]), abs(self.periods[1]))
        return max([1.0] + [abs(p) for p in self.positions])


@dataclass(frozen=True)
class ScalarField:
    """Cell-centered samples of a real function on a uniform square-cell grid.

    ``values[iy, ix]`` is the sample at ``origin + ((ix + 1/2) + (iy + 1/2) i) * spacing``;
    ``origin`` is the lower-left corner of the covered rectangle.
    """

    origin: complex
    spacing: float
    nx: int
    ny: int
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        if self.spacing <= 0:
            raise InvalidGrid("spacing must be positive")
        if self.nx < 4 or self.ny < 4:
            raise InvalidGrid("grid must be at least 4x4")
        if self.values.shape != (self.ny, self.nx):
            raise InvalidGrid(
                f"values shape {self.values.shape} != (ny, nx) = {(self.ny, self.nx)}"
            )

    def cell_centers(self) -> np.ndarray:
        """Complex array of shape (ny, nx) with the sample positions."""
        x = self.origin.real + (np.arange(self.nx) + 0.5) * self.spacing
        y = self.origin.imag + (np.arange(self.ny) + 0.5) * self.spacing
        return x[None, :] + 1j * y[:, None]

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return replace(self, values=values)

    def interp(self, z) -> np.ndarray:
        """Bilinear interpolation at complex points (clamped to the grid)."""
        z = np.asarray(z)
        fx = (z.real - self.origin.real) / self.spacing - 0.5
        fy = (z.imag - self.origin.imag) / self.spacing - 0.5
        if self.periodic:
            fx = np.mod(fx, self.nx)
            fy = np.mod(fy, self.ny)
            ix0 = np.floor(fx).astype(int)
            iy0 = np.floor(fy).astype(int)
            tx = fx - ix0
            ty = fy - iy0
            ix1 = (ix0 + 1) % self.nx
            iy1 = (iy0 + 1) % self.ny
            ix0 %= self.nx
            iy0 %= self.ny
        else:
            fx = np.clip(fx, 0.0, self.nx - 1.0)
            fy = np.clip(fy, 0.0, self.ny - 1.0)
            ix0 = np.minimum(np.floor(fx).astype(int), self.nx - 2)
            iy0 = np.minimum(np.floor(fy).astype(int), self.ny - 2)
            tx = fx - ix0
            ty = fy - iy0
            ix1 = ix0 + 1
            iy1 = iy0 + 1
        v = self.values
        return (
            v[iy0, ix0] * (1 - tx) * (1 - ty)
            + v[iy0, ix1] * tx * (1 - ty)
            + v[iy1, ix0] * (1 - tx) * ty
            + v[iy1, ix1] * tx * ty
        )


@dataclass(frozen=True)
class SolverSettings:
    """Knobs shared by both solvers.

    ``tolerance`` is the sup-norm stopping threshold (iterate change for the
    fixed-point solver, gradient for the minimizer).  ``r_c`` overrides the
    truncation radius of the genus-0 computational square ``[-r_c, r_c]^2``;
    the default is four times the density support radius.
    """

    n: int = 256
    r_c: Optional[float] = None
    damping: float = 0.5
    tolerance: float = 1e-7
    max_iterations: int = 600
    seed: int = 0
    conv_method: str = "auto"  # auto | direct | fft

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.conv_method not in ("auto", "direct", "fft"):
            raise ValueError(f"unknown conv_method {self.conv_method!r}")


def validate_topology(config: SourceConfiguration) -> None:
    """Raise unless the configuration admits a solution.

    Checks, in order: weight range, genus support, source separation, and
    the strict inequality sum(2*eta) + n_parabolic + 2g - 2 > 0.
    """
    for i, s in enumerate(config.elliptic):
        if not 0.0 < s.eta < 0.5:
            raise InvalidWeight(
                f"elliptic source {i}: eta={s.eta} outside (0, 1/2)"
            )
    if config.genus < 0:
        raise ConfigError("genus must be a non-negative integer")
    if config.genus == 1:
        if config.periods is None:
            raise ConfigError("genus 1 requires periods")
        p1, p2 = config.periods
        cross = p1.real * p2.imag - p1.imag * p2.real
        if abs(cross) < 1e-12 * (abs(p1) * abs(p2) + 1e-300):
            raise ConfigError("periods are linearly dependent over the reals")
        if abs(p1.imag) > 1e-12 * abs(p1) or abs(p2.real) > 1e-12 * abs(p2):
            raise InvalidGrid(
                "only rectangular tori are supported: periods must be "
                "(L1, i*L2) with L1, L2 real positive"
            )
        for i, z in enumerate(config.positions):
            if not (0 <= z.real < p1.real and 0 <= z.imag < p2.imag):
                raise ConfigError(
                    f"source {i} at {z} lies outside the fundamental rectangle"
                )
    positions = config.positions
    min_sep = MIN_SEPARATION_FACTOR * config.domain_scale()
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            d = source_distance(config, positions[i], positions[j])
            if d <= min_sep:
                raise CoincidentSources(
                    f"sources {i} and {j} are {d:.3e} apart (minimum {min_sep:.3e})"
                )
    if not config.deficit > 0.0:
        raise TopologyViolation(
            "no solution: sum(2*eta) + n_parabolic + 2g - 2 = "
            f"{config.deficit:.6g} is not positive"
        )


def source_distance(config: SourceConfiguration, a: complex, b: complex) -> float:
    """Distance between two points, modulo periods on the torus."""
    d = b - a
    if config.genus == 1 and config.periods is not None:
        L1 = config.periods[0].real
        L2 = config.periods[1].imag
        dx = d.real - L1 * round(d.real / L1)
        dy = d.imag - L2 * round(d.imag / L2)
        return math.hypot(dx, dy)
    return abs(d)


def target_beta_mass(config: SourceConfiguration) -> float:
    """Required total mass of the auxiliary density: 4*pi times the deficit."""
    return 4.0 * math.pi * config.deficit


def field_integral(f: ScalarField) -> float:
    """Midpoint-rule integral spacing^2 * sum(values).

    numpy's pairwise summation over the C-contiguous value buffer fixes the
    reduction order, so the result is reproducible bit for bit.
    """
    return float(f.spacing**2 * np.sum(np.ascontiguousarray(f.values)))


def make_sphere_grid(config: SourceConfiguration, settings: SolverSettings,
                     r_c: float) -> ScalarField:
    """Square cell-centered grid on [-r_c, r_c]^2, nudged off source centers."""
    n = settings.n
    h = 2.0 * r_c / n
    origin = complex(-r_c, -r_c)
    origin = _dodge_sources(origin, h, config)
    vals = np.zeros((n, n))
    return ScalarField(origin=origin, spacing=h, nx=n, ny=n, values=vals)


def make_torus_grid(config: SourceConfiguration, settings: SolverSettings) -> ScalarField:
    """Periodic grid covering the fundamental rectangle exactly.

    The cell must be square, so ny is derived from the aspect ratio; the
    periods must make ny * spacing match L2 to rounding accuracy.
    """
    L1 = config.periods[0].real
    L2 = config.periods[1].imag
    nx = settings.n
    h = L1 / nx
    ny = round(L2 / h)
    if abs(ny * h - L2) > 1e-9 * max(L1, L2):
        raise InvalidGrid(
            f"period ratio {L2 / L1} not commensurate with nx={nx}: "
            "cells would not be square"
        )
    origin = _dodge_sources(0j, h, config)
    vals = np.zeros((ny, nx))
    return ScalarField(origin=origin, spacing=h, nx=nx, ny=ny, values=vals,
                       periodic=True)


def _dodge_sources(origin: complex, h: float, config: SourceConfiguration) -> complex:
    """Shift the origin by half a cell if a source sits on a cell center."""
    for _ in range(4):
        hit = False
        for z in config.positions:
            fx = (z.real - origin.real) / h - 0.5
            fy = (z.imag - origin.imag) / h - 0.5
            if abs(fx - round(fx)) < 1e-9 and abs(fy - round(fy)) < 1e-9:
                hit = True
                break
        if not hit:
            return origin
        origin += (0.5 + 0.5j) * h
    return origin


# ---------------------------------------------------------------------------
# configuration file format (JSON)
#
# {
#   "genus": 0,
#   "periods": [[1.0, 0.0], [0.0, 1.0]],          # genus 1 only
#   "elliptic": [{"position": [re, im], "eta": 0.45}, ...],
#   "parabolic": [{"position": [re, im]}, ...]
# }
# ---------------------------------------------------------------------------

def _complex_from_pair(value, where: str) -> complex:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"field '{where}' must be a [re, im] pair of numbers")
    return complex(value[0], value[1])


def config_from_dict(data: dict) -> SourceConfiguration:
    if not isinstance(data, dict):
        raise ConfigError("top-level configuration must be an object")
    if "genus" not in data:
        raise ConfigError("missing field 'genus'")
    genus = data["genus"]
    if not isinstance(genus, int) or genus < 0:
        raise ConfigError("field 'genus' must be a non-negative integer")

    elliptic = []
    for i, e in enumerate(data.get("elliptic", [])):
        if "position" not in e:
            raise ConfigError(f"elliptic[{i}]: missing field 'position'")
        if "eta" not in e:
            raise ConfigError(f"elliptic[{i}]: missing field 'eta'")
        if not isinstance(e["eta"], (int, float)):
            raise ConfigError(f"elliptic[{i}].eta must be a number")
        elliptic.append(
            EllipticSource(
                position=_complex_from_pair(e["position"], f"elliptic[{i}].position"),
                eta=float(e["eta"]),
            )
        )
    parabolic = []
    for i, p in enumerate(data.get("parabolic", [])):
        if "position" not in p:
            raise ConfigError(f"parabolic[{i}]: missing field 'position'")
        parabolic.append(
            ParabolicSource(
                position=_complex_from_pair(p["position"], f"parabolic[{i}].position")
            )
        )
    periods = None
    if genus == 1:
        if "periods" not in data:
            raise ConfigError("genus 1 configuration requires field 'periods'")
        raw = data["periods"]
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise ConfigError("field 'periods' must hold two [re, im] pairs")
        periods = (
            _complex_from_pair(raw[0], "periods[0]"),
            _complex_from_pair(raw[1], "periods[1]"),
        )
    return SourceConfiguration(
        genus=genus,
        elliptic=tuple(elliptic),
        parabolic=tuple(parabolic),
        periods=periods,
    )


def load_config(path) -> SourceConfiguration:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)
