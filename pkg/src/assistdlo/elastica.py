"""Heavy-elastica cantilever solver and flexural-rigidity estimation.

A clamped-free rod deflecting under its own weight obeys
theta'' + K (1 - s) cos(theta) = 0 on s in [0, 1] with theta(0) = 0 and
theta'(1) = 0, where K = lambda * g * L_free^3 / EI. The solver shoots on the
root slope with RK4 integration; the downward-bending branch is reported with
theta <= 0. Measured tip projections invert to EI through a precomputed
log-spaced lookup of the normalized projection integral(cos theta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, OutOfRange

GRAVITY = 9.81
SHOOT_TOL = 1e-9
MAX_SHOOT_ITERS = 200


@dataclass(frozen=True, eq=False)
class ElasticaSolution:
    K: float
    theta: np.ndarray      # theta(s) on a uniform grid over [0, 1], theta <= 0
    projection: float      # integral_0^1 cos(theta) ds, in (0, 1]


@dataclass(frozen=True, eq=False)
class ProjectionTable:
    ks: np.ndarray
    projections: np.ndarray

    def __post_init__(self):
        ks = np.asarray(self.ks, dtype=np.float64)
        pr = np.asarray(self.projections, dtype=np.float64)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "projections", pr)
        if len(ks) < 2 or np.any(np.diff(ks) <= 0):
            raise ValueError("K grid must be strictly increasing")
        if np.any(np.diff(pr) >= 0):
            raise ValueError("projection must be strictly decreasing in K")

    def to_csv(self) -> str:
        lines = ["K,projection"]
        lines += [f"{float(k)!r},{float(p)!r}"
                  for k, p in zip(self.ks, self.projections)]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "ProjectionTable":
        rows = [ln.split(",") for ln in text.strip().splitlines()[1:]]
        data = np.array([[float(a), float(b)] for a, b in rows])
        return ProjectionTable(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class RopeMeasurement:
    total_length: float
    mass: float
    free_length: float
    projection_distance: float
    diameter: float = 0.0

    def __post_init__(self):
        if not 0 < self.free_length <= self.total_length:
            raise ValueError("free length must be in (0, total length]")
        if not 0 < self.projection_distance <= self.free_length:
            raise ValueError("projection distance must be in (0, free length]")
        if self.mass <= 0:
            raise ValueError("mass must be positive")


def _integrate_batch(ks: np.ndarray, slopes: np.ndarray, n_grid: int,
                     keep_path: bool = False):
    """RK4 on u'' = -K (1 - s) cos(u) from u(0) = 0, u'(0) = slope.

    Returns (u(1), u'(1), overshoot) arrays, plus the full u path when
    requested. The downward branch is the mirror u = -theta, so slopes are
    >= 0; `overshoot` marks trajectories that passed the vertical (u > pi/2),
    which cannot happen on the physical branch.
    """
    h = 1.0 / n_grid
    m = len(slopes)
    u = np.zeros(m, dtype=np.float64)
    up = slopes.astype(np.float64).copy()
    dip_at = np.full(m, np.inf)   # first step where u' went negative
    over_at = np.full(m, np.inf)  # first step where u passed pi/2
    path = np.zeros((n_grid + 1, m)) if keep_path else None

    def acc(s, u_):
        return -ks * (1.0 - s) * np.cos(u_)

    for i in range(n_grid):
        s = i * h
        k1u, k1p = up, acc(s, u)
        k2u, k2p = up + 0.5 * h * k1p, acc(s + 0.5 * h, u + 0.5 * h * k1u)
        k3u, k3p = up + 0.5 * h * k2p, acc(s + 0.5 * h, u + 0.5 * h * k2u)
        k4u, k4p = up + h * k3p, acc(s + h, u + h * k3u)
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        up = up + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if i < n_grid - 1:
            np.minimum(dip_at, np.where(up < 0.0, i, np.inf), out=dip_at)
        np.minimum(over_at, np.where(u > 0.5 * math.pi, i, np.inf), out=over_at)
        if keep_path:
            path[i + 1] = u
    return (u, up, dip_at, over_at, path) if keep_path else (u, up, dip_at, over_at)


def _shoot_batch(ks: np.ndarray, n_grid: int) -> np.ndarray:
    """Bisect the root slope per K.

    The residual r(b) = u'(1; b) brackets the downward branch on [0, K]:
    r(0) = -K/2 < 0 and r(K) >= K/2 > 0 since cos(u) <= 1. The raw residual
    acquires spurious sign changes at large K (trajectories that whip past
    vertical and oscillate), so slopes are classified by the first structural
    event instead: a negative u' before the end means too low, passing pi/2
    means too high; the physical branch does neither. Shooting sensitivity
    grows like exp((2/3) sqrt(K)), so once the bracket collapses to float
    resolution the residual is accepted against a K-scaled bound.
    """
    lo = np.zeros_like(ks, dtype=np.float64)
    hi = ks.astype(np.float64).copy()
    mid = 0.5 * (lo + hi)
    residual = None
    for _ in range(MAX_SHOOT_ITERS):
        _, residual, dip_at, over_at, = _integrate_batch(ks, mid, n_grid)
        clean = np.isinf(dip_at) & np.isinf(over_at)
        width = hi - lo
        done = ((np.abs(residual) < SHOOT_TOL) & clean) \
            | (width <= 8.0 * np.spacing(hi))
        if np.all(done):
            break
        too_low = np.where(dip_at <= over_at,
                           np.isfinite(dip_at), ~np.isfinite(over_at))
        too_low = np.where(clean, residual < 0, too_low)
        lo = np.where(too_low & ~done, mid, lo)
        hi = np.where(~too_low & ~done, mid, hi)
        mid = 0.5 * (lo + hi)
    loose = np.maximum(SHOOT_TOL, 1e-6 * np.maximum(1.0, ks))
    bad = np.abs(residual) >= loose
    if np.any(bad):
        raise ConvergenceError(
            f"shooting failed at K={ks[bad][0]:g} (residual {residual[bad][0]:.3e})")
    return mid


def _simpson(values: np.ndarray, h: float) -> float:
    n = len(values) - 1
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * (weights * values).sum())


def solve_elastica(K: float, n_grid: int = 1024) -> ElasticaSolution:
    """Solve the clamped-free boundary-value problem at loading K >= 0.

    Shooting with bisection on the root slope in [-K, 0] (theta convention);
    the projection integral uses composite Simpson on the solved grid.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    if n_grid < 64:
        raise ValueError("n_grid must be >= 64")
    n_grid += n_grid % 2  # Simpson needs an even interval count
    if K == 0.0:
        return ElasticaSolution(0.0, np.zeros(n_grid + 1), 1.0)
    ks = np.array([K])
    slope = _shoot_batch(ks, n_grid)
    _, _, _, _, path = _integrate_batch(ks, slope, n_grid, keep_path=True)
    u = path[:, 0]
    projection = _simpson(np.cos(u), 1.0 / n_grid)
    return ElasticaSolution(K, -u, projection)


def build_table(k_min: float, k_max: float, n: int = 128,
                n_grid: int = 1024) -> ProjectionTable:
    """Solve over a log-spaced K grid; monotonicity is verified at build time."""
    if not 0 < k_min < k_max:
        raise ValueError("need 0 < k_min < k_max")
    if n < 2:
        raise ValueError("need at least 2 table entries")
    n_grid += n_grid % 2
    ks = np.geomspace(k_min, k_max, n)
    slopes = _shoot_batch(ks, n_grid)
    _, _, _, _, path = _integrate_batch(ks, slopes, n_grid, keep_path=True)
    h = 1.0 / n_grid
    weights = np.ones(n_grid + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    projections = h / 3.0 * (weights[:, None] * np.cos(path)).sum(axis=0)
    return ProjectionTable(ks, projections)


DEFAULT_TABLE_RANGE = (1e-3, 1e3)
DEFAULT_TABLE_SIZE = 128


def default_table() -> ProjectionTable:
    return build_table(*DEFAULT_TABLE_RANGE, DEFAULT_TABLE_SIZE)


def estimate_ei(meas: RopeMeasurement, table: ProjectionTable,
                g: float = GRAVITY) -> tuple[float, float, float]:
    """Invert a cantilever measurement to (EI, K, lambda).

    lambda = m / L; K comes from monotone linear interpolation of the measured
    ratio b_proj / L_free in (log K, projection) space; EI = lambda g L_free^3 / K.
    """
    lam = meas.mass / meas.total_length
    ratio = meas.projection_distance / meas.free_length
    pr = table.projections
    if ratio > pr[0]:
        raise OutOfRange(
            f"projection ratio {ratio:.6f} above table range; extend the table "
            f"below K={table.ks[0]:g}")
    if ratio < pr[-1]:
        raise OutOfRange(
            f"projection ratio {ratio:.6f} below table range; extend the table "
            f"above K={table.ks[-1]:g}")
    i = int(np.searchsorted(-pr, -ratio)) - 1  # pr is descending
    i = max(0, min(i, len(pr) - 2))
    t = (ratio - pr[i]) / (pr[i + 1] - pr[i])
    log_k = math.log(table.ks[i]) + t * (math.log(table.ks[i + 1]) - math.log(table.ks[i]))
    K = math.exp(log_k)
    ei = lam * g * meas.free_length**3 / K
    return ei, K, lam


def forward_projection(ei: float, lam: float, free_length: float,
                       g: float = GRAVITY, n_grid: int = 1024) -> float:
    """Forward model: the horizontal tip projection distance b_proj for a rope
    of known rigidity, used for round-trip validation."""
    K = lam * g * free_length**3 / ei
    return solve_elastica(K, n_grid).projection * free_length
