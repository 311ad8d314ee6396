"""Analytic metric families used as fixtures and config-loadable profiles.

Every builder takes a grid and parameters and returns a WarpedMetric. The
quasi-Schwarzschild families use the area-radius gauge psi(x) = x with
phi = (1 - 2 m(x)/x)^{-1/2}; for n = 3 the scalar curvature of that gauge
is exactly R = 4 m'(x) / x^2, so any nondecreasing mass profile gives a
metric with nonnegative scalar curvature by construction. The deep-well
variant routes the mass through a plateau where 2 m(x)/x approaches 1,
which stretches arclength into a thin neck and collapses ball volumes
there without disturbing the asymptotically flat tail.
"""

from __future__ import annotations

import csv as _csv
import math

import numpy as np
from scipy.special import roots_legendre

from .errors import InvalidInputError
from .geometry import WarpedMetric


def uniform_grid(xmax: float, points: int) -> np.ndarray:
    if points < 16 or xmax <= 0:
        raise InvalidInputError("grid needs xmax > 0 and at least 16 points")
    return np.linspace(0.0, float(xmax), int(points))


def exp_graded_grid(xmax: float, points: int, beta: float = 4.0) -> np.ndarray:
    """Grid dense near the origin, spacing ratio ~ e^beta across the domain."""
    if points < 16 or xmax <= 0 or beta <= 0:
        raise InvalidInputError("bad graded-grid parameters")
    u = np.linspace(0.0, 1.0, int(points))
    return float(xmax) * np.expm1(beta * u) / math.expm1(beta)


def flat(grid, n: int = 3) -> WarpedMetric:
    grid = np.asarray(grid, dtype=float)
    return WarpedMetric(n=n, grid=grid, phi=np.ones_like(grid), psi=grid.copy())


def sphere_cap(grid, n: int = 3) -> WarpedMetric:
    """Constant-curvature cap psi = sin s; grid must stay below pi."""
    grid = np.asarray(grid, dtype=float)
    if grid[-1] >= math.pi:
        raise InvalidInputError("sphere cap grid must end below pi")
    return WarpedMetric(n=n, grid=grid, phi=np.ones_like(grid), psi=np.sin(grid))


def tanh_cylinder(grid, n: int = 3, rho: float = 1.0) -> WarpedMetric:
    """psi = rho tanh(x/rho): flat near the origin, cylinder of radius rho outside."""
    grid = np.asarray(grid, dtype=float)
    return WarpedMetric(n=n, grid=grid, phi=np.ones_like(grid),
                        psi=rho * np.tanh(grid / rho))


def af_bump(grid, n: int = 3, a: float = 0.08, b: float = 4.0) -> WarpedMetric:
    """psi = x + a x^3 exp(-(x/b)^2): Gaussian-tail AF perturbation of flat."""
    grid = np.asarray(grid, dtype=float)
    psi = grid + a * grid**3 * np.exp(-((grid / b) ** 2))
    return WarpedMetric(n=n, grid=grid, phi=np.ones_like(grid), psi=psi)


def power_tail(grid, n: int = 3, tau: float = 1.0, x_on: float = 5.0,
               w_on: float = 1.5) -> WarpedMetric:
    """psi = x + S(x) x^{1-tau} with a smooth switch S: exact power tail.

    The switch keeps the origin smooth; outside the switch region the slope
    dpsi/ds - 1 decays exactly like s^{-tau}, which is what the AF order
    fit is calibrated against.
    """
    grid = np.asarray(grid, dtype=float)
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    s_on = 0.5 * (1.0 + np.tanh((grid - x_on) / w_on))
    psi = grid.copy()
    psi[1:] = grid[1:] + s_on[1:] * grid[1:] ** (1.0 - tau)
    return WarpedMetric(n=n, grid=grid, phi=np.ones_like(grid), psi=psi,
                        af_order=tau)


def _ms_metric(grid, n, m_over_x):
    """Area-radius gauge metric from samples of m(x)/x."""
    grid = np.asarray(grid, dtype=float)
    h = 2.0 * np.asarray(m_over_x, dtype=float)
    if np.any(h >= 1.0):
        raise InvalidInputError("mass profile too heavy: 2m(x)/x must stay below 1")
    phi = 1.0 / np.sqrt(1.0 - h)
    return WarpedMetric(n=n, grid=grid, phi=phi, psi=grid.copy(), af_order=1.0)


def ms_mass(grid, n: int = 3, eps: float = 0.1, b: float = 2.0) -> WarpedMetric:
    """Quasi-Schwarzschild metric with m(x) = eps x^3 / (b^2 + x^2)^{3/2}.

    Smooth everywhere, ADM-type mass eps, and for n = 3 the closed form
    R = 12 eps b^2 / (b^2 + x^2)^{5/2} > 0.
    """
    grid = np.asarray(grid, dtype=float)
    if eps < 0:
        raise InvalidInputError("eps must be nonnegative")
    m_over_x = eps * grid**2 / (b**2 + grid**2) ** 1.5
    return _ms_metric(grid, n, m_over_x)


def ms_mass_scalar_curvature(grid, eps: float = 0.1, b: float = 2.0) -> np.ndarray:
    """Closed-form R of ms_mass for n = 3 (oracle convenience)."""
    grid = np.asarray(grid, dtype=float)
    return 12.0 * eps * b**2 / (b**2 + grid**2) ** 2.5


def _cumulative_gl(f, grid, order: int = 6) -> np.ndarray:
    """Cumulative integral of f over the grid, per-cell Gauss-Legendre."""
    nodes, weights = roots_legendre(order)
    x0, x1 = grid[:-1], grid[1:]
    half = 0.5 * (x1 - x0)
    mid = 0.5 * (x1 + x0)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    cell = half * (f(pts) @ weights)
    out = np.zeros_like(grid)
    out[1:] = np.cumsum(cell)
    return out


def deep_well(grid, n: int = 3, eps: float = 0.02, b: float = 1.0,
              depth: float = 0.97, x1: float = 0.9, x2: float = 2.4,
              w: float = 0.22) -> WarpedMetric:
    """Collapsed-neck AF metric with strictly positive scalar curvature.

    The mass rate m'(x) is a smooth core term (positive R at the origin)
    plus a plateau supported on [x1, x2] scaled so that max 2m(x)/x hits
    ``depth``; arclength through the plateau stretches by
    (1-depth)^{-1/2}, producing a thin neck where ball volumes collapse.
    m' > 0 everywhere, so R > 0 everywhere, and m -> const gives an AF
    tail of order 1.
    """
    grid = np.asarray(grid, dtype=float)
    if not 0 < depth < 1:
        raise InvalidInputError("depth must lie in (0, 1)")

    def core_rate(x):
        return 3.0 * eps * b**2 * x**2 / (b**2 + x**2) ** 2.5

    def plateau_rate(x):
        gate = x**2 / (x**2 + x1**2)
        rise = 0.5 * (1.0 + np.tanh((x - x1) / w))
        fall = 0.5 * (1.0 + np.tanh((x - x2) / w))
        return gate * (rise - fall)

    m_core = _cumulative_gl(core_rate, grid)
    m_plateau = _cumulative_gl(plateau_rate, grid)
    with np.errstate(invalid="ignore", divide="ignore"):
        h_core = np.where(grid > 0, 2.0 * m_core / grid, 0.0)
        h_plateau = np.where(grid > 0, 2.0 * m_plateau / grid, 0.0)
    # scale the plateau so the total 2m/x peaks exactly at `depth`
    j = int(np.argmax(h_plateau))
    if h_plateau[j] <= 0:
        raise InvalidInputError("plateau support not resolved by the grid")
    scale = (depth - h_core[j]) / h_plateau[j]
    if scale <= 0:
        raise InvalidInputError("core mass already exceeds the requested depth")
    h = h_core + scale * h_plateau
    if np.max(h) > depth + 1e-9:
        # peak of the sum may sit next to the plateau peak; renormalize
        h *= depth / np.max(h)
    return _ms_metric(grid, n, 0.5 * h)


def annulus_graded_grid(xmax: float, x_focus: float, w_focus: float,
                        h_fine: float = 0.05, h_coarse: float = 0.35
                        ) -> np.ndarray:
    """Grid refined around an annulus, coarse elsewhere (origin included).

    Spacing h(x) = h_coarse - (h_coarse - h_fine) exp(-((x-x_focus)/w)^2),
    accumulated from 0 and rescaled to end exactly at xmax. Evolution
    fixtures use this: the explicit flow stencils near the coordinate
    origin are only benign when the first interior node is not too close
    to x = 0, so the refinement is spent where the geometry actually
    varies.
    """
    if not (0 < h_fine <= h_coarse and 0 < x_focus < xmax):
        raise InvalidInputError("bad annulus grid parameters")
    pts = [0.0]
    while pts[-1] < xmax:
        x = pts[-1]
        h = h_coarse - (h_coarse - h_fine) * math.exp(-(((x - x_focus) / w_focus) ** 2))
        pts.append(x + h)
    grid = np.asarray(pts)
    return grid * (xmax / grid[-1])


def ms_annulus(grid, n: int = 3, eps: float = 0.35, x_c: float = 8.0,
               w: float = 1.6, a: float = 2.0) -> WarpedMetric:
    """AF metric, exactly flat near the origin, curved on an annulus.

    Mass rate m'(x) = c x^2/(x^2+a^2) exp(-((x-x_c)/w)^2) > 0 gives
    R = 2(n-1) m'/x^{n-1} > 0 everywhere (vanishingly small away from the
    annulus), total mass eps. The flat core is what keeps the explicit
    evolution's origin stencils quiet.
    """
    grid = np.asarray(grid, dtype=float)

    def rate(x):
        return (x**2 / (x**2 + a**2)) * np.exp(-(((x - x_c) / w) ** 2))

    m_raw = _cumulative_gl(rate, grid)
    m = eps * m_raw / m_raw[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        m_over_x = np.where(grid > 0, m / grid, 0.0)
    return _ms_metric(grid, n, m_over_x)


def from_csv(path, n: int = 3, af_order=None) -> WarpedMetric:
    """Load explicit samples from a CSV with columns x, phi, psi."""
    rows = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            rows.append((float(row["x"]), float(row["phi"]), float(row["psi"])))
    if not rows:
        raise InvalidInputError(f"no samples in {path}")
    arr = np.asarray(rows, dtype=float)
    return WarpedMetric(n=n, grid=arr[:, 0], phi=arr[:, 1], psi=arr[:, 2],
                        af_order=af_order)


PROFILES = {
    "flat": flat,
    "sphere_cap": sphere_cap,
    "tanh_cylinder": tanh_cylinder,
    "af_bump": af_bump,
    "power_tail": power_tail,
    "ms_mass": ms_mass,
    "ms_annulus": ms_annulus,
    "deep_well": deep_well,
}


def build_profile(name: str, grid, n: int = 3, **params) -> WarpedMetric:
    try:
        builder = PROFILES[name]
    except KeyError:
        raise InvalidInputError(f"unknown profile {name!r}; known: {sorted(PROFILES)}")
    return builder(grid, n=n, **params)
