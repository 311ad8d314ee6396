"""Scalar functionals: energy F, Boltzmann entropy N, the scale-invariant
log-Sobolev value L, the parabolic entropy W, the soliton defect Q, and a
trial-set Sobolev constant.

Conventions. Test functions v have unit L^2 norm against dg; densities u
have unit mass. For unit-norm v and a parameter alpha >= 1 on a domain D,

    L(v) = -N(v) + alpha (n/2) ln(F(v) + E0) + s_n,
    F(v) = int_D (4 |grad v|^2 + R v^2) dg,   N(v) = int_D v^2 ln v^2 dg,
    s_n  = -(n/2) ln(2 pi n) - n/2.

L is scale invariant at alpha = 1: L(a^{-n/4} v, a g) = L(v, g). E0 is the
negative-energy offset; it vanishes whenever R >= 0 on the domain. W(u, s)
is the parabolic entropy whose infimum over the scale parameter equals
L(sqrt(u)); the Fisher term |grad u|^2/u is evaluated as 4 |grad sqrt(u)|^2
so that the agreement identity holds to round-off, not just to O(h^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidDensityError,
    InvalidInputError,
    NumericalInconsistencyError,
    PreconditionError,
)
from .geometry import (
    WarpedMetric,
    curvature,
    quad_weights,
    sphere_area,
    unit_ball_volume,
)

U_CUTOFF = 1e-30  # nodes below cutoff * max(u) are exact zeros for u ln u


def s_n(n: int) -> float:
    """Normalizing constant -(n/2) ln(2 pi n) - n/2."""
    return -0.5 * n * math.log(2.0 * math.pi * n) - 0.5 * n


@dataclass(frozen=True)
class Domain:
    """Radial integration domain: whole grid, ball, or exterior region."""

    kind: str = "whole"  # whole | ball | exterior
    r: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("whole", "ball", "exterior"):
            raise InvalidInputError(f"unknown domain kind {self.kind!r}")
        if self.kind != "whole" and (self.r is None or self.r <= 0):
            raise InvalidInputError("ball/exterior domains need a positive radius")

    def node_range(self, g: WarpedMetric):
        """(i0, i1) inclusive node range; v must vanish outside and at the ends."""
        s = g.arclength
        last = g.grid.size - 1
        if self.kind == "whole":
            return 0, last
        i = int(np.argmin(np.abs(s - self.r)))
        if i <= 2 or (self.kind == "ball" and i >= last):
            raise InvalidInputError(f"radius {self.r} not resolvable on this grid")
        if self.kind == "ball":
            return 0, i
        return i, last

    def label(self) -> str:
        if self.kind == "whole":
            return "whole grid"
        if self.kind == "ball":
            return f"ball r={self.r:g}"
        return f"exterior of r={self.r:g}"


WHOLE = Domain("whole")


def _aligned(v, g: WarpedMetric) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != g.grid.shape:
        raise InvalidInputError("field not aligned with the metric grid")
    return v


def _domain_weights(g: WarpedMetric, domain: Domain) -> np.ndarray:
    q = quad_weights(g).copy()
    i0, i1 = domain.node_range(g)
    q[:i0] = 0.0
    q[i1 + 1:] = 0.0
    return q


def norm_l2(v, g: WarpedMetric, domain: Domain = WHOLE) -> float:
    v = _aligned(v, g)
    return math.sqrt(float(_domain_weights(g, domain) @ v**2))


def mass(u, g: WarpedMetric, domain: Domain = WHOLE) -> float:
    u = _aligned(u, g)
    return float(_domain_weights(g, domain) @ u)


def grad_s(v, g: WarpedMetric) -> np.ndarray:
    """Arclength derivative of an even radial field."""
    return g.stencils.d1(np.asarray(v, dtype=float), parity=+1) / g.phi


def energy_F(v, g: WarpedMetric, domain: Domain = WHOLE) -> float:
    """F(v) = int (4 |grad v|^2 + R v^2) dg over the domain."""
    v = _aligned(v, g)
    q = _domain_weights(g, domain)
    i0, i1 = domain.node_range(g)
    vmax = float(np.max(np.abs(v))) or 1.0
    if abs(v[i1]) > 1e-8 * vmax or (i0 > 0 and abs(v[i0]) > 1e-8 * vmax):
        raise PreconditionError("test function must vanish on the domain boundary")
    R = curvature(g).R
    return float(q @ (4.0 * grad_s(v, g) ** 2 + R * v**2))


def xlogx_sq(v: np.ndarray) -> np.ndarray:
    """v^2 ln v^2 with the convention 0 ln 0 = 0.

    Written as 2 v^2 ln|v| so that v^2 underflowing to zero cannot feed a
    zero into the logarithm.
    """
    out = np.zeros_like(v)
    m = np.abs(v) > 0
    out[m] = 2.0 * v[m] ** 2 * np.log(np.abs(v[m]))
    return out


def entropy_N(v, g: WarpedMetric, domain: Domain = WHOLE) -> float:
    """N(v) = int v^2 ln v^2 dg; requires unit L^2 norm on the domain."""
    v = _aligned(v, g)
    nrm = norm_l2(v, g, domain)
    if abs(nrm - 1.0) > 1e-8:
        raise PreconditionError(f"entropy needs unit L2 norm, got {nrm:.12g}")
    return float(_domain_weights(g, domain) @ xlogx_sq(v))


@dataclass(frozen=True)
class FunctionalReport:
    """One evaluation of the log-Sobolev functional and its pieces."""

    F: float
    N: float
    L: float
    alpha: float
    s_n: float
    E0_minus: float
    domain: str

    def recompose(self) -> float:
        arg = self.F + self.E0_minus
        if arg == 0.0:
            return float("-inf")
        return -self.N + self.alpha * 0.5 * self._n() * math.log(arg) + self.s_n

    def _n(self) -> float:
        # s_n determines n uniquely for integer n >= 3; invert numerically
        for n in range(3, 32):
            if abs(s_n(n) - self.s_n) < 1e-12:
                return n
        raise NumericalInconsistencyError("stored s_n matches no dimension")


def _e0_probe_set(g: WarpedMetric, domain: Domain) -> list[np.ndarray]:
    """Fixed unit-norm bump probes for the negative-energy offset."""
    i0, i1 = domain.node_range(g)
    s = g.arclength
    lo, hi = s[i0], s[i1]
    probes = []
    for frac in (0.2, 0.35, 0.5, 0.65, 0.8):
        for wfrac in (0.08, 0.16, 0.3):
            c = lo + frac * (hi - lo)
            w = wfrac * (hi - lo)
            t = (s - c) / w
            v = np.where(np.abs(t) < 1.0, np.exp(-1.0 / np.maximum(1e-12, 1.0 - t**2)), 0.0)
            if i0 > 0:
                v[:i0 + 1] = 0.0
            v[i1:] = 0.0
            nrm = norm_l2(v, g, domain)
            if nrm > 0:
                probes.append(v / nrm)
    return probes


def e0_minus(g: WarpedMetric, domain: Domain = WHOLE) -> float:
    """Negative-energy offset: exactly 0 when R >= 0 on the domain."""
    i0, i1 = domain.node_range(g)
    R = curvature(g).R
    if float(np.min(R[i0:i1 + 1])) >= 0.0:
        return 0.0
    worst = 0.0
    for v in _e0_probe_set(g, domain):
        worst = min(worst, energy_F(v, g, domain))
    return max(0.0, -worst)


def log_sobolev_L(v, g: WarpedMetric, alpha: float = 1.0,
                  domain: Domain = WHOLE) -> FunctionalReport:
    """Evaluate L(v, g, alpha, D) and return the full report."""
    if alpha < 1.0:
        raise InvalidInputError("alpha must be >= 1")
    F = energy_F(v, g, domain)
    N = entropy_N(v, g, domain)
    E0 = e0_minus(g, domain)
    sn = s_n(g.n)
    arg = F + E0
    if arg < 0.0:
        raise NumericalInconsistencyError(f"F + E0 = {arg} < 0")
    if arg == 0.0:
        L = float("-inf")  # finite entropy with zero energy
    else:
        L = -N + alpha * 0.5 * g.n * math.log(arg) + sn
    return FunctionalReport(F=F, N=N, L=L, alpha=alpha, s_n=sn, E0_minus=E0,
                            domain=domain.label())


def _check_density(u, g: WarpedMetric, domain: Domain, tol_mass: float = 1e-6):
    u = _aligned(u, g)
    if float(np.min(u)) < -1e-12:
        raise InvalidDensityError(f"density has negative entries: min {np.min(u):.3g}")
    m = mass(u, g, domain)
    if abs(m - 1.0) > tol_mass:
        raise PreconditionError(f"density mass {m:.10g} not within {tol_mass} of 1")
    return np.maximum(u, 0.0)


def fisher_term(u, g: WarpedMetric) -> np.ndarray:
    """|grad u|^2 / u evaluated as 4 |grad sqrt(u)|^2 (zero where u is cut off)."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    root = np.sqrt(u)
    term = 4.0 * grad_s(root, g) ** 2
    term[u < U_CUTOFF * max(float(u.max()), 1e-300)] = 0.0
    return term


def w_entropy(u, g: WarpedMetric, s: float, domain: Domain = WHOLE) -> float:
    """Parabolic entropy W(g, u, s) of a unit-mass density."""
    if not s > 0:
        raise InvalidInputError("scale parameter must be positive")
    u = _check_density(u, g, domain)
    q = _domain_weights(g, domain)
    R = curvature(g).R
    m = u > U_CUTOFF * max(float(u.max()), 1e-300)
    ulnu = np.zeros_like(u)
    ulnu[m] = u[m] * np.log(u[m])
    integrand = (s * (fisher_term(u, g) + R * u) - ulnu
                 - 0.5 * g.n * math.log(4.0 * math.pi * s) * u - g.n * u)
    return float(q @ integrand)


def inf_rho_w(u, g: WarpedMetric, domain: Domain = WHOLE):
    """Minimize W over the scale parameter; returns (rho_star, W(rho_star)).

    The stationary point is rho* = n / (2 F(sqrt u)); the minimum value is
    checked against L(sqrt u, g, 1) to 1e-8 (an algebraic identity with
    this discretization).
    """
    u = _check_density(u, g, domain)
    q = _domain_weights(g, domain)
    R = curvature(g).R
    F = float(q @ (fisher_term(u, g) + R * u))
    if F <= 0.0:
        return float("inf"), float("-inf")
    rho = 0.5 * g.n / F
    val = w_entropy(u, g, rho, domain)
    ref = log_sobolev_L(np.sqrt(u), g, 1.0, domain).L
    if abs(val - ref) > 1e-8 * max(1.0, abs(ref)):
        raise NumericalInconsistencyError(
            f"inf-rho value {val:.12g} disagrees with L {ref:.12g}")
    return rho, val


def soliton_fields(u, g: WarpedMetric):
    """Pointwise fields entering the soliton defect of a positive density.

    Returns a dict with the cutoff mask, ln u Hessian eigenvalues (radial
    and spherical), the scalar field l = R - lap(ln u), and the traceless
    comparison eigenvalues T_rr, T_sph of
    Ric - Hess(ln u) - (l/n) g.
    """
    u = np.maximum(_aligned(u, g), 0.0)
    cur = curvature(g)
    n = g.n
    m = u > U_CUTOFF * max(float(u.max()), 1e-300)
    lnu = np.zeros_like(u)
    lnu[m] = np.log(u[m])
    st = g.stencils
    lnu_x = st.d1(lnu, parity=+1)
    lnu_xx = st.d2(lnu, parity=+1)
    phi_x = st.d1(g.phi, parity=+1)
    lnu_s = lnu_x / g.phi
    lnu_ss = lnu_xx / g.phi**2 - lnu_x * phi_x / g.phi**3
    psi_s, _ = g.psi_derivatives()
    sph = np.empty_like(u)
    sph[1:] = (psi_s[1:] / g.psi[1:]) * lnu_s[1:]
    sph[0] = lnu_ss[0]  # radial limit of (psi_s/psi) d_s at the origin
    lap_lnu = lnu_ss + (n - 1) * sph
    l_field = cur.R - lap_lnu
    return {
        "mask": m,
        "lnu": lnu,
        "hess_rad": lnu_ss,
        "hess_sph": sph,
        "l_field": l_field,
        "T_rr": cur.Ric_rad - lnu_ss - l_field / n,
        "T_sph": cur.Ric_sph_scalar - sph - l_field / n,
    }


def q_functional(u, g: WarpedMetric, domain: Domain = WHOLE,
                 return_details: bool = False):
    """Soliton defect Q(u) >= 0 for a unit-mass density.

    Q = n int |Ric - Hess(ln u) - ((R - lap ln u)/n) g|^2 u dg
        + retained_mass * Var_{u}(R - lap ln u).

    The variance uses mass-normalized weights over the retained region, so
    nonnegativity survives the tail cutoff. A warning is emitted when the
    cutoff discards more than 1% of the mass.
    """
    u = _check_density(u, g, domain)
    q = _domain_weights(g, domain)
    n = g.n
    fields = soliton_fields(u, g)
    m = fields["mask"]
    retained = float(q[m] @ u[m])
    if retained < 0.99:
        warnings.warn(f"u-cutoff retains only {retained:.4f} of the mass",
                      RuntimeWarning)
    l_field = fields["l_field"]
    weights = q * u
    weights[~m] = 0.0
    traceless = n * float(weights @ (fields["T_rr"]**2
                                     + (n - 1) * fields["T_sph"]**2))
    wsum = float(weights.sum())
    if wsum <= 0:
        raise InvalidDensityError("no mass retained after cutoff")
    mean_l = float(weights @ l_field) / wsum
    var_l = float(weights @ (l_field - mean_l) ** 2) / wsum
    Q = traceless + wsum * var_l
    if return_details:
        return Q, {"retained_mass": retained, "traceless": traceless,
                   "variance": wsum * var_l, "l_mean": mean_l}
    return Q


@dataclass(frozen=True)
class SobolevEstimate:
    """Trial-set lower bound for the Sobolev constant and implied kappa."""

    A: float
    kappa: float
    ratios: np.ndarray
    labels: list = field(default_factory=list)


def standard_trial_set(g: WarpedMetric, domain: Domain = WHOLE):
    """Deterministic compact bumps spanning centers and widths of the domain.

    Includes the Sobolev-extremal bell shape (1 + (s/w)^2)^{-(n-2)/2} with a
    smooth far cutoff, which calibrates flat space close to sharpness.
    """
    i0, i1 = domain.node_range(g)
    s = g.arclength
    lo, hi = s[i0], s[i1]
    span = hi - lo
    trials = []
    labels = []
    for frac in (0.15, 0.3, 0.5, 0.7):
        for wfrac in (0.05, 0.1, 0.2, 0.35):
            c = lo + frac * span
            w = wfrac * span
            t = (s - c) / w
            v = np.where(np.abs(t) < 1.0,
                         np.exp(-1.0 / np.maximum(1e-12, 1.0 - t**2)), 0.0)
            if i0 > 0:
                v[:i0 + 1] = 0.0
            v[i1:] = 0.0
            if float(np.max(v)) > 0:
                trials.append(v)
                labels.append(f"bump c={c:.3g} w={w:.3g}")
    pw = (g.n - 2) / 2.0
    for wfrac in (0.05, 0.12, 0.25):
        w = wfrac * span
        bell = (1.0 + ((s - lo) / w) ** 2) ** (-pw)
        taper = 0.5 * (1.0 - np.tanh((s - (lo + 0.8 * span)) / (0.05 * span)))
        v = bell * taper
        v[:i0] = 0.0
        v[i1:] = 0.0
        trials.append(v)
        labels.append(f"bell w={w:.3g}")
    return trials, labels


_FLAT_CALIBRATION: dict[int, float] = {}


def _flat_reference_A(n: int) -> float:
    """Best trial-set ratio on a standard flat grid, cached per dimension."""
    if n not in _FLAT_CALIBRATION:
        from .profiles import flat, uniform_grid

        g = flat(uniform_grid(40.0, 2001), n=n)
        trials, _ = standard_trial_set(g)
        best = 0.0
        for v in trials:
            best = max(best, _sobolev_ratio(v, g, WHOLE))
        _FLAT_CALIBRATION[n] = best
    return _FLAT_CALIBRATION[n]


def _sobolev_ratio(v, g: WarpedMetric, domain: Domain) -> float:
    n = g.n
    q = _domain_weights(g, domain)
    p = 2.0 * n / (n - 2.0)
    num = float(q @ np.abs(v) ** p) ** ((n - 2.0) / n)
    den = energy_F(v, g, domain)
    if den <= 0:
        return float("inf")
    return num / den


def sobolev_constant(g: WarpedMetric, trial_set: Optional[Sequence] = None,
                     domain: Domain = WHOLE) -> SobolevEstimate:
    """Best ratio ||v||^2_{2n/(n-2)} / F(v) over the trial set.

    A lower bound for the true constant; kappa = omega_n (A_flat / A)^{n/2}
    is the implied volume-ratio floor, calibrated so flat space reports
    kappa = omega_n exactly.
    """
    labels = []
    if trial_set is None:
        trial_set, labels = standard_trial_set(g, domain)
    trial_set = list(trial_set)
    if not trial_set:
        raise InvalidInputError("empty trial set")
    ratios = np.array([_sobolev_ratio(v, g, domain) for v in trial_set])
    A = float(np.max(ratios))
    A_flat = _flat_reference_A(g.n)
    kappa = unit_ball_volume(g.n) * (A_flat / A) ** (g.n / 2.0)
    return SobolevEstimate(A=A, kappa=kappa, ratios=ratios, labels=labels)
