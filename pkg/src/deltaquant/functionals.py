"""Energy functionals on radial metrics of ``(P^1, O(d))`` and ray probes of the thresholds.

With ``V = d``, ``rho = Phi_0''`` the density of ``omega`` and ``rho_phi = rho + phi''``:

    I = -(1/V) int phi phi''            J = (1/V) int phi rho - E
    H = (1/V) int rho_phi log(rho_phi / rho)
    script-J = mu E - (1/V) int phi Ric(omega)      K = H + script-J
    D = -log int e^{-phi} d mu_theta - E

where ``mu = 2/d`` is the slope and ``Ric(omega) = (2/d) omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import betaln

from .bergman import integration_window, ma_energy
from .invariants import InvariantError, PolarizedToricPair
from .metrics import MetricError, RadialMetric, SymplecticPotential, reference_density, ricci_density
from .quadrature import QuadratureError, QuadratureScheme, log_one_minus_t, log_t, softplus


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryTwist:
    """``theta = c0 [0] + c_inf [inf]`` on ``P^1``; ``[0]`` is the ray ``+1``."""

    c0: float = 0.0
    c_inf: float = 0.0

    def __post_init__(self):
        for c in (self.c0, self.c_inf):
            if not 0 <= c < 1:
                raise InvariantError("klt violated: boundary coefficient must lie in [0, 1)")

    @classmethod
    def from_pair(cls, pair: PolarizedToricPair) -> "BoundaryTwist":
        if pair.dimension != 1:
            raise InvariantError("analytic functionals are defined on P^1 only")
        return cls(float(pair.coefficient((1,))), float(pair.coefficient((-1,))))

    def log_density(self, x):
        """Log density in ``x`` of the probability measure ``mu_theta``."""
        a, b = 1.0 - self.c0, 1.0 - self.c_inf
        return a * log_t(x) + b * log_one_minus_t(x) - betaln(a, b)


def pair_degree(pair: PolarizedToricPair) -> int:
    if pair.dimension != 1:
        raise InvariantError("analytic functionals are defined on P^1 only")
    lo, hi = sorted(v[0] for v in pair.polytope.vertices)
    return int(hi - lo)


@dataclass(frozen=True)
class FunctionalReport:
    E: float
    I: float
    J: float
    H_ent: float
    J_energy: float
    K: float
    D: float
    residuals: dict = field(default_factory=dict, compare=False)

    @property
    def I_minus_J(self) -> float:
        return self.I - self.J


def _integrate(q: QuadratureScheme, f, window, tag: str, log: bool = False):
    try:
        return q.integrate(f, log=log, window=window)
    except QuadratureError as exc:
        raise QuadratureError(f"quadrature failed on {tag}: {exc}", exc.residual) from exc


def functionals(phi: RadialMetric, theta: BoundaryTwist | None = None,
                q: QuadratureScheme | None = None) -> FunctionalReport:
    theta = theta or BoundaryTwist()
    q = q or QuadratureScheme()
    d = phi.degree
    win = integration_window(phi, q)
    res = {}

    try:
        E = ma_energy(phi, q)
    except QuadratureError as exc:
        raise QuadratureError(f"quadrature failed on E: {exc}", exc.residual) from exc

    def i_int(x):
        p, _, p2 = phi.evaluate(x)
        return -p * p2

    def j_int(x):
        return phi(x) * reference_density(d, x)

    def h_int(x):
        lr = phi.log_density(x)
        lref = np.log(d) + log_t(x) + log_one_minus_t(x)
        return np.exp(lr) * (lr - lref)

    def ric_int(x):
        return phi(x) * ricci_density(x)

    def ding_int(x):
        return -phi(x) + theta.log_density(x)

    vals = {}
    for tag, f in (("I", i_int), ("J", j_int), ("H", h_int), ("Ric", ric_int)):
        r = _integrate(q, f, win, tag)
        vals[tag] = float(r.value) / d
        res[tag] = r.residual
    r = _integrate(q, ding_int, win, "D", log=True)
    res["D"] = r.residual

    I = vals["I"]
    J = vals["J"] - E
    mu = 2.0 / d
    Jen = mu * E - vals["Ric"]
    D = -float(r.value) - E
    return FunctionalReport(E, I, J, vals["H"], Jen, vals["H"] + Jen, D, res)


def twisted_entropy(phi: RadialMetric, theta: BoundaryTwist, q: QuadratureScheme | None = None) -> float:
    """``(1/V) int rho_phi log(rho_phi / (V mu_theta))``; equals ``H`` when ``theta = 0``."""
    q = q or QuadratureScheme()
    d = phi.degree

    def f(x):
        lr = phi.log_density(x)
        return np.exp(lr) * (lr - np.log(d) - theta.log_density(x))

    return float(_integrate(q, f, integration_window(phi, q), "H_theta").value) / d


# -- destabilizing rays ------------------------------------------------------------


def _check_kink(sign: int, kink: float, d: int):
    if sign not in (1, -1):
        raise ProbeError("ray sign must be +1 (toward [0]) or -1 (toward [inf])")
    lo_ok = kink > 0 if sign == 1 else kink >= 0
    hi_ok = kink <= d if sign == 1 else kink < d
    if not (lo_ok and hi_ok):
        raise ProbeError(f"kink {kink} outside the admissible range for this ray on [0, {d}]")


def default_kink(sign: int, d: int) -> float:
    """The kink at the far end of the moment interval: the ray of the valuation itself."""
    return float(d) if sign == 1 else 0.0


def ray_potential(sign: int, kink: float, s: float, d: int) -> SymplecticPotential:
    """``g_s = softplus(s w) - log 2`` with ``w = sign (kink - tau)``, smoothing scale ``1/s``.

    This is ``s max(w, 0)`` up to ``O(1/s)``. When the kink sits at the far end of
    ``[0, d]`` the maximum is never active and ``g_s = s w`` exactly.
    """
    _check_kink(sign, kink, d)
    if s < 0:
        raise ProbeError("ray parameter s must be nonnegative")
    c = float(kink)
    if kink == default_kink(sign, d):
        return SymplecticPotential(
            d,
            lambda t: s * sign * (c - np.asarray(t, dtype=float)),
            lambda t: np.full_like(np.asarray(t, dtype=float), -s * sign),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            f"ray({sign:+d},{c:g};{s:g})",
        )

    def w(t):
        return sign * (c - np.asarray(t, dtype=float))

    def sig(z):
        return np.exp(log_t(z))

    return SymplecticPotential(
        d,
        lambda t: softplus(s * w(t)) - np.log(2.0),
        lambda t: -sign * s * sig(s * w(t)),
        lambda t: s * s * np.exp(log_t(s * w(t)) + log_one_minus_t(s * w(t))),
        f"ray({sign:+d},{c:g};{s:g})",
    )


def _add_potentials(a: SymplecticPotential, b: SymplecticPotential) -> SymplecticPotential:
    return SymplecticPotential(a.degree, lambda t: a.g(t) + b.g(t), lambda t: a.dg(t) + b.dg(t),
                               lambda t: a.d2g(t) + b.d2g(t), f"{a.label}+{b.label}")


def ray_family(sign: int, kink: float, s: float, d: int,
               base: RadialMetric | None = None) -> RadialMetric:
    """Metric ``phi_s`` whose symplectic potential is ``u_base + g_s``."""
    base_sym = (base or RadialMetric.zero(d)).to_symplectic()
    if base_sym.degree != d:
        raise MetricError("degree mismatch")
    if s == 0:
        return base if base is not None else RadialMetric.zero(d)
    return RadialMetric.from_symplectic(_add_potentials(base_sym, ray_potential(sign, kink, s, d)))


def ray_energy(sign: int, kink: float, s: float, d: int, base: RadialMetric | None = None) -> float:
    """``E(phi_s) = -(1/d) int_0^d (g_base + g_s)``, integrated with the kink as a breakpoint."""
    sym = _add_potentials((base or RadialMetric.zero(d)).to_symplectic(), ray_potential(sign, kink, s, d))
    pts = [kink] if 0 < kink < d else None
    val, _ = sp_integrate.quad(lambda t: float(sym.g(np.array(t))), 0.0, d, points=pts,
                               epsabs=1e-13, epsrel=1e-13, limit=500)
    return -val / d


def predicted_threshold(sign: int, kink: float, d: int, theta: BoundaryTwist) -> float:
    """Sign-change point of the limiting slope along the piecewise-linear ray.

    For ``g = s (c - tau)_+`` one has ``phi_s - E(phi_s) -> -s c (1 - c/(2d))`` on the
    region ``x < -s``, whose ``mu_theta``-mass is ``~ e^{-(1 - c0) s}``; elsewhere
    ``phi_s - E`` is bounded below. The integral blows up exactly when
    ``lambda > (1 - c0) / (c (1 - c/(2d)))`` (mirror formula toward ``[inf]``).
    At the far-end kink this is ``A_theta / S`` of the valuation.
    """
    _check_kink(sign, kink, d)
    a = 1.0 - (theta.c0 if sign == 1 else theta.c_inf)
    c = float(kink) if sign == 1 else float(d - kink)
    return a / (c * (1.0 - c / (2.0 * d)))


def reference_ratio(sign: int, d: int, theta: BoundaryTwist) -> Fraction:
    """Exact ``A_theta / S`` of the valuation ``v_{+1}`` or ``v_{-1}``."""
    a = 1 - Fraction(theta.c0 if sign == 1 else theta.c_inf).limit_denominator(10 ** 6)
    return a / Fraction(d, 2)


# -- probes ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RayProbeResult:
    kind: str                           # "moser-trudinger" or "entropy"
    sign: int
    kink: float
    degree: int
    theta: BoundaryTwist
    reference: Fraction                 # A_theta / S of the probed valuation
    predicted: float                    # threshold of the piecewise-linear ray
    estimate: float
    interval: tuple[float, float]
    inconclusive: bool
    lambda_grid: tuple[float, ...] = ()
    slopes: tuple[float, ...] = ()
    slope_residuals: tuple[float, ...] = ()
    s_values: tuple[float, ...] = ()
    ratios: tuple[float, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def half_width(self) -> float:
        return 0.5 * (self.interval[1] - self.interval[0])

    @property
    def relative_gap(self) -> float:
        """``|estimate - reference| / reference``."""
        ref = float(self.reference)
        return abs(self.estimate - ref) / ref

    def contains(self, value) -> bool:
        return self.interval[0] <= float(value) <= self.interval[1]


@dataclass
class _RayContext:
    sign: int
    kink: float
    d: int
    theta: BoundaryTwist
    base: RadialMetric | None
    q: QuadratureScheme
    _cache: dict = field(default_factory=dict)

    def metric(self, s):
        key = ("phi", s)
        if key not in self._cache:
            phi = ray_family(self.sign, self.kink, s, self.d, self.base)
            E = ray_energy(self.sign, self.kink, s, self.d, self.base)
            lo, hi = integration_window(phi, self.q)
            # mu_theta has tails e^{(1-c) |x|}; widen so they fall below 1e-17.
            lo -= 40.0 * self.theta.c0 / (1.0 - self.theta.c0)
            hi += 40.0 * self.theta.c_inf / (1.0 - self.theta.c_inf)
            # Tabulate on a fixed fine grid; every lambda reuses it.
            xs = np.linspace(lo, hi, int(64 * (hi - lo)) + 1)
            self._cache[key] = (phi, E, xs, phi(xs) - E, self.theta.log_density(xs))
        return self._cache[key]

    def log_partition(self, lam: float, s: float) -> float:
        """``-log int e^{-lambda(phi_s - E(phi_s))} d mu_theta``."""
        _, _, xs, centered, lmu = self.metric(s)
        return -_log_trapezoid(xs, -lam * centered + lmu)


def _log_trapezoid(xs, logf) -> float:
    h = xs[1] - xs[0]
    w = np.full(xs.shape, np.log(h))
    w[[0, -1]] -= np.log(2.0)
    ends = max(logf[0], logf[-1])
    total = float(np.logaddexp.reduce(logf + w))
    if ends - total > np.log(1e-12):
        raise QuadratureError("probe integrand does not decay inside the window")
    return total


def _slope_samples(ctx: _RayContext, lam: float, s_values, h: float):
    return np.array([(ctx.log_partition(lam, s + h) - ctx.log_partition(lam, s - h)) / (2 * h)
                     for s in s_values])


def _richardson(s_values, values) -> tuple[float, float]:
    """Extrapolate ``v(s) = a + b/s + c/s^2`` from the last three samples.

    Returns the limit and its change against the raw last sample.
    """
    s3 = np.asarray(s_values[-3:], dtype=float)
    v3 = np.asarray(values[-3:], dtype=float)
    A = np.vstack([np.ones(3), 1 / s3, 1 / s3 ** 2]).T
    coef = np.linalg.solve(A, v3)
    return float(coef[0]), float(abs(coef[0] - v3[-1]))


def _richardson_adaptive(values) -> tuple[float, float]:
    """Richardson step with the convergence ratio estimated from three geometric samples.

    Slopes converge algebraically away from the threshold and exponentially near it; a
    fixed ``1/s`` model overshoots in the second regime. With ``r = dv_3 / dv_2`` the
    limit is ``v_3 + dv_3 r / (1 - r)`` (Aitken); non-monotone data fall back to ``v_3``.
    """
    v1, v2, v3 = (float(v) for v in values[-3:])
    d2, d3 = v2 - v1, v3 - v2
    if d2 != 0 and 0 < d3 / d2 < 1:
        r = d3 / d2
        corr = d3 * r / (1 - r)
        return v3 + corr, abs(corr)
    return v3, abs(d3)


def mt_probe(pair: PolarizedToricPair | None = None, *, sign: int = 1, kink: float | None = None,
             lambda_grid=None, s_max: float = 32.0, degree: int | None = None,
             theta: BoundaryTwist | None = None, base: RadialMetric | None = None,
             q: QuadratureScheme | None = None, stabilization: float = 0.05,
             slope_floor: float = 0.02, lambda_tol: float = 1e-4) -> RayProbeResult:
    """Estimate the Moser-Trudinger exponent along a toric ray by the sign change of the slope.

    For each ``lambda`` the large-``s`` slope of ``F(s) = -log int e^{-lambda(phi_s - E)} d mu_theta``
    is estimated by central differences at ``s_max/4, s_max/2, s_max`` and a Richardson
    step with estimated order. The slope stabilizes when the last two raw estimates agree to
    ``stabilization`` (relative, with absolute floor ``slope_floor``); otherwise the
    result is flagged inconclusive.
    """
    if pair is not None:
        d = pair_degree(pair)
        theta = BoundaryTwist.from_pair(pair)
    else:
        if degree is None:
            raise ProbeError("either a pair or a degree is required")
        d = int(degree)
        theta = theta or BoundaryTwist()
    kink = default_kink(sign, d) if kink is None else float(kink)
    _check_kink(sign, kink, d)
    q = q or QuadratureScheme()
    ref = reference_ratio(sign, d, theta)
    pred = predicted_threshold(sign, kink, d, theta)
    if lambda_grid is None:
        lambda_grid = np.linspace(0.1, 2.0, 20) * max(float(ref), pred)
    grid = np.sort(np.asarray(lambda_grid, dtype=float))
    if grid.size < 2 or grid[0] <= 0:
        raise ProbeError("lambda grid must hold at least two positive values")
    if s_max <= 4:
        raise ProbeError("s_max too small for slope estimation")

    ctx = _RayContext(sign, kink, d, theta, base, q)
    s_samples = (s_max / 4, s_max / 2, s_max)
    h = 0.5

    def slope(lam):
        raw = _slope_samples(ctx, lam, s_samples, h)
        lim, resid = _richardson_adaptive(raw)
        stable = abs(raw[-1] - raw[-2]) <= stabilization * max(abs(raw[-1]), slope_floor)
        return lim, resid, stable

    data = [slope(lam) for lam in grid]
    slopes = np.array([x[0] for x in data])
    resid = np.array([x[1] for x in data])
    stable = [x[2] for x in data]
    notes = []

    crossings = np.nonzero((slopes[:-1] > 0) & (slopes[1:] <= 0))[0]
    if len(crossings) == 0:
        notes.append("no sign change of the slope on the lambda grid")
        return RayProbeResult("moser-trudinger", sign, kink, d, theta, ref, pred, float("nan"),
                              (float("nan"), float("nan")), True, tuple(grid), tuple(slopes),
                              tuple(resid), s_samples, notes=tuple(notes))
    k = int(crossings[0])
    lo, hi = grid[k], grid[k + 1]
    f_lo, f_hi = slopes[k], slopes[k + 1]
    unstable = not (stable[k] and stable[k + 1])
    while hi - lo > lambda_tol * hi:
        mid = 0.5 * (lo + hi)
        f_mid, r_mid, st_mid = slope(mid)
        unstable = unstable or not st_mid
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    est = 0.5 * (lo + hi)
    # Slope error converted to a lambda error through the local secant of the slope curve.
    gradient = abs(slopes[k + 1] - slopes[k]) / (grid[k + 1] - grid[k])
    err = max(resid[k], resid[k + 1]) / gradient if gradient > 0 else float("inf")
    half = 0.5 * (hi - lo) + err
    if unstable:
        notes.append("slope estimates did not stabilize; increase s_max")
    return RayProbeResult("moser-trudinger", sign, kink, d, theta, ref, pred, float(est),
                          (float(est - half), float(est + half)), unstable, tuple(grid), tuple(slopes),
                          tuple(resid), s_samples, notes=tuple(notes))


def entropy_probe(pair: PolarizedToricPair | None = None, *, sign: int = 1, kink: float | None = None,
                  s_grid=None, degree: int | None = None, theta: BoundaryTwist | None = None,
                  base: RadialMetric | None = None, q: QuadratureScheme | None = None) -> RayProbeResult:
    """Ratios ``H_theta(phi_s) / (I - J)(phi_s)`` along a ray, extrapolated in ``1/s``.

    ``H_theta`` is the entropy relative to ``V mu_theta``; it reduces to ``H`` for ``theta = 0``.
    """
    if pair is not None:
        d = pair_degree(pair)
        theta = BoundaryTwist.from_pair(pair)
    else:
        if degree is None:
            raise ProbeError("either a pair or a degree is required")
        d = int(degree)
        theta = theta or BoundaryTwist()
    kink = default_kink(sign, d) if kink is None else float(kink)
    _check_kink(sign, kink, d)
    q = q or QuadratureScheme()
    s_grid = np.asarray(s_grid if s_grid is not None else (6.0, 12.0, 24.0), dtype=float)
    if s_grid.size < 3:
        raise ProbeError("entropy probe needs at least three s values")
    ref = reference_ratio(sign, d, theta)
    pred = predicted_threshold(sign, kink, d, theta)

    ratios = []
    for s in s_grid:
        phi = ray_family(sign, kink, float(s), d, base)
        rep = functionals(phi, BoundaryTwist(), q)
        gap = rep.I - rep.J
        if gap < 1e-6:
            raise ProbeError(f"ray too weak: I - J = {gap:.3e} at s = {s:g}")
        ratios.append(twisted_entropy(phi, theta, q) / gap)
    lim, resid = _richardson(s_grid, ratios)
    # Two-point extrapolation as an independent check on the fit.
    lim2 = (s_grid[-1] * ratios[-1] - s_grid[-2] * ratios[-2]) / (s_grid[-1] - s_grid[-2])
    half = max(abs(lim - lim2), 1e-3 * abs(lim))
    notes = () if resid < 0.1 * abs(lim) else ("extrapolation changes the last ratio by more than 10%",)
    return RayProbeResult("entropy", sign, kink, d, theta, ref, pred, float(lim), (float(lim - half), float(lim + half)),
                          bool(notes), s_values=tuple(s_grid), ratios=tuple(ratios), notes=notes)
