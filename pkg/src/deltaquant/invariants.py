"""Exact stability thresholds of polarized toric pairs.

A pair is a lattice polytope ``P`` (the polarization), its normal fan, and a
boundary divisor ``theta = sum_rho c_rho D_rho`` with rational ``0 <= c_rho < 1``.
Divisors over ``X`` are restricted to torus-invariant valuations ``v_xi`` for
primitive ``xi`` in ``N = Z^n``; for those

    A_theta(xi) = sum_rho a_rho (1 - c_rho)     (xi = sum a_rho u_rho in its cone)
    S(xi)       = mean_P <xi, .> - min_P <xi, .>
    S_m(xi)     = mean over mP cap Z^n of <xi, u>/m - min_P <xi, .>
    T(xi)       = max_P <xi, .> - min_P <xi, .>

On every maximal cone both A and S (or S_m) are linear, so each ratio is
minimized on the rays of the fan and the infima become finite minima.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .polytope import (
    FanData,
    LatticePolytope,
    PolytopeError,
    as_vector,
    dot,
    facet_lattice_volume,
    lattice_points,
    linear_moment,
    normal_fan,
    normalized_volume,
    solve,
    support_bounds,
)


class InvariantError(ValueError):
    """Invalid pair or a quantity requested outside its domain."""


@dataclass(frozen=True)
class PolarizedToricPair:
    polytope: LatticePolytope
    boundary: tuple[Fraction, ...] = ()
    fan: FanData | None = None

    def __post_init__(self):
        nf = normal_fan(self.polytope)
        if self.fan is None:
            object.__setattr__(self, "fan", nf)
        elif not _same_fan(self.fan, nf):
            raise InvariantError("fan is not compatible with the polytope (must be its normal fan)")
        elif self.fan.rays != nf.rays:
            # Reorder coefficients given against the caller's ray order.
            if self.boundary:
                lookup = dict(zip(self.fan.rays, self.boundary))
                object.__setattr__(self, "boundary", tuple(lookup[r] for r in nf.rays))
            object.__setattr__(self, "fan", nf)
        coeffs = tuple(Fraction(c) for c in self.boundary) or tuple(
            Fraction(0) for _ in self.fan.rays)
        if len(coeffs) != len(self.fan.rays):
            raise InvariantError("one boundary coefficient per ray is required")
        for c in coeffs:
            if c >= 1:
                raise InvariantError("klt violated: boundary coefficient must be < 1")
            if c < 0:
                raise InvariantError("boundary coefficients must be nonnegative")
        object.__setattr__(self, "boundary", coeffs)

    @classmethod
    def build(cls, polytope: LatticePolytope,
              boundary: Mapping[Sequence[int], object] | None = None) -> "PolarizedToricPair":
        """Pair with coefficients keyed by ray vectors (missing rays get 0)."""
        rays = normal_fan(polytope).rays
        boundary = {tuple(int(x) for x in k): Fraction(v) for k, v in (boundary or {}).items()}
        unknown = set(boundary) - set(rays)
        if unknown:
            raise InvariantError(f"boundary rays {sorted(unknown)} are not rays of the fan")
        return cls(polytope, tuple(boundary.get(r, Fraction(0)) for r in rays))

    @property
    def dimension(self) -> int:
        return self.polytope.dimension

    @property
    def is_untwisted(self) -> bool:
        return all(c == 0 for c in self.boundary)

    def coefficient(self, ray: Sequence[int]) -> Fraction:
        return self.boundary[self.fan.rays.index(tuple(ray))]

    def with_boundary(self, boundary: Mapping[Sequence[int], object]) -> "PolarizedToricPair":
        return PolarizedToricPair.build(self.polytope, boundary)

    def translate(self, t) -> "PolarizedToricPair":
        return PolarizedToricPair(self.polytope.translate(t), self.boundary)

    def dilate(self, c: int) -> "PolarizedToricPair":
        return PolarizedToricPair(self.polytope.dilate(c), self.boundary)

    def valuation(self, xi: Sequence[int]) -> "ToricValuation":
        return ToricValuation.of(self, xi)


def _same_fan(a: FanData, b: FanData) -> bool:
    if a.dimension != b.dimension or set(a.rays) != set(b.rays):
        return False
    cones_a = {frozenset(a.rays[i] for i in c) for c in a.cones}
    cones_b = {frozenset(b.rays[i] for i in c) for c in b.cones}
    return cones_a == cones_b


@dataclass(frozen=True)
class ToricValuation:
    direction: tuple[int, ...]
    cone: int
    ray_coefficients: tuple[Fraction, ...]
    log_discrepancy: Fraction
    mean: Fraction
    min: Fraction
    max: Fraction

    @classmethod
    def of(cls, pair: PolarizedToricPair, xi: Sequence[int]) -> "ToricValuation":
        xi = tuple(int(x) for x in xi)
        if len(xi) != pair.dimension or not any(xi):
            raise InvariantError("valuation direction must be a nonzero vector of the right size")
        P, fan = pair.polytope, pair.fan
        vals = [dot(xi, v) for v in P.vertices]
        lo = min(vals)
        # The normal cone of vertex v contains xi iff v minimizes <xi, .> on P.
        cands = [k for k, v in enumerate(vals) if v == lo]
        smooth = [k for k in cands if fan.smooth[k]]
        if not smooth:
            raise InvariantError("requires smooth cone")
        k = smooth[0]
        rays = [fan.rays[i] for i in fan.cones[k]]
        coeffs = solve([[r[row] for r in rays] for row in range(pair.dimension)], xi)
        a = sum((c * (1 - pair.boundary[i]) for c, i in zip(coeffs, fan.cones[k])), Fraction(0))
        return cls(xi, k, coeffs, a, linear_moment(P, xi), lo, max(vals))

    @property
    def S(self) -> Fraction:
        return self.mean - self.min

    @property
    def T(self) -> Fraction:
        return self.max - self.min


def _as_valuation(pair, xi) -> ToricValuation:
    return xi if isinstance(xi, ToricValuation) else pair.valuation(xi)


def log_discrepancy(pair: PolarizedToricPair, xi) -> Fraction:
    return _as_valuation(pair, xi).log_discrepancy


def expected_vanishing_S(pair: PolarizedToricPair, xi) -> Fraction:
    return _as_valuation(pair, xi).S


def lattice_mean(P: LatticePolytope, m: int) -> tuple[Fraction, ...]:
    pts = lattice_points(P, m)
    return tuple(Fraction(sum(u[k] for u in pts), len(pts)) for k in range(P.dimension))


def expected_vanishing_Sm(pair: PolarizedToricPair, xi, m: int) -> Fraction:
    if m < 1:
        raise ValueError("m must be a positive integer")
    v = _as_valuation(pair, xi)
    return dot(v.direction, lattice_mean(pair.polytope, m)) / m - v.min


@dataclass(frozen=True)
class Candidate:
    direction: tuple[int, ...]
    numerator: Fraction
    denominator: Fraction
    ratio: Fraction | None  # None when the denominator vanishes (infinite ratio)


@dataclass(frozen=True)
class ThresholdReport:
    quantity: str
    value: Fraction
    minimizer: tuple[int, ...]
    candidates: tuple[Candidate, ...] = field(repr=False)


def _min_report(quantity: str, cands: list[Candidate]) -> ThresholdReport:
    finite = [c for c in cands if c.ratio is not None]
    if not finite:
        raise InvariantError("internal error: empty candidate set")
    best = min(finite, key=lambda c: c.ratio)
    return ThresholdReport(quantity, best.ratio, best.direction, tuple(cands))


def candidate_directions(pair: PolarizedToricPair) -> list[tuple[int, ...]]:
    """Extreme rays of the common refinement of the fan and the normal fan of P.

    The pair's fan is the normal fan of its polytope, so these are its rays.
    """
    return list(pair.fan.rays)


def delta_threshold(pair: PolarizedToricPair, mode: str | int = "limit") -> ThresholdReport:
    """``min A/S`` (mode ``"limit"``) or the equivariant ``min A/S_m`` (integer mode)."""
    cands = []
    for xi in candidate_directions(pair):
        v = pair.valuation(xi)
        if mode == "limit":
            den = v.S
        else:
            den = expected_vanishing_Sm(pair, v, int(mode))
        ratio = v.log_discrepancy / den if den > 0 else None
        cands.append(Candidate(xi, v.log_discrepancy, den, ratio))
    name = "delta" if mode == "limit" else f"delta_{int(mode)}^T"
    return _min_report(name, cands)


def alpha_threshold(pair: PolarizedToricPair) -> ThresholdReport:
    cands = []
    for xi in candidate_directions(pair):
        v = pair.valuation(xi)
        cands.append(Candidate(xi, v.log_discrepancy, v.T, v.log_discrepancy / v.T))
    return _min_report("alpha", cands)


def _require_smooth(pair: PolarizedToricPair):
    if not pair.fan.is_smooth:
        raise InvariantError("requires smooth fan")


def slope_mu(pair: PolarizedToricPair) -> Fraction:
    """``(-K_X . L^(n-1)) / L^n`` from lattice facet volumes."""
    _require_smooth(pair)
    P = pair.polytope
    anti = sum((facet_lattice_volume(P, k) for k in range(len(P.facets))), Fraction(0))
    return anti / normalized_volume(P)


def divisor_offsets(pair: PolarizedToricPair) -> tuple[Fraction, ...]:
    """Coefficients ``d_rho`` of ``L = sum d_rho D_rho`` (``P = {<u_rho, u> >= -d_rho}``)."""
    return tuple(-f.offset for f in pair.polytope.facets)


def curve_degrees(pair: PolarizedToricPair, divisor: Sequence) -> list[Fraction]:
    """Degree of ``sum d_rho D_rho`` on every torus-invariant curve (one per wall)."""
    _require_smooth(pair)
    fan = pair.fan
    out = []
    for wall, p, q in fan.walls():
        b = fan.wall_relation(wall, p, q)
        out.append(divisor[p] + divisor[q] + sum((bi * divisor[i] for bi, i in zip(b, wall)),
                                                 Fraction(0)))
    return out


def nef_threshold(pair: PolarizedToricPair) -> Fraction:
    """Largest ``s`` with ``-K_X - sL`` nef: ``min over walls of (-K.C)/(L.C)``."""
    anti = curve_degrees(pair, [Fraction(1)] * len(pair.fan.rays))
    ell = curve_degrees(pair, divisor_offsets(pair))
    if any(x <= 0 for x in ell):
        raise InvariantError("polarization is not ample on every invariant curve")
    value = min(k / l for k, l in zip(anti, ell))
    if value <= 0:
        warnings.warn(f"-K_X - sL is not nef for any s > 0 (wall minimum {value})")
    return value


@dataclass(frozen=True)
class CsckReport:
    delta: Fraction
    mu: Fraction
    s: Fraction
    ample_check: bool
    inequality_check: bool
    verdict: bool


def csck_criterion(pair: PolarizedToricPair) -> CsckReport:
    if not pair.is_untwisted:
        raise InvariantError("criterion defined for theta=0")
    n = pair.dimension
    delta = delta_threshold(pair).value
    mu = slope_mu(pair)
    s = nef_threshold(pair)
    # K_X + delta L has divisor coefficients -1 + delta d_rho.
    twisted = [-1 + delta * d for d in divisor_offsets(pair)]
    ample = all(x > 0 for x in curve_degrees(pair, twisted))
    ineq = delta > n * mu - (n - 1) * s
    return CsckReport(delta, mu, s, ample, ineq, ample and ineq)


@dataclass(frozen=True)
class StabilityReport:
    delta: Fraction
    delta_m: tuple[tuple[int, Fraction], ...]
    ding_stable: bool


def stability_report(pair: PolarizedToricPair, m_range: Iterable[int]) -> StabilityReport:
    ms = list(m_range)
    if not ms:
        raise ValueError("m_range must be nonempty")
    delta = delta_threshold(pair).value
    table = tuple((m, delta_threshold(pair, m).value) for m in ms)
    return StabilityReport(delta, table, delta > 1)
