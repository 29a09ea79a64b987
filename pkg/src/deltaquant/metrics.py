"""Torus-invariant metrics on ``(P^1, O(d))``.

A metric is a relative potential ``phi`` against the Fubini-Study reference
``Phi_0(x) = d log(1 + e^x)`` in ``x = log|z|^2``. The full potential
``Phi_0 + phi`` is strictly convex with asymptotic slopes ``0`` and ``d``; its
Legendre dual on the moment interval ``[0, d]`` is the symplectic potential
``u = u_0 + g`` with ``u_0(tau) = tau log(tau/d) + (d - tau) log((d - tau)/d)``.
The dictionary is ``phi(x) -> -g(0)`` as ``x -> -inf`` and ``-g(d)`` as ``x -> +inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import minimize_scalar

from .quadrature import log_one_minus_t, log_t, sigmoid, softplus


class MetricError(ValueError):
    """Profile is not an admissible metric (non-convex, non-finite, bad asymptotics)."""


Evaluator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


def reference_density(d, x):
    """``Phi_0''(x) = d t (1 - t)``: the density of ``omega`` in ``x``."""
    return d * np.exp(log_t(x) + log_one_minus_t(x))


def ricci_density(x):
    """Density in ``x`` of ``Ric(omega) = (2/d) omega``."""
    return 2.0 * np.exp(log_t(x) + log_one_minus_t(x))


@dataclass(frozen=True)
class SymplecticPotential:
    """Perturbation ``g`` of the Guillemin potential on ``[0, d]``.

    ``g``, ``dg`` and ``d2g`` are vectorized callables. The sum ``u_0 + g`` must be
    strictly convex, i.e. ``d / (tau (d - tau)) + g'' > 0``.
    """

    degree: int
    g: Callable
    dg: Callable
    d2g: Callable
    label: str = ""

    def interpolate(self, other: "SymplecticPotential", t: float) -> "SymplecticPotential":
        if other.degree != self.degree:
            raise MetricError("degree mismatch")
        a, b = self, other
        return SymplecticPotential(
            self.degree,
            lambda tau: (1 - t) * a.g(tau) + t * b.g(tau),
            lambda tau: (1 - t) * a.dg(tau) + t * b.dg(tau),
            lambda tau: (1 - t) * a.d2g(tau) + t * b.d2g(tau),
            f"geodesic({a.label},{b.label};{t:g})",
        )

    def shift(self, c: float) -> "SymplecticPotential":
        """Symplectic side of ``phi + c``."""
        a = self
        return SymplecticPotential(self.degree, lambda tau: a.g(tau) - c, a.dg, a.d2g,
                                   f"{a.label}{c:+g}")

    def slope_bound(self, samples: int = 4001) -> float:
        tau = np.linspace(0.0, self.degree, samples)
        return float(np.max(np.abs(self.dg(tau))))

    def check_convex(self, samples: int = 4001) -> None:
        d = self.degree
        tau = np.linspace(0.0, d, samples)[1:-1]
        u2 = d / (tau * (d - tau)) + self.d2g(tau)
        if not np.all(u2 > 0):
            raise MetricError("symplectic potential is not strictly convex")

    def energy(self) -> float:
        """Monge-Ampere energy through the Legendre side: ``-(1/d) int_0^d g``."""
        from scipy.integrate import quad
        val, _ = quad(lambda s: float(self.g(np.array(s))), 0.0, self.degree,
                      epsabs=1e-14, epsrel=1e-13, limit=400)
        return -val / self.degree

    def legendre(self, x: np.ndarray):
        """Solve ``u'(tau) = x``; returns ``(y, tau)`` with ``tau = d * sigmoid(y)``.

        In ``y = logit(tau/d)`` the equation reads ``y + g'(d sigma(y)) = x`` and
        the left side is strictly increasing, with ``|y - x| <= max|g'|``.
        """
        d = self.degree
        x = np.asarray(x, dtype=float)
        bound = self.slope_bound() + 1.0
        lo, hi = x - bound, x + bound
        y = x - self.dg(d * sigmoid(x))
        y = np.clip(y, lo, hi)
        active = np.ones(y.shape, dtype=bool)
        for _ in range(200):
            ya, xa = y[active], x[active]
            tau = d * sigmoid(ya)
            s1 = np.exp(log_t(ya) + log_one_minus_t(ya))
            G = ya + self.dg(tau) - xa
            dG = 1.0 + d * self.d2g(tau) * s1
            la = np.where(G < 0, ya, lo[active])
            ha = np.where(G > 0, ya, hi[active])
            step = np.where(dG > 0, G / np.where(dG > 0, dG, 1.0), np.inf)
            y_new = ya - step
            bad = ~((y_new > la) & (y_new < ha))
            y_new = np.where(bad, 0.5 * (la + ha), y_new)
            scale = 1e-14 * (1.0 + np.abs(y_new))
            done = (np.abs(y_new - ya) <= scale) | (ha - la <= scale) | (G == 0)
            y[active], lo[active], hi[active] = y_new, la, ha
            active[active] = ~done
            if not active.any():
                break
        return y, d * sigmoid(y)


class RadialMetric:
    """A radial relative potential ``phi`` with its first two ``x``-derivatives.

    ``evaluator(x)`` returns ``(phi, phi', phi'')`` on an array of nodes. Metrics
    built from symplectic data keep it in :attr:`symplectic` so geodesics and the
    Legendre energy formula are available without numerical inversion.
    ``asymptotics`` are the limits of ``phi`` at ``x -> -inf`` and ``x -> +inf``.
    """

    def __init__(self, degree: int, evaluator: Evaluator, *, asymptotics: tuple[float, float],
                 symplectic: SymplecticPotential | None = None, label: str = "",
                 sup_hint: float | None = None, log_density: Callable | None = None):
        if degree < 1:
            raise MetricError("degree must be a positive integer")
        self.degree = int(degree)
        self._eval = evaluator
        self.asymptotics = (float(asymptotics[0]), float(asymptotics[1]))
        self.symplectic = symplectic
        self.label = label
        self._sup_hint = sup_hint
        self._log_density = log_density
        # Sampled profiles only certify positivity up to their noise level.
        self.density_tolerance = 0.0

    def __repr__(self):
        return f"RadialMetric(d={self.degree}, {self.label or 'anonymous'})"

    # -- evaluation ---------------------------------------------------

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return self._eval(x)

    def __call__(self, x):
        return self.evaluate(x)[0]

    def density(self, x):
        """Density in ``x`` of ``omega_phi``: ``Phi_0'' + phi''``."""
        _, _, p2 = self.evaluate(x)
        return reference_density(self.degree, x) + p2

    def log_density(self, x):
        """``log`` of :meth:`density`, computed without cancellation when possible."""
        x = np.asarray(x, dtype=float)
        if self._log_density is not None:
            return self._log_density(x)
        return np.log(np.maximum(self.density(x), 1e-300))

    def moment(self, x):
        _, p1, _ = self.evaluate(x)
        return self.degree * sigmoid(x) + p1

    @cached_property
    def sup(self) -> float:
        """``sup phi`` including the limits at both ends."""
        if self._sup_hint is not None:
            return float(self._sup_hint)
        xs = np.linspace(-60.0, 60.0, 24001)
        vals = self(xs)
        k = int(np.argmax(vals))
        best = float(vals[k])
        if 0 < k < len(xs) - 1:
            r = minimize_scalar(lambda t: -float(self(np.array([t]))[0]),
                                bounds=(xs[k - 1], xs[k + 1]), method="bounded",
                                options={"xatol": 1e-12})
            best = max(best, -float(r.fun))
        return max(best, *self.asymptotics)

    def check(self, window: float = 40.0, samples: int = 8001) -> None:
        """Raise :class:`MetricError` unless ``omega_phi > 0`` on a grid (up to ``density_tolerance``)."""
        xs = np.linspace(-window, window, samples)
        p, p1, p2 = self.evaluate(xs)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            raise MetricError("profile not admissible: non-finite values")
        rho = reference_density(self.degree, xs)
        if not np.all(rho + p2 > -self.density_tolerance):
            raise MetricError("omega_phi is not positive")

    # -- transformations ------------------------------------------------

    def shift(self, c: float) -> "RadialMetric":
        ev = self._eval
        sym = self.symplectic.shift(c) if self.symplectic is not None else None
        sup = None if self._sup_hint is None else self._sup_hint + c
        return RadialMetric(self.degree, lambda x: _add(ev(x), c),
                            asymptotics=(self.asymptotics[0] + c, self.asymptotics[1] + c),
                            symplectic=sym, label=f"{self.label}{c:+g}", sup_hint=sup,
                            log_density=self._log_density)

    def scaled(self, a: float) -> "RadialMetric":
        """``a * phi`` for ``0 <= a <= 1`` (stays admissible by convexity)."""
        ev = self._eval
        sup = None if self._sup_hint is None else a * self._sup_hint
        return RadialMetric(self.degree, lambda x: tuple(a * v for v in ev(x)),
                            asymptotics=(a * self.asymptotics[0], a * self.asymptotics[1]),
                            label=f"{a:g}*{self.label}", sup_hint=sup)

    def to_symplectic(self) -> SymplecticPotential:
        """Symplectic potential, by numerical Legendre inversion when not stored."""
        if self.symplectic is not None:
            return self.symplectic
        self.check()
        return _numerical_symplectic(self)

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, degree: int) -> "RadialMetric":
        return cls.constant(degree, 0.0)

    @classmethod
    def constant(cls, degree: int, c: float) -> "RadialMetric":
        sym = SymplecticPotential(degree, lambda t: np.full_like(np.asarray(t, float), -c),
                                  _zeros, _zeros, f"const{c:+g}")

        def ev(x):
            z = np.zeros_like(x)
            return z + c, z, z.copy()

        return cls(degree, ev, asymptotics=(c, c), symplectic=sym,
                   label="zero" if c == 0 else f"const{c:+g}", sup_hint=c)

    @classmethod
    def from_symplectic(cls, sym: SymplecticPotential) -> "RadialMetric":
        sym.check_convex()
        d = sym.degree

        def ev(x):
            y, tau = sym.legendre(x)
            g, dg, d2g = sym.g(tau), sym.dg(tau), sym.d2g(tau)
            phi = dg * tau - g + d * (softplus(y) - softplus(x))
            dphi = tau - d * sigmoid(x)
            # 1/u'' with u0'' = d / (tau (d - tau)), written to stay accurate near the ends.
            st = np.exp(log_t(y) + log_one_minus_t(y))
            inv_u2 = d * st / (1.0 + d * st * d2g)
            d2phi = inv_u2 - reference_density(d, x)
            return phi, dphi, d2phi

        def log_dens(x):
            y, tau = sym.legendre(x)
            lst = log_t(y) + log_one_minus_t(y)
            return np.log(d) + lst - np.log1p(d * np.exp(lst) * sym.d2g(tau))

        ends = np.array([0.0, float(d)])
        g_end = sym.g(ends)
        return cls(d, ev, asymptotics=(-float(g_end[0]), -float(g_end[1])), symplectic=sym,
                   label=sym.label, log_density=log_dens)

    @classmethod
    def from_samples(cls, degree: int, xs, values, asymptotics=None, label="samples") -> "RadialMetric":
        """Cubic-spline profile; constant extrapolation outside the sample range.

        ``asymptotics`` default to the end sample values.
        """
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or len(xs) < 4:
            raise MetricError("profile needs at least four (x, phi) pairs")
        if not np.all(np.diff(xs) > 0):
            raise MetricError("profile x values must be strictly increasing")
        left, right = asymptotics if asymptotics is not None else (vs[0], vs[-1])
        spline = CubicSpline(xs, vs, bc_type="clamped")
        lo, hi = xs[0], xs[-1]

        def ev(x):
            inside = (x >= lo) & (x <= hi)
            xc = np.clip(x, lo, hi)
            p = np.where(inside, spline(xc), np.where(x < lo, left, right))
            p1 = np.where(inside, spline(xc, 1), 0.0)
            p2 = np.where(inside, spline(xc, 2), 0.0)
            return p, p1, p2

        if abs(vs[0] - left) > 1e-9 or abs(vs[-1] - right) > 1e-9:
            raise MetricError("declared asymptotic constants do not match the end samples")
        metric = cls(degree, ev, asymptotics=(left, right), label=label)
        metric.density_tolerance = 1e-10 * degree
        metric.check(window=max(abs(lo), abs(hi)) + 1.0)
        return metric


def _zeros(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _add(triple, c):
    p, p1, p2 = triple
    return p + c, p1, p2


def _numerical_symplectic(metric: RadialMetric, half_width: float = 60.0,
                          nodes: int = 12001) -> SymplecticPotential:
    """Tabulate ``g = u - u_0`` against ``y = logit(tau/d)`` from a dense ``x`` grid.

    ``x - y = g'(tau)`` and ``d(g')/dy = rho_0(tau)/omega_phi(x) - 1``, so cubic
    Hermite interpolation in ``y`` reproduces ``g'`` and ``g''`` to grid accuracy.
    Outside the grid ``g`` is extended by its end values.
    """
    d = metric.degree
    x = np.linspace(-half_width, half_width, nodes)
    # Where omega_phi is below the trust floor the profile is treated as flat.
    x = x[metric.density(x) > 1e-12 * d]
    p, p1, _ = metric.evaluate(x)
    s = np.clip(sigmoid(x) + p1 / d, 1e-300, 1.0)
    one_minus = np.clip(sigmoid(-x) - p1 / d, 1e-300, 1.0)
    y = np.log(s) - np.log(one_minus)
    # Sampled tails can wiggle at roundoff level; keep a strictly increasing subsequence.
    keep = y > np.concatenate([[-np.inf], np.maximum.accumulate(y)[:-1]])
    x, p, s, one_minus, y = x[keep], p[keep], s[keep], one_minus[keep], y[keep]
    dg = x - y
    ratio = np.exp(np.log(d) + np.log(s) + np.log(one_minus) - metric.log_density(x))
    ddg_dy = ratio - 1.0
    g_vals = d * (x * s - softplus(x) - _xlogx(s) - _xlogx(one_minus)) - p
    # dg/dy = g'(tau) * dtau/dy
    dg_dy = dg * d * s * one_minus
    G = CubicHermiteSpline(y, g_vals, dg_dy)
    D1 = CubicHermiteSpline(y, dg, ddg_dy)
    y_lo, y_hi = y[0], y[-1]
    g_lo, g_hi = -metric.asymptotics[0], -metric.asymptotics[1]

    def to_y(tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(tau) - np.log(d - tau)

    def g(tau):
        yy = to_y(tau)
        inside = (yy >= y_lo) & (yy <= y_hi)
        out = np.where(yy < y_lo, g_lo, g_hi)
        return np.where(inside, G(np.clip(yy, y_lo, y_hi)), out)

    def dg_fn(tau):
        yy = to_y(tau)
        inside = (yy >= y_lo) & (yy <= y_hi)
        return np.where(inside, D1(np.clip(yy, y_lo, y_hi)), 0.0)

    def d2g(tau):
        tau = np.asarray(tau, dtype=float)
        yy = to_y(tau)
        inside = (yy >= y_lo) & (yy <= y_hi)
        rho = tau * (d - tau) / d
        val = D1(np.clip(yy, y_lo, y_hi), 1) / np.where(rho > 0, rho, 1.0)
        return np.where(inside & (rho > 0), val, 0.0)

    return SymplecticPotential(d, g, dg_fn, d2g, f"legendre({metric.label})")


def _xlogx(s):
    s = np.asarray(s, dtype=float)
    return np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)


# -- named profiles ------------------------------------------------------------

def bump_potential(d: int, amplitude: float | None = None) -> SymplecticPotential:
    """Symmetric bump: ``g = -a sin^2(pi tau / d)`` with ``a = d/6`` by default."""
    a = d / 6.0 if amplitude is None else amplitude
    k = np.pi / d
    return SymplecticPotential(
        d,
        lambda t: -a * np.sin(k * t) ** 2,
        lambda t: -a * k * np.sin(2 * k * t),
        lambda t: -2 * a * k * k * np.cos(2 * k * t),
        "bump",
    )


def asymmetric_potential(d: int, amplitude: float | None = None) -> SymplecticPotential:
    """``g = a (sin(pi tau/d) + sin(2 pi tau/d) / 2)`` with ``a = d/8`` by default."""
    a = d / 8.0 if amplitude is None else amplitude
    k = np.pi / d
    return SymplecticPotential(
        d,
        lambda t: a * (np.sin(k * t) + 0.5 * np.sin(2 * k * t)),
        lambda t: a * k * (np.cos(k * t) + np.cos(2 * k * t)),
        lambda t: -a * k * k * (np.sin(k * t) + 2 * np.sin(2 * k * t)),
        "asymmetric",
    )


def fourier_potential(d: int, coefficients) -> SymplecticPotential:
    """``g = sum_k a_k sin(k pi tau / d)``; used for randomized metrics."""
    a = np.asarray(coefficients, dtype=float)
    ks = np.arange(1, len(a) + 1) * np.pi / d

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.tensordot(a, np.sin(np.multiply.outer(ks, t)), axes=1)

    def dg(t):
        t = np.asarray(t, dtype=float)
        return np.tensordot(a * ks, np.cos(np.multiply.outer(ks, t)), axes=1)

    def d2g(t):
        t = np.asarray(t, dtype=float)
        return np.tensordot(-a * ks ** 2, np.sin(np.multiply.outer(ks, t)), axes=1)

    return SymplecticPotential(d, g, dg, d2g, "fourier")


def random_metric(d: int, rng: np.random.Generator, modes: int = 4,
                  convexity_margin: float = 0.3) -> RadialMetric:
    """Random admissible metric: Fourier symplectic perturbation rescaled into the convex range."""
    raw = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
    ks = np.arange(1, modes + 1) * np.pi / d
    worst = float(np.sum(np.abs(raw) * ks ** 2))
    # |g''| <= worst * scale must stay below (1 - margin) * min u0'' = (1 - margin) 4/d.
    scale = rng.uniform(0.2, 1.0) * (1 - convexity_margin) * (4.0 / d) / worst
    sym = fourier_potential(d, raw * scale)
    shift = rng.normal()
    return RadialMetric.from_symplectic(sym.shift(shift))


PROFILE_NAMES = ("zero", "bump", "asymmetric")


def named_profile(name: str, d: int) -> RadialMetric:
    if name == "zero":
        return RadialMetric.zero(d)
    if name == "bump":
        return RadialMetric.from_symplectic(bump_potential(d))
    if name == "asymmetric":
        return RadialMetric.from_symplectic(asymmetric_potential(d))
    raise KeyError(f"unknown metric profile {name!r}")
