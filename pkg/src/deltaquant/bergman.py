"""Quantization on ``(P^1, O(d))``: Hilbert forms, Fubini-Study maps, ``E_m`` and checkers.

``R_m = H^0(P^1, O(md))`` has the monomial basis ``z^j``, ``j = 0..md``. With
``t = e^x/(1+e^x)`` the pointwise norm is ``|z^j|^2_{h^m} = t^j (1-t)^(md-j)``,
so for a radial ``phi``

    H_m^phi(z^j, z^j) = int t^j (1-t)^(md-j) e^{-m phi} omega,

and the form is diagonal. Everything downstream works with log-weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy import linalg
from scipy.special import logsumexp

from .metrics import MetricError, RadialMetric, SymplecticPotential, reference_density
from .quadrature import QuadratureScheme, log_one_minus_t, log_t, sigmoid


class QuantizationError(ValueError):
    pass


@dataclass(frozen=True)
class HermitianForm:
    """Inner product on ``R_m``; diagonal (log-weights) or a full matrix."""

    level: int
    degree: int
    log_diag: np.ndarray | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.log_diag is None) == (self.matrix is None):
            raise QuantizationError("give exactly one of log_diag or matrix")
        n = self.dim
        if self.log_diag is not None:
            ld = np.asarray(self.log_diag, dtype=float)
            if ld.shape != (n,) or not np.all(np.isfinite(ld)):
                raise QuantizationError("form must have d_m finite positive weights")
            object.__setattr__(self, "log_diag", ld)
        else:
            mat = np.asarray(self.matrix, dtype=complex)
            if mat.shape != (n, n) or not np.allclose(mat, mat.conj().T, atol=1e-12, rtol=1e-10):
                raise QuantizationError("form matrix must be Hermitian of size d_m")
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise QuantizationError("form is not positive-definite")
            object.__setattr__(self, "matrix", mat)

    @classmethod
    def diagonal(cls, level: int, degree: int, weights) -> "HermitianForm":
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise QuantizationError("form is not positive-definite")
        return cls(level, degree, log_diag=np.log(w))

    @property
    def dim(self) -> int:
        return self.level * self.degree + 1

    @property
    def is_diagonal(self) -> bool:
        return self.log_diag is not None

    @property
    def weights(self) -> np.ndarray:
        if self.is_diagonal:
            return np.exp(self.log_diag)
        return np.real(np.diag(self.matrix))

    def as_matrix(self) -> np.ndarray:
        return np.diag(np.exp(self.log_diag)).astype(complex) if self.is_diagonal else self.matrix

    def logdet(self) -> float:
        if self.is_diagonal:
            return float(np.sum(self.log_diag))
        return float(np.linalg.slogdet(self.matrix)[1])

    def scaled(self, log_factor: float) -> "HermitianForm":
        """The form multiplied by ``exp(log_factor)``."""
        if self.is_diagonal:
            return HermitianForm(self.level, self.degree, log_diag=self.log_diag + log_factor)
        return HermitianForm(self.level, self.degree, matrix=self.matrix * np.exp(log_factor))


def _check_compatible(a: HermitianForm, b: HermitianForm):
    if a.level != b.level or a.degree != b.degree:
        raise QuantizationError(f"level mismatch: ({a.level}, {a.degree}) vs ({b.level}, {b.degree})")


def hilbert_form(phi: RadialMetric, m: int, q: QuadratureScheme | None = None) -> HermitianForm:
    """``H_m^phi`` with the reference volume form ``omega`` (mass ``d``)."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    q = q or QuadratureScheme()
    d = phi.degree
    N = m * d
    j = np.arange(N + 1)[:, None]

    def logf(x):
        return (np.log(d) + (j + 1) * log_t(x) + (N - j + 1) * log_one_minus_t(x)
                - m * phi(x))

    res = q.integrate(logf, log=True)
    if not np.all(np.isfinite(res.value)):
        raise QuantizationError("profile not admissible")
    return HermitianForm(m, d, log_diag=np.asarray(res.value))


def reference_form(d: int, m: int, q: QuadratureScheme | None = None) -> HermitianForm:
    """``H_m = H_m^0``."""
    return hilbert_form(RadialMetric.zero(d), m, q)


@dataclass(frozen=True)
class BergmanMetric:
    """``FS(H) = (1/m) log sum_i |s_i|^2_{h^m}`` over an ``H``-orthonormal basis."""

    form: HermitianForm

    @property
    def level(self) -> int:
        return self.form.level

    @property
    def degree(self) -> int:
        return self.form.degree

    def _log_terms(self, x):
        N = self.level * self.degree
        j = np.arange(N + 1)[:, None]
        return j * log_t(x) + (N - j) * log_one_minus_t(x) - self.form.log_diag[:, None]

    def __call__(self, x) -> np.ndarray:
        if not self.form.is_diagonal:
            raise QuantizationError("radial profile requires a diagonal form; use evaluate_at")
        x = np.asarray(x, dtype=float)
        return logsumexp(self._log_terms(x), axis=0) / self.level

    def evaluate_at(self, z, basis: np.ndarray | None = None) -> np.ndarray:
        """``FS(H)`` at complex points, optionally through an explicit orthonormal basis.

        ``basis`` rows are sections in monomial coordinates; they must be
        ``H``-orthonormal.
        """
        z = np.asarray(z, dtype=complex)
        N = self.level * self.degree
        H = self.form.as_matrix()
        if basis is None:
            # Cholesky H = C C^*; rows of C^{-1} are an orthonormal basis.
            basis = np.linalg.inv(np.linalg.cholesky(H))
        else:
            gram = basis.conj() @ H.T @ basis.T
            if not np.allclose(gram, np.eye(N + 1), atol=1e-9):
                raise QuantizationError("basis is not orthonormal for the form")
        powers = z[None, :] ** np.arange(N + 1)[:, None]
        vals = basis @ powers
        total = np.sum(np.abs(vals) ** 2, axis=0)
        ref = self.degree * self.level * np.log1p(np.abs(z) ** 2)
        return (np.log(total) - ref) / self.level

    def profile(self) -> RadialMetric:
        """The Bergman metric as a radial profile with analytic derivatives."""
        if not self.form.is_diagonal:
            raise QuantizationError("radial profile requires a diagonal form")
        m, d = self.level, self.degree
        N = m * d
        ld = self.form.log_diag
        j = np.arange(N + 1)[:, None]

        def ev(x):
            terms = self._log_terms(x)
            lse = logsumexp(terms, axis=0)
            p = np.exp(terms - lse)
            mean = np.sum(j * p, axis=0)
            var = np.sum((j - mean) ** 2 * p, axis=0)
            return lse / m, mean / m - d * sigmoid(x), var / m - reference_density(d, x)

        asym = (-ld[0] / m, -ld[-1] / m)
        return RadialMetric(d, ev, asymptotics=asym, label=f"FS(m={m})")


def fubini_study(H: HermitianForm) -> BergmanMetric:
    if not H.is_diagonal and np.linalg.eigvalsh(H.matrix).min() <= 0:
        raise QuantizationError("form is not positive-definite")
    return BergmanMetric(H)


def bergman_projection(phi: RadialMetric, m: int, q: QuadratureScheme | None = None) -> BergmanMetric:
    """``phi^(m) = FS(H_m^phi)``."""
    return fubini_study(hilbert_form(phi, m, q))


def quantized_energy(B: BergmanMetric, reference: HermitianForm) -> float:
    """``E_m(B) = (1/(m d_m)) log(det H_m / det FS^{-1}(B))``."""
    _check_compatible(B.form, reference)
    m, dm = B.level, B.form.dim
    return (reference.logdet() - B.form.logdet()) / (m * dm)


def bergman_geodesic(H0: HermitianForm, H1: HermitianForm, t: float) -> HermitianForm:
    """Geodesic ``diag(e^{mu_i t})`` in a basis diagonalizing both forms."""
    if H0.dim != H1.dim:
        raise QuantizationError("dimension mismatch")
    _check_compatible(H0, H1)
    if H0.is_diagonal and H1.is_diagonal:
        return HermitianForm(H0.level, H0.degree, log_diag=(1 - t) * H0.log_diag + t * H1.log_diag)
    A, B = H0.as_matrix(), H1.as_matrix()
    w, V = linalg.eigh(B, A)  # V^* A V = I, V^* B V = diag(w)
    Vinv = np.linalg.inv(V)
    Ht = Vinv.conj().T @ np.diag(w ** t) @ Vinv
    return HermitianForm(H0.level, H0.degree, matrix=0.5 * (Ht + Ht.conj().T))


def toric_geodesic(phi0: RadialMetric, phi1: RadialMetric, t: float) -> RadialMetric:
    """Geodesic through linear interpolation of symplectic potentials."""
    if phi0.degree != phi1.degree:
        raise MetricError("degree mismatch")
    if t == 0:
        return phi0
    if t == 1:
        return phi1
    s0, s1 = phi0.to_symplectic(), phi1.to_symplectic()
    return RadialMetric.from_symplectic(s0.interpolate(s1, t))


def ma_energy(phi: RadialMetric, q: QuadratureScheme | None = None) -> float:
    """``E(phi) = (1/2V) int phi (omega + omega_phi)`` on ``P^1`` (``V = d``)."""
    q = q or QuadratureScheme()
    d = phi.degree

    def f(x):
        p, _, p2 = phi.evaluate(x)
        return p * (2 * reference_density(d, x) + p2)

    return float(q.integrate(f, window=integration_window(phi, q)).value) / (2 * d)


def integration_window(phi: RadialMetric, q: QuadratureScheme) -> tuple[float, float]:
    sym = phi.symplectic
    extra = sym.slope_bound() if sym is not None else 0.0
    return (-q.x_range - extra, q.x_range + extra)


# -- checkers ---------------------------------------------------------------------


def _independent_integral(f) -> tuple[float, float]:
    """Adaptive QUADPACK integral over the real line, split at 0."""
    a, ea = sp_integrate.quad(f, -np.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=500)
    b, eb = sp_integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=500)
    return a + b, ea + eb


def partition_identity_check(phi: RadialMetric, m: int, q: QuadratureScheme | None = None) -> float:
    """Relative residual of ``int e^{m(phi^(m) - phi)} omega = d_m``.

    The Hilbert form comes from the trapezoid scheme; the check integral uses an
    independent adaptive rule, so the residual measures quadrature error.
    """
    B = bergman_projection(phi, m, q)
    d = phi.degree
    dm = B.form.dim

    def f(x):
        xa = np.array([x])
        return float(np.exp(m * (B(xa) - phi(xa)))[0] * reference_density(d, xa)[0])

    val, _ = _independent_integral(f)
    return abs(val - dm) / dm


@dataclass(frozen=True)
class MaxPrincipleReport:
    level: int
    t_values: tuple[float, ...]
    margins: tuple[float, ...]            # min_j (Hilb^{phi_t}_j - H_{t,j})
    relative_margins: tuple[float, ...]   # min_j (Hilb^{phi_t}_j / H_{t,j} - 1)

    @property
    def min_margin(self) -> float:
        return min(self.margins)

    @property
    def min_relative_margin(self) -> float:
        return min(self.relative_margins)


def max_principle_check(phi0: RadialMetric, phi1: RadialMetric, m: int, t_grid,
                        q: QuadratureScheme | None = None) -> MaxPrincipleReport:
    """Compare the Bergman geodesic of the endpoint Hilbert forms with ``H_m^{phi_t}``.

    On ``P^1`` the weight ``h^m e^{-m phi_t}`` times ``omega`` is a metric on
    ``mL - K_X`` whose curvature stays positive along the toric geodesic, so
    sections of ``mL`` are compared entrywise.
    """
    H0, H1 = hilbert_form(phi0, m, q), hilbert_form(phi1, m, q)
    ts, margins, rel = [], [], []
    for t in t_grid:
        t = float(t)
        Ht = bergman_geodesic(H0, H1, t)
        if t == 0:
            hilb = H0
        elif t == 1:
            hilb = H1
        else:
            hilb = hilbert_form(toric_geodesic(phi0, phi1, t), m, q)
        diff = np.exp(hilb.log_diag) - np.exp(Ht.log_diag)
        ts.append(t)
        margins.append(float(diff.min()))
        rel.append(float(np.expm1(hilb.log_diag - Ht.log_diag).min()))
    return MaxPrincipleReport(m, tuple(ts), tuple(margins), tuple(rel))


@dataclass(frozen=True)
class SandwichRow:
    level: int
    lower_margin: float   # E_m(((1-eps)phi)^(m)) + eps sup phi - E(phi)
    upper_margin: float   # (1-eps) E(B) + eps sup B + eps - E_m(B),  B = phi^(m)


@dataclass(frozen=True)
class SandwichReport:
    epsilon: float
    rows: tuple[SandwichRow, ...]
    tolerance: float

    @property
    def m0(self) -> int | None:
        """Smallest swept level from which both margins stay above ``-tolerance``."""
        ok = [min(r.lower_margin, r.upper_margin) >= -self.tolerance for r in self.rows]
        if not ok or not ok[-1]:
            return None
        k = len(ok)
        while k > 0 and ok[k - 1]:
            k -= 1
        return self.rows[k].level


def energy_sandwich_check(phi: RadialMetric, eps: float, m: int,
                          q: QuadratureScheme | None = None) -> SandwichRow:
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    q = q or QuadratureScheme()
    d = phi.degree
    ref = reference_form(d, m, q)
    E_phi = ma_energy(phi, q)
    lower_B = bergman_projection(phi.scaled(1 - eps), m, q)
    lower = quantized_energy(lower_B, ref) + eps * phi.sup - E_phi
    B = bergman_projection(phi, m, q)
    prof = B.profile()
    upper = (1 - eps) * ma_energy(prof, q) + eps * prof.sup + eps - quantized_energy(B, ref)
    return SandwichRow(m, float(lower), float(upper))


def energy_sandwich_sweep(phi: RadialMetric, eps: float, levels, q: QuadratureScheme | None = None,
                          tolerance: float = 1e-6) -> SandwichReport:
    rows = tuple(energy_sandwich_check(phi, eps, m, q) for m in sorted(levels))
    return SandwichReport(eps, rows, tolerance)


@dataclass(frozen=True)
class DensityReport:
    level: int
    deviation_uniform: float   # sup |rho_m/d_m - 1/V|
    deviation_expansion: float  # sup |rho_m/d_m - (omega_phi/omega)/V|
    mass_residual: float       # |int rho_m omega - d_m| / d_m


def bergman_density(phi: RadialMetric, m: int, q: QuadratureScheme | None = None,
                    window: float = 30.0, samples: int = 6001) -> DensityReport:
    """Density ``rho_m = sum |s_j|^2_{h^m e^{-m phi}}`` of an ``H_m^phi``-orthonormal basis."""
    d = phi.degree
    B = bergman_projection(phi, m, q)
    dm = B.form.dim
    xs = np.linspace(-window, window, samples)
    rho = np.exp(m * (B(xs) - phi(xs)))
    ratio = phi.density(xs) / reference_density(d, xs)
    dev_u = float(np.max(np.abs(rho / dm - 1.0 / d)))
    dev_e = float(np.max(np.abs(rho / dm - ratio / d)))

    def f(x):
        xa = np.array([x])
        return float(np.exp(m * (B(xa) - phi(xa)))[0] * reference_density(d, xa)[0])

    mass, _ = _independent_integral(f)
    return DensityReport(m, dev_u, dev_e, abs(mass - dm) / dm)
