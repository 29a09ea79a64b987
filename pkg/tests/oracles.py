"""Independent reference computations used by the tests.

Nothing here imports the package: every quantity is computed by a different
route than the library (slice integration instead of triangulated moments,
support functions of the anticanonical polytope instead of cone decompositions,
brute-force lattice scans with scipy hulls instead of exact facet tests).
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull
from scipy.special import betaln


# -- polygons and intervals ---------------------------------------------------------


def polygon_order(vertices):
    """Vertices of a convex polygon in counter-clockwise order."""
    pts = [tuple(Fraction(c) for c in v) for v in vertices]
    cx = sum(p[0] for p in pts) / len(pts)
    cy = sum(p[1] for p in pts) / len(pts)
    return sorted(pts, key=lambda p: math.atan2(float(p[1] - cy), float(p[0] - cx)))


def shoelace(vertices) -> Fraction:
    pts = polygon_order(vertices)
    s = Fraction(0)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


def _slice_length(pts, xi, t):
    """Length parameter of ``P cap {<xi, u> = t}`` measured along ``w = (-xi_2, xi_1)``."""
    w = (-xi[1], xi[0])
    hits = []
    for p, q in zip(pts, pts[1:] + pts[:1]):
        fp = xi[0] * p[0] + xi[1] * p[1] - t
        fq = xi[0] * q[0] + xi[1] * q[1] - t
        if fp == 0:
            hits.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            lam = fp / (fp - fq)
            hits.append((p[0] + lam * (q[0] - p[0]), p[1] + lam * (q[1] - p[1])))
    if not hits:
        return Fraction(0)
    s = [w[0] * h[0] + w[1] * h[1] for h in hits]
    return max(s) - min(s)


def slice_mean(vertices, xi) -> Fraction:
    """Mean of ``<xi, .>`` over a polygon or interval by exact slice integration.

    The slice length is piecewise linear in ``t`` with breaks at vertex values, so
    Simpson's rule is exact on every piece.
    """
    xi = tuple(Fraction(c) for c in xi)
    if len(xi) == 1:
        vals = sorted(Fraction(v[0]) for v in vertices)
        return xi[0] * (vals[0] + vals[-1]) / 2
    pts = polygon_order(vertices)
    ts = sorted({xi[0] * p[0] + xi[1] * p[1] for p in pts})
    mass = Fraction(0)
    first = Fraction(0)
    for a, b in zip(ts, ts[1:]):
        mid = (a + b) / 2
        la, lm, lb = (_slice_length(pts, xi, t) for t in (a, mid, b))
        h = (b - a) / 6
        mass += h * (la + 4 * lm + lb)
        first += h * (a * la + 4 * mid * lm + b * lb)
    return first / mass


def support_min(vertices, xi) -> Fraction:
    return min(sum(Fraction(a) * b for a, b in zip(xi, v)) for v in vertices)


def slice_S(vertices, xi) -> Fraction:
    return slice_mean(vertices, xi) - support_min(vertices, xi)


# -- log discrepancy through the polytope of -(K + theta) -----------------------------


def anticanonical_vertices(rays, coefficients):
    """Vertices of ``{u : <u_rho, u> >= -(1 - c_rho)}`` (plane or line only)."""
    n = len(rays[0])
    ineqs = [(tuple(Fraction(x) for x in r), -(1 - Fraction(c))) for r, c in zip(rays, coefficients)]
    if n == 1:
        lo = max(b / a[0] for a, b in ineqs if a[0] > 0)
        hi = min(b / a[0] for a, b in ineqs if a[0] < 0)
        return [(lo,), (hi,)]
    verts = set()
    for (a1, b1), (a2, b2) in itertools.combinations(ineqs, 2):
        det = a1[0] * a2[1] - a1[1] * a2[0]
        if det == 0:
            continue
        u = ((b1 * a2[1] - b2 * a1[1]) / det, (a1[0] * b2 - a2[0] * b1) / det)
        if all(a[0] * u[0] + a[1] * u[1] >= b for a, b in ineqs):
            verts.add(u)
    return sorted(verts)


def log_discrepancy(rays, coefficients, xi) -> Fraction:
    """``A_theta(v_xi) = -min <xi, .>`` over the polytope of ``-(K + theta)`` (nef case)."""
    return -support_min(anticanonical_vertices(rays, coefficients), xi)


def primitive_directions(n: int, bound: int):
    for xi in itertools.product(range(-bound, bound + 1), repeat=n):
        if any(xi) and math.gcd(*[abs(c) for c in xi]) == 1:
            yield xi


def delta_by_search(vertices, rays, coefficients, bound: int = 6) -> Fraction:
    """``min A/S`` over all primitive directions with ``|xi|_inf <= bound``."""
    n = len(vertices[0])
    best = None
    for xi in primitive_directions(n, bound):
        r = log_discrepancy(rays, coefficients, xi) / slice_S(vertices, xi)
        best = r if best is None or r < best else best
    return best


# -- lattice points -----------------------------------------------------------------------


def lattice_points_scan(vertices, m: int = 1) -> np.ndarray:
    """Integer points of ``m P`` by a box scan against a floating convex hull."""
    V = np.asarray([[float(c) for c in v] for v in vertices]) * m
    n = V.shape[1]
    lo = np.floor(V.min(axis=0)).astype(int)
    hi = np.ceil(V.max(axis=0)).astype(int)
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    if n == 1:
        keep = (pts[:, 0] >= V.min() - 1e-9) & (pts[:, 0] <= V.max() + 1e-9)
        return pts[keep]
    hull = ConvexHull(V)
    keep = np.all(pts @ hull.equations[:, :-1].T + hull.equations[:, -1] <= 1e-9, axis=1)
    return pts[keep]


def pick_count(vertices) -> int:
    """Lattice points of a lattice polygon by Pick's theorem."""
    pts = polygon_order(vertices)
    boundary = 0
    for p, q in zip(pts, pts[1:] + pts[:1]):
        boundary += math.gcd(int(abs(q[0] - p[0])), int(abs(q[1] - p[1])))
    area = shoelace(vertices)
    return int(area + Fraction(boundary, 2) + 1)


def delta_m_bruteforce(vertices, rays, coefficients, m: int, bound: int = 50) -> Fraction:
    """``min A / S_m`` over primitive ``|xi|_inf <= bound`` with integer lattice sums."""
    n = len(vertices[0])
    pts = lattice_points_scan(vertices, m).astype(np.int64)
    verts = np.asarray([[int(c) for c in v] for v in vertices], dtype=np.int64)
    xis = np.asarray(list(primitive_directions(n, bound)), dtype=np.int64)
    count = len(pts)
    sums = (pts @ xis.T).sum(axis=0)                       # sum_u <xi, u>
    mins = (verts @ xis.T).min(axis=0)                      # min_P <xi, .>
    num_S = sums - m * count * mins                         # S_m = num_S / (m count)
    anti = anticanonical_vertices(rays, coefficients)
    den = math.lcm(*[c.denominator for v in anti for c in v])
    anti_int = np.asarray([[int(c * den) for c in v] for v in anti], dtype=np.int64)
    A_num = -(anti_int @ xis.T).min(axis=0)                 # A = A_num / den
    # A/S_m = A_num * m * count / (den * num_S); compare as exact fractions at the minimum.
    ratios = A_num.astype(float) * m * count / (den * num_S.astype(float))
    k = int(np.argmin(ratios))
    close = np.nonzero(ratios <= ratios[k] * (1 + 1e-9))[0]
    return min(Fraction(int(A_num[j]) * m * count, int(den * num_S[j])) for j in close)


# -- P^1 closed forms ---------------------------------------------------------------------


def reference_hilbert_log_weights(d: int, m: int) -> np.ndarray:
    """``log ||z^j||^2 = log(d B(j+1, md-j+1))`` for the Fubini-Study metric."""
    j = np.arange(m * d + 1)
    return np.log(d) + betaln(j + 1, m * d - j + 1)
