"""Exact rational convex geometry for lattice polytopes of dimension 1 to 3.

Everything here works over :class:`fractions.Fraction`. A polytope is kept in
both V- and H-representation; facets are stored as pairs ``(a, b)`` with ``a``
a primitive integer inner normal, meaning ``<a, u> >= b`` on the polytope.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from math import factorial, floor, ceil, gcd
from typing import Iterable, Sequence

Vector = tuple  # tuple of Fractions (or ints for lattice directions)

MAX_DIMENSION = 3


class PolytopeError(ValueError):
    """Raised when input geometry violates a polytope or fan invariant."""


def as_vector(v: Iterable) -> tuple[Fraction, ...]:
    return tuple(Fraction(c) for c in v)


def dot(a: Sequence, b: Sequence) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def sub(a: Sequence, b: Sequence) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def det(rows: Sequence[Sequence]) -> Fraction:
    """Exact determinant by fraction-preserving Gaussian elimination."""
    m = [[Fraction(x) for x in r] for r in rows]
    n = len(m)
    sign = 1
    out = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            sign = -sign
        p = m[col][col]
        out *= p
        for r in range(col + 1, n):
            f = m[r][col] / p
            if f:
                for c in range(col, n):
                    m[r][c] -= f * m[col][c]
    return sign * out


def rank(vectors: Sequence[Sequence]) -> int:
    m = [[Fraction(x) for x in r] for r in vectors]
    if not m:
        return 0
    rows, cols = len(m), len(m[0])
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
        if r == rows:
            break
    return r


def solve(matrix: Sequence[Sequence], rhs: Sequence) -> tuple[Fraction, ...]:
    """Solve a square nonsingular system exactly (Cramer's rule, n <= 3)."""
    d = det(matrix)
    if d == 0:
        raise PolytopeError("singular system")
    n = len(matrix)
    out = []
    for k in range(n):
        mk = [list(row) for row in matrix]
        for i in range(n):
            mk[i][k] = rhs[i]
        out.append(det(mk) / d)
    return tuple(out)


def primitive(v: Sequence) -> tuple[int, ...]:
    """Scale a nonzero rational vector to the primitive integer vector on its ray."""
    fr = [Fraction(x) for x in v]
    if all(x == 0 for x in fr):
        raise PolytopeError("zero vector has no primitive representative")
    den = reduce(lambda a, b: a * b // gcd(a, b), (x.denominator for x in fr), 1)
    ints = [int(x * den) for x in fr]
    g = reduce(gcd, (abs(i) for i in ints))
    return tuple(i // g for i in ints)


def is_primitive(v: Sequence[int]) -> bool:
    return reduce(gcd, (abs(int(x)) for x in v)) == 1


def _normal_of(points: Sequence[Sequence[Fraction]], n: int) -> tuple | None:
    """Normal to the affine hull of ``n`` points in Q^n, or None if degenerate."""
    p0 = points[0]
    w = [sub(p, p0) for p in points[1:]]
    if n == 1:
        return (Fraction(1),)
    if n == 2:
        (a, b), = w
        normal = (-b, a)
    else:
        (a1, a2, a3), (b1, b2, b3) = w
        normal = (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)
    if all(c == 0 for c in normal):
        return None
    return normal


@dataclass(frozen=True)
class Facet:
    """Half-space ``<normal, u> >= offset`` with a primitive integer normal."""

    normal: tuple[int, ...]
    offset: Fraction

    def slack(self, u: Sequence) -> Fraction:
        return dot(self.normal, u) - self.offset


@dataclass(frozen=True)
class FanData:
    """A complete rational fan given by primitive rays and maximal cones."""

    dimension: int
    rays: tuple[tuple[int, ...], ...]
    cones: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for r in self.rays:
            if len(r) != self.dimension or not is_primitive(r):
                raise PolytopeError(f"ray {r} is not a primitive integer vector")
        for c in self.cones:
            if rank([self.rays[i] for i in c]) != self.dimension:
                raise PolytopeError(f"cone {c} is not full-dimensional")
        if self.is_simplicial:
            # Pseudo-manifold test: every wall bounds exactly two maximal cones.
            counts: dict[frozenset, int] = {}
            for c in self.cones:
                for w in itertools.combinations(c, self.dimension - 1):
                    counts[frozenset(w)] = counts.get(frozenset(w), 0) + 1
            if any(v != 2 for v in counts.values()):
                raise PolytopeError("fan is not complete")

    @property
    def is_simplicial(self) -> bool:
        return all(len(c) == self.dimension for c in self.cones)

    @cached_property
    def smooth(self) -> tuple[bool, ...]:
        return tuple(
            len(c) == self.dimension and abs(det([self.rays[i] for i in c])) == 1
            for c in self.cones
        )

    @property
    def is_smooth(self) -> bool:
        return all(self.smooth)

    def walls(self) -> list[tuple[tuple[int, ...], int, int]]:
        """Codimension-one cones as ``(wall rays, extra ray of cone 1, extra ray of cone 2)``."""
        if not self.is_simplicial:
            raise PolytopeError("walls are only enumerated for simplicial fans")
        owners: dict[frozenset, list[int]] = {}
        for k, c in enumerate(self.cones):
            for w in itertools.combinations(sorted(c), self.dimension - 1):
                owners.setdefault(frozenset(w), []).append(k)
        out = []
        for w, (k1, k2) in sorted(owners.items(), key=lambda kv: sorted(kv[0])):
            (p,) = set(self.cones[k1]) - w
            (q,) = set(self.cones[k2]) - w
            out.append((tuple(sorted(w)), p, q))
        return out

    def wall_relation(self, wall: tuple[int, ...], p: int, q: int) -> tuple[Fraction, ...]:
        """Coefficients ``b`` with ``u_p + u_q + sum_i b_i u_{wall_i} = 0``."""
        target = [-(self.rays[p][k] + self.rays[q][k]) for k in range(self.dimension)]
        if not wall:
            if any(target):
                raise PolytopeError("rays of a one-dimensional fan must be opposite")
            return ()
        basis = [self.rays[i] for i in wall]
        # Solve on a nonsingular square minor of the n x (n-1) system.
        n, r = self.dimension, len(wall)
        for rows in itertools.combinations(range(n), r):
            minor = [[basis[j][i] for j in range(r)] for i in rows]
            if det(minor) != 0:
                b = solve(minor, [target[i] for i in rows])
                check = [sum(b[j] * basis[j][i] for j in range(r)) for i in range(n)]
                if check != [Fraction(t) for t in target]:
                    raise PolytopeError("wall relation does not close; fan not complete")
                return b
        raise PolytopeError("degenerate wall")


class LatticePolytope:
    """Full-dimensional rational polytope in Q^n, n <= 3.

    Build with :meth:`from_points` (V-representation, redundant points allowed)
    or :meth:`from_inequalities`. Instances are immutable and hashable by their
    vertex set.
    """

    def __init__(self, points: Iterable[Sequence]):
        pts = sorted(set(as_vector(p) for p in points))
        if not pts:
            raise PolytopeError("empty point set")
        n = len(pts[0])
        if not 1 <= n <= MAX_DIMENSION:
            raise PolytopeError(f"dimension {n} not supported (1 <= n <= {MAX_DIMENSION})")
        if any(len(p) != n for p in pts):
            raise PolytopeError("points of mixed dimension")
        if rank([sub(p, pts[0]) for p in pts[1:]]) < n:
            raise PolytopeError("not full-dimensional")
        facets = _hull_facets(pts, n)
        verts = [p for p in pts
                 if rank([f.normal for f in facets if f.slack(p) == 0]) == n]
        self.dimension = n
        self.vertices: tuple[tuple[Fraction, ...], ...] = tuple(verts)
        self.facets: tuple[Facet, ...] = tuple(sorted(facets, key=lambda f: (f.normal, f.offset)))
        self._check()

    @classmethod
    def from_points(cls, points: Iterable[Sequence]) -> "LatticePolytope":
        return cls(points)

    @classmethod
    def from_inequalities(cls, facets: Iterable[tuple[Sequence, object]]) -> "LatticePolytope":
        fs = [(tuple(Fraction(a) for a in normal), Fraction(b)) for normal, b in facets]
        if not fs:
            raise PolytopeError("no inequalities")
        n = len(fs[0][0])
        pts = []
        for combo in itertools.combinations(fs, n):
            mat = [c[0] for c in combo]
            if det(mat) == 0:
                continue
            u = solve(mat, [c[1] for c in combo])
            if all(dot(a, u) >= b for a, b in fs):
                pts.append(u)
        if not pts:
            raise PolytopeError("inequalities define an empty or unbounded set")
        return cls(pts)

    def _check(self):
        n = self.dimension
        for f in self.facets:
            if not is_primitive(f.normal):
                raise PolytopeError("facet normal not primitive")
            on = [v for v in self.vertices if f.slack(v) == 0]
            if len(on) < n or any(f.slack(v) < 0 for v in self.vertices):
                raise PolytopeError("V- and H-representations disagree")

    def __eq__(self, other):
        return isinstance(other, LatticePolytope) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        vs = ", ".join("(" + ",".join(str(c) for c in v) + ")" for v in self.vertices)
        return f"LatticePolytope([{vs}])"

    @property
    def is_lattice(self) -> bool:
        return all(c.denominator == 1 for v in self.vertices for c in v)

    def contains(self, u: Sequence) -> bool:
        return all(f.slack(u) >= 0 for f in self.facets)

    def translate(self, t: Sequence) -> "LatticePolytope":
        t = as_vector(t)
        return LatticePolytope(tuple(a + b for a, b in zip(v, t)) for v in self.vertices)

    def dilate(self, c) -> "LatticePolytope":
        c = Fraction(c)
        if c <= 0:
            raise PolytopeError("dilation factor must be positive")
        return LatticePolytope(tuple(c * a for a in v) for v in self.vertices)

    def vertex_facets(self, i: int) -> tuple[int, ...]:
        v = self.vertices[i]
        return tuple(k for k, f in enumerate(self.facets) if f.slack(v) == 0)

    # -- triangulation -------------------------------------------------

    @cached_property
    def _facet_vertex_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(i for i, v in enumerate(self.vertices) if f.slack(v) == 0)
                     for f in self.facets)

    def _affine_dim(self, idx: Iterable[int]) -> int:
        idx = sorted(idx)
        if not idx:
            return -1
        p0 = self.vertices[idx[0]]
        return rank([sub(self.vertices[i], p0) for i in idx[1:]]) if len(idx) > 1 else 0

    def _subfaces(self, face: frozenset, dim: int) -> list[frozenset]:
        cands = {face & fs for fs in self._facet_vertex_sets if not face <= fs}
        cands = [c for c in cands if self._affine_dim(c) == dim - 1]
        return sorted(set(cands), key=sorted)

    def _star(self, face: frozenset, dim: int) -> list[tuple[int, ...]]:
        if dim == 0:
            return [tuple(face)]
        apex = min(face)
        out = []
        for sub_face in self._subfaces(face, dim):
            if apex in sub_face:
                continue
            out.extend((apex,) + s for s in self._star(sub_face, dim - 1))
        return out

    @cached_property
    def triangulation(self) -> tuple[tuple[int, ...], ...]:
        """Star triangulation from the lowest-index vertex, applied recursively to faces."""
        return tuple(self._star(frozenset(range(len(self.vertices))), self.dimension))

    def facet_triangulation(self, k: int) -> tuple[tuple[int, ...], ...]:
        return tuple(self._star(self._facet_vertex_sets[k], self.dimension - 1))

    def _simplex_det(self, simplex: Sequence[int]) -> Fraction:
        v0 = self.vertices[simplex[0]]
        return abs(det([sub(self.vertices[i], v0) for i in simplex[1:]]))


def _hull_facets(pts: list, n: int) -> list[Facet]:
    facets = set()
    if n == 1:
        lo, hi = pts[0][0], pts[-1][0]
        return [Facet((1,), lo), Facet((-1,), -hi)]
    for combo in itertools.combinations(pts, n):
        normal = _normal_of(combo, n)
        if normal is None:
            continue
        a = primitive(normal)
        b = dot(a, combo[0])
        vals = [dot(a, p) - b for p in pts]
        if all(v >= 0 for v in vals):
            facets.add(Facet(a, b))
        elif all(v <= 0 for v in vals):
            facets.add(Facet(tuple(-x for x in a), -b))
    return list(facets)


# -- operations ---------------------------------------------------------------


def normalized_volume(P: LatticePolytope) -> Fraction:
    """``n!`` times the Euclidean volume, i.e. the self-intersection ``L^n``."""
    return sum((P._simplex_det(s) for s in P.triangulation), Fraction(0))


def euclidean_volume(P: LatticePolytope) -> Fraction:
    return normalized_volume(P) / factorial(P.dimension)


@lru_cache(maxsize=512)
def lattice_points(P: LatticePolytope, m: int = 1) -> tuple[tuple[int, ...], ...]:
    """Integer points of the dilate ``mP`` in lexicographic order."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    n = P.dimension
    lo = [ceil(min(v[k] for v in P.vertices) * m) for k in range(n)]
    hi = [floor(max(v[k] for v in P.vertices) * m) for k in range(n)]
    fs = [(f.normal, f.offset * m) for f in P.facets]
    out = []
    for u in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        if all(sum(a_i * u_i for a_i, u_i in zip(a, u)) >= b for a, b in fs):
            out.append(u)
    return tuple(out)


def linear_moment(P: LatticePolytope, xi: Sequence) -> Fraction:
    """Mean of ``<xi, u>`` over P: volume-weighted barycenter values over simplices."""
    xi = as_vector(xi)
    n = P.dimension
    total = Fraction(0)
    weight = Fraction(0)
    for s in P.triangulation:
        w = P._simplex_det(s)
        bary = [sum(P.vertices[i][k] for i in s) / (n + 1) for k in range(n)]
        total += w * dot(xi, bary)
        weight += w
    return total / weight


def support_bounds(P: LatticePolytope, xi: Sequence) -> tuple[Fraction, Fraction]:
    vals = [dot(xi, v) for v in P.vertices]
    return min(vals), max(vals)


def facet_lattice_volume(P: LatticePolytope, k: int) -> Fraction:
    """Normalized lattice volume of facet k, i.e. ``D_k . L^(n-1)``."""
    a = P.facets[k].normal
    norm2 = sum(x * x for x in a)
    total = Fraction(0)
    for s in P.facet_triangulation(k):
        v0 = P.vertices[s[0]]
        rows = [a] + [sub(P.vertices[i], v0) for i in s[1:]]
        total += abs(det(rows)) / norm2
    return total


def normal_fan(P: LatticePolytope) -> FanData:
    """Inner normal fan: rays are facet normals, one maximal cone per vertex."""
    rays = tuple(f.normal for f in P.facets)
    cones = tuple(P.vertex_facets(i) for i in range(len(P.vertices)))
    return FanData(P.dimension, rays, cones)


def polytope_from_fan(fan: FanData, offsets: Sequence) -> LatticePolytope:
    """Rebuild ``{u : <ray_i, u> >= offsets_i}``."""
    return LatticePolytope.from_inequalities(zip(fan.rays, offsets))


# -- convenience constructors --------------------------------------------------


def simplex(n: int, size: int = 1) -> LatticePolytope:
    pts = [tuple(0 for _ in range(n))]
    for k in range(n):
        pts.append(tuple(size if i == k else 0 for i in range(n)))
    return LatticePolytope(pts)


def box(*sides) -> LatticePolytope:
    return LatticePolytope(itertools.product(*((0, s) for s in sides)))
