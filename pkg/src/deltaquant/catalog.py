"""Named examples: polarized toric pairs and radial metric profiles.

Pair keys look like ``P1:O(2)``, ``P1xP1:O(1,2)`` or ``F1``. A boundary twist is
appended as ``+c[ray]``, where ``ray`` is ``0`` (the ray ``+1`` on ``P^1``),
``inf`` (the ray ``-1``) or an explicit comma-separated ray vector, e.g.
``P1:O(2)+1/2[0]`` or ``P2:O(1)+1/4[1,0]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .invariants import InvariantError, PolarizedToricPair
from .metrics import PROFILE_NAMES, RadialMetric, named_profile
from .polytope import LatticePolytope, box, simplex


class CatalogError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown catalog key"


def _p1(d: int) -> LatticePolytope:
    return simplex(1, d)


def _f1() -> LatticePolytope:
    # Hirzebruch F_1 with the class of this trapezoid: rays (1,0), (0,1), (-1,1), (0,-1).
    return LatticePolytope([(0, 0), (2, 0), (3, 1), (0, 1)])


_BASE = {
    "P1:O(1)": lambda: _p1(1),
    "P1:O(2)": lambda: _p1(2),
    "P1:O(3)": lambda: _p1(3),
    "P2:O(1)": lambda: simplex(2, 1),
    "P2:O(3)": lambda: simplex(2, 3),
    "P1xP1:O(1,1)": lambda: box(1, 1),
    "P1xP1:O(1,2)": lambda: box(1, 2),
    "F1": _f1,
}

TWISTED_EXAMPLES = (
    "P1:O(1)+1/4[0]",
    "P1:O(2)+1/4[0]",
    "P1:O(2)+1/2[0]",
    "P1:O(2)+1/2[inf]",
    "P2:O(1)+1/4[1,0]",
    "P2:O(1)+1/2[1,0]",
)

PAIR_KEYS = tuple(_BASE) + TWISTED_EXAMPLES

_TWIST = re.compile(r"\+\s*(?P<c>[0-9/.]+)\s*\[(?P<ray>[^\]]+)\]")


def _parse_ray(text: str, n: int) -> tuple[int, ...]:
    text = text.strip()
    if text == "0":
        return (1,) if n == 1 else _bad_ray(text)
    if text == "inf":
        return (-1,) if n == 1 else _bad_ray(text)
    try:
        ray = tuple(int(x) for x in text.split(","))
    except ValueError:
        return _bad_ray(text)
    if len(ray) != n:
        return _bad_ray(text)
    return ray


def _bad_ray(text):
    raise CatalogError(f"cannot read ray {text!r}")


def pair(key: str) -> PolarizedToricPair:
    """Build the pair named by ``key`` (base key plus optional twists)."""
    m = re.match(r"^\s*([^+]+?)\s*(\+.*)?$", key)
    base = m.group(1) if m else key
    if base not in _BASE:
        raise CatalogError(f"unknown catalog key {key!r}")
    P = _BASE[base]()
    rest = m.group(2) or ""
    boundary = {}
    for tw in _TWIST.finditer(rest):
        boundary[_parse_ray(tw.group("ray"), P.dimension)] = Fraction(tw.group("c"))
    if _TWIST.sub("", rest).strip():
        raise CatalogError(f"cannot parse boundary in {key!r}")
    return PolarizedToricPair.build(P, boundary)


def is_pair_key(key: str) -> bool:
    try:
        pair(key)
    except (CatalogError, InvariantError):
        return False
    return True


def profile(name: str, degree: int) -> RadialMetric:
    if name not in PROFILE_NAMES:
        raise CatalogError(f"unknown metric profile {name!r}")
    return named_profile(name, degree)


@dataclass(frozen=True)
class CatalogEntry:
    key: str
    kind: str  # "pair" or "profile"
    dimension: int | None = None


def entries() -> list[CatalogEntry]:
    out = [CatalogEntry(k, "pair", pair(k).dimension) for k in PAIR_KEYS]
    out += [CatalogEntry(name, "profile") for name in PROFILE_NAMES]
    return out
