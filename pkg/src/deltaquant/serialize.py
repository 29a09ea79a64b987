"""JSON input documents and report serialization.

Input document::

    {
      "polytope": [[0, 0], [1, 0], [0, 1]],
      "fan": {"rays": [[1, 0], [0, 1], [-1, -1]], "cones": [[0, 1], [1, 2], [0, 2]]},
      "boundary": [{"ray": [1, 0], "coefficient": "1/2"}],
      "metric_profile": "bump"
    }

``fan``, ``boundary`` and ``metric_profile`` are optional. Coordinates and
coefficients are integers or ``"p/q"`` strings. A metric profile is a catalog
name, or ``{"samples": [[x, phi], ...], "asymptotics": [a, b]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import catalog
from .invariants import InvariantError, PolarizedToricPair
from .metrics import MetricError, RadialMetric
from .polytope import FanData, LatticePolytope, PolytopeError

SCHEMA_VERSION = "1.0"


class InputError(ValueError):
    """Malformed input document; ``invariant`` names what was violated."""

    def __init__(self, message: str, invariant: str = "input"):
        super().__init__(message)
        self.invariant = invariant


def rational(x) -> str:
    """Exact ``"p/q"`` form used in every JSON report (``2`` becomes ``"2/1"``)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(v) -> Fraction:
    if isinstance(v, bool):
        raise InputError(f"expected a rational number, got {v!r}")
    if isinstance(v, float):
        # Decimal literals are accepted exactly as written.
        return Fraction(repr(v))
    try:
        return Fraction(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise InputError(f"expected a rational number, got {v!r}") from None


def _vector(v) -> tuple[Fraction, ...]:
    if not isinstance(v, (list, tuple)) or not v:
        raise InputError(f"expected a coordinate list, got {v!r}")
    return tuple(parse_rational(c) for c in v)


def _int_vector(v) -> tuple[int, ...]:
    out = _vector(v)
    if any(c.denominator != 1 for c in out):
        raise InputError(f"ray {v!r} must have integer entries", "ray integrality")
    return tuple(int(c) for c in out)


@dataclass(frozen=True)
class ParsedInput:
    source: str
    pair: PolarizedToricPair | None = None
    profile: RadialMetric | None = None
    profile_name: str | None = None


def pair_from_document(doc: dict) -> PolarizedToricPair:
    if not isinstance(doc, dict) or "polytope" not in doc:
        raise InputError("document must contain a 'polytope' vertex list")
    try:
        P = LatticePolytope.from_points([_vector(v) for v in doc["polytope"]])
    except PolytopeError as exc:
        raise InputError(f"inconsistent polytope: {exc}", "polytope") from exc
    if not P.is_lattice:
        raise InputError("polytope vertices must be lattice points", "lattice polytope")
    fan = None
    if doc.get("fan") is not None:
        f = doc["fan"]
        try:
            rays = tuple(_int_vector(r) for r in f["rays"])
            cones = tuple(tuple(int(i) for i in c) for c in f["cones"])
            fan = FanData(P.dimension, rays, cones)
        except (KeyError, TypeError) as exc:
            raise InputError(f"fan needs 'rays' and 'cones': {exc}", "fan") from exc
        except PolytopeError as exc:
            raise InputError(f"invalid fan: {exc}", "fan") from exc
        if not fan.is_smooth:
            raise InputError("requires smooth cone: fan has a non-smooth maximal cone", "smooth cone")
    boundary = {}
    for item in doc.get("boundary") or []:
        try:
            ray, c = _int_vector(item["ray"]), parse_rational(item["coefficient"])
        except (KeyError, TypeError) as exc:
            raise InputError("boundary entries need 'ray' and 'coefficient'", "boundary") from exc
        if c >= 1:
            raise InputError(f"klt violated: coefficient {rational(c)} on ray {list(ray)} is >= 1",
                             "klt")
        boundary[ray] = c
    try:
        pair = PolarizedToricPair.build(P, boundary)
        if fan is not None:
            pair = PolarizedToricPair(P, pair.boundary, fan)
    except InvariantError as exc:
        raise InputError(str(exc), "pair") from exc
    return pair


def profile_from_document(spec, degree: int) -> tuple[RadialMetric, str]:
    if isinstance(spec, str):
        try:
            return catalog.profile(spec, degree), spec
        except catalog.CatalogError as exc:
            raise InputError(str(exc), "metric profile") from exc
    if isinstance(spec, dict) and "samples" in spec:
        try:
            xs, vs = np.asarray(spec["samples"], dtype=float).T
            asym = spec.get("asymptotics")
            prof = RadialMetric.from_samples(degree, xs, vs, asymptotics=asym, label="file")
        except (ValueError, TypeError) as exc:
            raise InputError(f"bad profile samples: {exc}", "metric profile") from exc
        except MetricError as exc:
            raise InputError(f"profile not admissible: {exc}", "metric profile") from exc
        return prof, "samples"
    raise InputError("metric_profile must be a name or a samples object", "metric profile")


def degree_of(pair: PolarizedToricPair) -> int:
    lo, hi = sorted(v[0] for v in pair.polytope.vertices)
    return int(hi - lo)


def parse_input(source: str, degree: int | None = None) -> ParsedInput:
    """Catalog key, profile name, or path to a JSON document."""
    if source in catalog.PROFILE_NAMES:
        d = degree or 1
        return ParsedInput(source, profile=catalog.profile(source, d), profile_name=source)
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise InputError(f"input file {source!r} not found", "file") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}", "json") from exc
        pair = pair_from_document(doc)
        prof = name = None
        if doc.get("metric_profile") is not None:
            if pair.dimension != 1:
                raise InputError("metric profiles are only defined on P^1", "metric profile")
            prof, name = profile_from_document(doc["metric_profile"], degree_of(pair))
        return ParsedInput(source, pair, prof, name)
    try:
        return ParsedInput(source, pair=catalog.pair(source))
    except catalog.CatalogError as exc:
        raise InputError(str(exc), "catalog key") from exc
    except InvariantError as exc:
        raise InputError(str(exc), "pair") from exc


def pair_to_document(pair: PolarizedToricPair, include_fan: bool = False) -> dict:
    doc = {"polytope": [[rational(c) for c in v] for v in pair.polytope.vertices]}
    if include_fan:
        doc["fan"] = {"rays": [list(r) for r in pair.fan.rays],
                      "cones": [list(c) for c in pair.fan.cones]}
    doc["boundary"] = [{"ray": list(r), "coefficient": rational(c)}
                       for r, c in zip(pair.fan.rays, pair.boundary) if c != 0]
    return doc


def _finite(obj):
    """Replace non-finite floats by ``None`` so reports stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_finite(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
