"""Command-line driver: ``deltaquant --catalog P1:O(2) --task invariants``.

Exit codes: 0 success, 1 inconclusive probe, 2 invalid input or module error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bergman, catalog, functionals
from .invariants import (
    InvariantError,
    PolarizedToricPair,
    alpha_threshold,
    csck_criterion,
    delta_threshold,
    nef_threshold,
    slope_mu,
    stability_report,
)
from .metrics import MetricError, RadialMetric
from .polytope import PolytopeError
from .quadrature import QuadratureError, QuadratureScheme
from .serialize import SCHEMA_VERSION, InputError, ParsedInput, degree_of, dumps, parse_input, rational

TASKS = ("invariants", "quantize", "probe", "convergence")
EXIT_OK, EXIT_INCONCLUSIVE, EXIT_INVALID = 0, 1, 2
CSV_FLOAT = "{:.12g}"

_MODULE_TAGS = (
    (InputError, "cli-harness"),
    (PolytopeError, "polytope-core"),
    (InvariantError, "toric-invariants"),
    (bergman.QuantizationError, "bergman-quant"),
    (functionals.ProbeError, "energy-functionals"),
    (MetricError, "bergman-quant"),
    (QuadratureError, "bergman-quant"),
)


@dataclass(frozen=True)
class JobSpec:
    source: str
    task: str
    m_range: tuple[int, ...] = (1, 2, 3, 4)
    epsilon: float = 0.2
    lambda_grid: tuple[float, ...] | None = None
    tolerance: float = 1e-8
    fmt: str = "json"
    profile: str | None = None
    degree: int | None = None
    s_max: float = 32.0
    sign: int = 1
    kink: float | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise InputError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}", "task")
        if not self.tolerance > 0:
            raise InputError("tolerance must be positive", "tolerance")
        if self.fmt not in ("json", "csv"):
            raise InputError("format must be json or csv", "format")
        if not self.m_range or min(self.m_range) < 1:
            raise InputError("m range must hold positive integers", "m range")
        if self.task == "probe" and not self.lambda_grid:
            raise InputError("probe requires a lambda grid (--lambda-grid)", "lambda grid")
        if self.task == "quantize" and not 0 < self.epsilon < 1:
            raise InputError("epsilon must lie in (0, 1)", "epsilon")


# -- tasks ----------------------------------------------------------------------


def _require_pair(parsed: ParsedInput) -> PolarizedToricPair:
    if parsed.pair is None:
        raise InputError(f"{parsed.source!r} is a metric profile; this task needs a polarized pair",
                         "task input")
    return parsed.pair


def _analytic_setup(parsed: ParsedInput, spec: JobSpec) -> tuple[int, functionals.BoundaryTwist, RadialMetric, str]:
    if parsed.pair is not None:
        if parsed.pair.dimension != 1:
            raise InputError("analytic tasks run on P^1 only", "dimension")
        d = degree_of(parsed.pair)
        theta = functionals.BoundaryTwist.from_pair(parsed.pair)
    else:
        d = parsed.profile.degree
        theta = functionals.BoundaryTwist()
    if spec.profile is not None:
        name = spec.profile
        prof = catalog.profile(name, d)
    elif parsed.profile is not None and parsed.profile.degree == d:
        prof, name = parsed.profile, parsed.profile_name
    else:
        name = "zero"
        prof = RadialMetric.zero(d)
    return d, theta, prof, name


def _task_invariants(pair: PolarizedToricPair, spec: JobSpec) -> dict:
    rep = stability_report(pair, spec.m_range)
    delta = delta_threshold(pair)
    alpha = alpha_threshold(pair)
    out = {
        "delta": rational(rep.delta),
        "delta_minimizer": list(delta.minimizer),
        "alpha": rational(alpha.value),
        "alpha_minimizer": list(alpha.minimizer),
        "ding_stable": rep.ding_stable,
        "delta_m": [{"m": m, "delta_m": rational(v)} for m, v in rep.delta_m],
        "candidates": [
            {"ray": list(c.direction), "A": rational(c.numerator), "S": rational(c.denominator)}
            for c in delta.candidates
        ],
    }
    if pair.fan.is_smooth:
        out["mu"] = rational(slope_mu(pair))
        out["nef_threshold"] = rational(nef_threshold(pair))
        if pair.is_untwisted:
            c = csck_criterion(pair)
            out["csck"] = {"delta": rational(c.delta), "mu": rational(c.mu), "s": rational(c.s),
                           "ample_check": c.ample_check, "inequality_check": c.inequality_check,
                           "verdict": c.verdict}
    return out


def _task_convergence(pair: PolarizedToricPair, spec: JobSpec) -> dict:
    delta = delta_threshold(pair).value
    rows = [{"m": m, "delta_m": rational(delta_threshold(pair, m).value)} for m in spec.m_range]
    return {"delta": rational(delta), "delta_m": rows}


def _task_quantize(parsed: ParsedInput, spec: JobSpec) -> dict:
    d, _, phi, name = _analytic_setup(parsed, spec)
    q = QuadratureScheme(tol=min(1e-12, spec.tolerance))
    ref_energy = bergman.ma_energy(phi, q)
    t_grid = np.linspace(0.0, 1.0, 11)
    zero = RadialMetric.zero(d)
    rows = []
    for m in spec.m_range:
        B = bergman.bergman_projection(phi, m, q)
        ref = bergman.reference_form(d, m, q)
        mp = bergman.max_principle_check(zero, phi, m, t_grid, q)
        dens = bergman.bergman_density(phi, m, q)
        sw = bergman.energy_sandwich_check(phi, spec.epsilon, m, q)
        rows.append({
            "m": m,
            "d_m": B.form.dim,
            "partition_residual": bergman.partition_identity_check(phi, m, q),
            "E_m": bergman.quantized_energy(B, ref),
            "max_principle_min_margin": mp.min_margin,
            "density_deviation_uniform": dens.deviation_uniform,
            "density_deviation_expansion": dens.deviation_expansion,
            "density_mass_residual": dens.mass_residual,
            "sandwich_lower_margin": sw.lower_margin,
            "sandwich_upper_margin": sw.upper_margin,
        })
    sweep = bergman.SandwichReport(spec.epsilon, tuple(
        bergman.SandwichRow(r["m"], r["sandwich_lower_margin"], r["sandwich_upper_margin"]) for r in rows),
        spec.tolerance)
    return {"degree": d, "profile": name, "epsilon": spec.epsilon, "E": ref_energy,
            "empirical_m0": sweep.m0, "levels": rows}


def _task_probe(parsed: ParsedInput, spec: JobSpec) -> tuple[dict, bool]:
    d, theta, phi, name = _analytic_setup(parsed, spec)
    base = None if name == "zero" else phi
    mt = functionals.mt_probe(sign=spec.sign, kink=spec.kink, lambda_grid=spec.lambda_grid,
                              s_max=spec.s_max, degree=d, theta=theta, base=base)
    ent = functionals.entropy_probe(sign=spec.sign, kink=spec.kink, degree=d, theta=theta, base=base)

    def pack(r: functionals.RayProbeResult) -> dict:
        return {
            "estimate": r.estimate,
            "interval": list(r.interval),
            "inconclusive": r.inconclusive,
            "relative_gap": r.relative_gap,
            "notes": list(r.notes),
        }

    out = {
        "degree": d,
        "theta": {"c0": theta.c0, "c_inf": theta.c_inf},
        "base_profile": name,
        "ray": {"sign": spec.sign, "kink": mt.kink},
        "reference_ratio": rational(mt.reference),
        "predicted_threshold": mt.predicted,
        "mt_probe": dict(pack(mt), lambda_grid=list(mt.lambda_grid), slopes=list(mt.slopes),
                         slope_residuals=list(mt.slope_residuals), s_values=list(mt.s_values)),
        "entropy_probe": dict(pack(ent), s_values=list(ent.s_values), ratios=list(ent.ratios)),
    }
    return out, mt.inconclusive or ent.inconclusive


def run_job(spec: JobSpec) -> tuple[dict, int]:
    """Run one job; returns the report and the exit code. Never raises on bad input."""
    report = {"schema_version": SCHEMA_VERSION, "task": spec.task, "input": spec.source}
    try:
        parsed = parse_input(spec.source, spec.degree)
        code = EXIT_OK
        if spec.task == "invariants":
            report.update(_task_invariants(_require_pair(parsed), spec))
        elif spec.task == "convergence":
            report.update(_task_convergence(_require_pair(parsed), spec))
        elif spec.task == "quantize":
            report.update(_task_quantize(parsed, spec))
        else:
            body, inconclusive = _task_probe(parsed, spec)
            report.update(body)
            code = EXIT_INCONCLUSIVE if inconclusive else EXIT_OK
        report["status"] = "inconclusive" if code == EXIT_INCONCLUSIVE else "ok"
        return report, code
    except Exception as exc:  # noqa: BLE001 - mapped to a structured error below
        for cls, tag in _MODULE_TAGS:
            if isinstance(exc, cls):
                report["status"] = "error"
                report["error"] = {"module": tag, "message": str(exc),
                                   "invariant": getattr(exc, "invariant", None)}
                return report, EXIT_INVALID
        if isinstance(exc, KeyError):
            report["status"] = "error"
            report["error"] = {"module": "cli-harness", "message": str(exc), "invariant": None}
            return report, EXIT_INVALID
        raise


# -- plot data --------------------------------------------------------------------


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return CSV_FLOAT.format(v)
    if isinstance(v, str) and "/" in v:
        num, den = v.split("/")
        return CSV_FLOAT.format(int(num) / int(den))
    return v


def emit_plot_data(report: dict) -> dict[str, str]:
    """CSV text per series found in the report.

    Series: ``delta_m`` (m, delta_m); ``sandwich`` (m, lower_margin, upper_margin);
    ``quantize`` (m, partition_residual, max_principle_min_margin, density deviations);
    ``probe_slopes`` (lambda, slope); ``entropy_ratios`` (s, ratio).
    """
    out = {}
    if "delta_m" in report:
        out["delta_m"] = _csv(["m", "delta_m"], [(r["m"], r["delta_m"]) for r in report["delta_m"]])
    if "levels" in report:
        lv = report["levels"]
        out["sandwich"] = _csv(["m", "lower_margin", "upper_margin"],
                               [(r["m"], r["sandwich_lower_margin"], r["sandwich_upper_margin"]) for r in lv])
        out["quantize"] = _csv(
            ["m", "partition_residual", "max_principle_min_margin", "density_deviation_uniform",
             "density_deviation_expansion"],
            [(r["m"], r["partition_residual"], r["max_principle_min_margin"],
              r["density_deviation_uniform"], r["density_deviation_expansion"]) for r in lv])
    if "mt_probe" in report:
        p = report["mt_probe"]
        out["probe_slopes"] = _csv(["lambda", "slope"], zip(p["lambda_grid"], p["slopes"]))
        e = report["entropy_probe"]
        out["entropy_ratios"] = _csv(["s", "ratio"], zip(e["s_values"], e["ratios"]))
    return out


# -- argument parsing ---------------------------------------------------------------


def _m_range(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            a, b = text.split("..")
            return tuple(range(int(a), int(b) + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad m range {text!r}; use 1..10 or 2,4,8") from None


def _grid(text: str) -> tuple[float, ...]:
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return tuple(float(x) for x in np.linspace(float(a), float(b), int(n)))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda grid {text!r}; use 0.1:2:20 or 0.5,1,1.5") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltaquant", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="JSON input document")
    src.add_argument("--catalog", help="catalog key (pair or metric profile)")
    p.add_argument("--task", choices=TASKS, default="invariants")
    p.add_argument("--m-range", type=_m_range, default=(1, 2, 3, 4), help="e.g. 1..10 or 2,4,8")
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--lambda-grid", type=_grid, default=None, help="lo:hi:count or comma list")
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="output file (csv: file stem, one file per series)")
    p.add_argument("--profile", help="metric profile for analytic tasks")
    p.add_argument("--degree", type=int, help="degree d when the input is a bare profile")
    p.add_argument("--s-max", type=float, default=32.0)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1, help="ray toward [0] (+1) or [inf] (-1)")
    p.add_argument("--kink", type=float, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = JobSpec(args.input or args.catalog, args.task, args.m_range, args.epsilon,
                       args.lambda_grid, args.tolerance, args.format, args.profile, args.degree,
                       args.s_max, args.sign, args.kink)
    except InputError as exc:
        report = {"schema_version": SCHEMA_VERSION, "task": args.task, "status": "error",
                  "input": args.input or args.catalog,
                  "error": {"module": "cli-harness", "message": str(exc), "invariant": exc.invariant}}
        sys.stdout.write(dumps(report))
        return EXIT_INVALID
    report, code = run_job(spec)
    if spec.fmt == "json" or code == EXIT_INVALID:
        text = dumps(report)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return code
    series = emit_plot_data(report)
    if args.output:
        stem = Path(args.output)
        for name, body in series.items():
            stem.with_name(f"{stem.stem}_{name}.csv").write_text(body)
    else:
        for name, body in series.items():
            sys.stdout.write(f"# series: {name}\n{body}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
