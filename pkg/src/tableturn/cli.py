"""Command-line entry point.

    tableturn balance   --ground cone:height=0.7071068,radius=1 --ratio 1 --legs 0.75
    tableturn sweep     --ground bumps:seed=1,target=0.7 --samples 256 --out sweep.csv
    tableturn verify    --suite critical-k
    tableturn gallery   --name cone
    tableturn lipschitz --ground radial

Reports are JSON with a fixed key order and floats printed to 17 significant
digits.  Without ``--out`` the report (or CSV) goes to stdout and the human
summary to stderr; with ``--out`` the summary goes to stdout.

Exit codes: 0 success, 1 bad arguments or ground descriptor, 2 a balanced
table that collides with the ground (or a gallery demonstration that did not
come out as expected), 3 no sign change of the hover gap, 4 ground violates
a precondition (discontinuous).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collision import check_real_table, min_leg_length
from .geometry import TableSpec
from .ground import Cone, GroundSpecError, Radial, Ridge, estimate_lipschitz, parse_ground
from .solver import (EVERYWHERE, NO_SIGN_CHANGE, PRECONDITION_FAILED, PreconditionError,
                     balance_by_turning, brute_force_balance, sweep)
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CLEARANCE = 2
EXIT_NO_SIGN_CHANGE = 3
EXIT_PRECONDITION = 4

COMMANDS = ("balance", "sweep", "verify", "gallery", "lipschitz")
GALLERY = ("cliff", "ridge", "cone", "radial")
CSV_HEADER = ("gamma", "t", "phi", "theta", "hover", "center_z")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    ground_spec: str = "flat"
    ratio: float = 1.0
    legs: float = 0.0
    samples: int = 256
    out: Optional[str] = None
    seed: Optional[int] = None
    suite: Optional[str] = None
    name: Optional[str] = None
    budget: int = 1_000_000

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0 < self.ratio <= 1:
            raise UsageError(f"--ratio must lie in (0, 1], got {self.ratio}")
        if not self.legs >= 0:
            raise UsageError(f"--legs must be nonnegative, got {self.legs}")
        if self.samples < 4:
            raise UsageError(f"--samples must be at least 4, got {self.samples}")
        if self.budget < 1:
            raise UsageError(f"--budget must be positive, got {self.budget}")

    @property
    def spec(self) -> TableSpec:
        return TableSpec(self.ratio, self.legs)


# ------------------------------------------------------------------- output

def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with 17-significant-digit floats; NaN and infinities become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(to_json(v, indent + 1) for v in obj) + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


class Output:
    """Routes the machine-readable payload and the human summary."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self.summary_stream = sys.stdout if path else sys.stderr

    def say(self, line: str = ""):
        print(line, file=self.summary_stream)

    def emit(self, text: str):
        if not text.endswith("\n"):
            text += "\n"
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def deg(x: float) -> str:
    return f"{math.degrees(x):.2f} deg"


def pose_dict(report) -> Optional[dict]:
    if report.pose is None:
        return None
    return {
        "azimuth": report.pose.azimuth,
        "diag_param": report.pose.diag_param,
        "tilt": report.pose.tilt,
        "incline": report.incline,
    }


def clearance_dict(cl) -> Optional[dict]:
    if cl is None:
        return None
    return {
        "passed": cl.passed,
        "min_leg_clearance": cl.min_leg_clearance,
        "min_top_clearance": cl.min_top_clearance,
        "certificate_pass": cl.certificate_pass,
        "worst_point": [float(v) for v in cl.worst_point],
        "samples": cl.samples,
    }


def balance_dict(cfg: RunConfig, ground, report, clearance) -> dict:
    return {
        "command": cfg.command,
        "ground": ground.descriptor(),
        "lipschitz_bound": ground.lipschitz_bound,
        "ratio": cfg.ratio,
        "legs": cfg.legs,
        "samples": cfg.samples,
        "status": report.status,
        "pose": pose_dict(report),
        "center_z": report.center_z,
        "residuals": list(report.residuals),
        "max_residual": report.max_residual,
        "sweep_samples": report.sweep_samples,
        "bisection_iters": report.bisection_iters,
        "min_abs_hover": report.min_abs_hover,
        "argmin_gamma": report.argmin_gamma,
        "clearance": clearance_dict(clearance),
        "message": report.message,
        "warnings": list(report.warnings),
    }


# ----------------------------------------------------------------- commands

def _solve(ground, spec: TableSpec, samples: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return balance_by_turning(ground, spec, samples)


def cmd_balance(cfg: RunConfig, out: Output) -> int:
    ground = parse_ground(cfg.ground_spec)
    report = _solve(ground, cfg.spec, cfg.samples)
    clearance = check_real_table(ground, cfg.spec, report) if report.solved else None
    out.emit(to_json(balance_dict(cfg, ground, report, clearance)))
    out.say(f"ground {ground.descriptor()}: {report.status}")
    for note in report.warnings:
        out.say(f"  warning: {note}")
    if report.status == PRECONDITION_FAILED:
        out.say(f"  {report.message}")
        return EXIT_PRECONDITION
    if report.status == NO_SIGN_CHANGE:
        out.say(f"  {report.message}; min |h| = {report.min_abs_hover:.3e} "
                f"at gamma = {report.argmin_gamma:.6f} rad")
        return EXIT_NO_SIGN_CHANGE
    if report.status == EVERYWHERE:
        out.say("  hover gap vanishes at every sample: balanced everywhere, gamma = 0 returned")
    p = report.pose
    out.say(f"  gamma = {p.azimuth:.10f} rad ({deg(p.azimuth)}), t = {p.diag_param:.10f}, "
            f"theta = {p.tilt:.10f} rad ({deg(p.tilt)}), incline {deg(report.incline)}")
    out.say(f"  max |residual| = {report.max_residual:.3e}, center z = {report.center_z:.10f}")
    verdict = "pass" if clearance.passed else "FAIL"
    out.say(f"  real table with legs {cfg.legs:g}: {verdict} (leg clearance "
            f"{clearance.min_leg_clearance:.3e}, top clearance {clearance.min_top_clearance:.3e}, "
            f"certificate {'pass' if clearance.certificate_pass else 'fail'})")
    if cfg.legs < min_leg_length(cfg.ratio):
        out.say(f"  note: legs shorter than 1/sqrt(1+r^2) = {min_leg_length(cfg.ratio):.7f}")
    return EXIT_OK if clearance.passed else EXIT_CLEARANCE


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([fmt_float(v) for v in row])
    return buf.getvalue()


def cmd_sweep(cfg: RunConfig, out: Output) -> int:
    ground = parse_ground(cfg.ground_spec)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = sweep(ground, cfg.spec, cfg.samples)
    except PreconditionError as exc:
        out.say(f"precondition failed: {exc}")
        return EXIT_PRECONDITION
    out.emit(sweep_csv(rows))
    hover = np.array([r.hover for r in rows])
    failed = int(np.count_nonzero(~np.isfinite(hover)))
    finite = hover[np.isfinite(hover)]
    out.say(f"ground {ground.descriptor()}: {len(rows)} rows, {failed} failed")
    if finite.size and np.all(np.abs(finite) <= 1e-11) and not failed:
        out.say("hover gap vanishes at every sample: balanced everywhere")
    elif finite.size:
        s = np.sign(finite[finite != 0])
        changes = int(np.count_nonzero(s[1:] != s[:-1]))
        out.say(f"hover range [{finite.min():.6g}, {finite.max():.6g}], {changes} sign changes")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Output) -> int:
    if cfg.suite not in SUITES:
        raise UsageError(f"unknown suite {cfg.suite!r}; choose from {', '.join(SUITES)}")
    checks = run_suite(cfg.suite)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    if cfg.out:
        Output(cfg.out).emit(to_json({
            "command": "verify",
            "suite": cfg.suite,
            "passed": ok,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
        }))
    print(f"suite {cfg.suite}: {sum(c.passed for c in checks)}/{len(checks)} passed")
    return EXIT_OK if ok else EXIT_CLEARANCE


def _gallery_cliff(cfg: RunConfig, out: Output):
    ground = parse_ground("cliff")
    spec = TableSpec(1.0)
    report = _solve(ground, spec, cfg.samples)
    bf = brute_force_balance(ground, spec, budget=cfg.budget)
    expected = report.status == PRECONDITION_FAILED and bf.objective > 0.1
    out.say(f"turning solver: {report.status} ({report.message})")
    out.say(f"brute force, budget {cfg.budget}: min objective {bf.objective:.6g} after "
            f"{bf.evaluations} evaluations")
    if bf.objective > 0.1:
        out.say("no balance; min residual > 0.1")
    else:
        out.say("no exact balance, but a near-balance: a slightly tilted square with one "
                "vertex on a quadrant edge puts all four legs on the same level")
    return expected, {
        "solver_status": report.status,
        "brute_force_objective": bf.objective,
        "brute_force_pose": {"azimuth": bf.azimuth, "incline": bf.incline, "tilt": bf.tilt,
                             "center_z": bf.center_z},
        "evaluations": bf.evaluations,
    }


def _gallery_ridge(cfg: RunConfig, out: Output):
    ground = Ridge(0.9)
    spec = TableSpec(1.0, 0.1)
    report = _solve(ground, spec, cfg.samples)
    if not report.solved:
        out.say(f"turning solver: {report.status}")
        return False, {"solver_status": report.status}
    cl = check_real_table(ground, spec, report)
    out.say(f"ridge slope 0.9 > 1/sqrt(2): balanced at gamma = {report.pose.azimuth:.6f} rad "
            f"({deg(report.pose.azimuth)}), max |residual| {report.max_residual:.2e}")
    out.say(f"legs 0.1: top clearance {cl.min_top_clearance:.6f}; the top digs into the crest")
    return not cl.passed, {"solver_status": report.status, "pose": pose_dict(report),
                           "clearance": clearance_dict(cl)}


def _gallery_cone(cfg: RunConfig, out: Output):
    ground = Cone(1 / math.sqrt(2), 1.0)
    spec = TableSpec(1.0)
    report = _solve(ground, spec, cfg.samples)
    L = min_leg_length(1.0)
    at = check_real_table(ground, spec.with_legs(L), report)
    below = check_real_table(ground, spec.with_legs(L - 0.01), report)
    out.say(f"cone of slope 1/sqrt(2) = {1 / math.sqrt(2):.7f} "
            f"({deg(math.atan(1 / math.sqrt(2)))}): {report.status}")
    out.say(f"legs 1/sqrt(2): {'pass' if at.passed else 'FAIL'}, top clearance "
            f"{at.min_top_clearance:.3e}")
    out.say(f"legs 1/sqrt(2) - 0.01: {'pass' if below.passed else 'FAIL'}, top clearance "
            f"{below.min_top_clearance:.6f}")
    expected = at.passed and not below.passed
    return expected, {"solver_status": report.status, "pose": pose_dict(report),
                      "at_min_legs": clearance_dict(at), "below_min_legs": clearance_dict(below)}


def _gallery_radial(cfg: RunConfig, out: Output):
    ground = Radial()
    spec = TableSpec(1.0)
    rows = sweep(ground, spec, cfg.samples)
    hmax = max(abs(r.hover) for r in rows)
    report = _solve(ground, spec, cfg.samples)
    out.say(f"{ground.descriptor()}: max |h| over {len(rows)} azimuths = {hmax:.3e}")
    out.say(f"hover gap = 0 everywhere; solver status {report.status}")
    return report.status == EVERYWHERE, {"solver_status": report.status, "max_abs_hover": hmax,
                                         "pose": pose_dict(report)}


def cmd_gallery(cfg: RunConfig, out: Output) -> int:
    demos = {"cliff": _gallery_cliff, "ridge": _gallery_ridge, "cone": _gallery_cone,
             "radial": _gallery_radial}
    if cfg.name not in demos:
        raise UsageError(f"unknown gallery ground {cfg.name!r}; choose from {', '.join(GALLERY)}")
    expected, payload = demos[cfg.name](cfg, out)
    out.emit(to_json({"command": "gallery", "name": cfg.name, "expected_outcome": expected,
                      **payload}))
    return EXIT_OK if expected else EXIT_CLEARANCE


def cmd_lipschitz(cfg: RunConfig, out: Output) -> int:
    ground = parse_ground(cfg.ground_spec)
    seed = 0 if cfg.seed is None else cfg.seed
    n = cfg.samples
    est = estimate_lipschitz(ground, n=n, seed=seed)
    k = ground.lipschitz_bound
    out.emit(to_json({"command": "lipschitz", "ground": ground.descriptor(), "lipschitz_bound": k,
                      "estimate": est, "pairs": n, "seed": seed, "continuous": ground.continuous}))
    bound = "unknown" if k is None else f"{k:.10g}"
    out.say(f"{ground.descriptor()}: declared bound {bound}, sampled lower bound {est:.10g} "
            f"({n} pairs on [-2,2]^2)")
    if k is not None:
        out.say("within the critical 1/sqrt(2)" if k <= 1 / math.sqrt(2) + 1e-7
                else "exceeds the critical 1/sqrt(2)")
    return EXIT_OK


HANDLERS = {"balance": cmd_balance, "sweep": cmd_sweep, "verify": cmd_verify,
            "gallery": cmd_gallery, "lipschitz": cmd_lipschitz}


# ------------------------------------------------------------------ parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tableturn", description="Balance a table on uneven ground by turning it.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, ground=True, table=True, samples=256):
        if ground:
            p.add_argument("--ground", default="flat", help="ground descriptor, e.g. cone:height=0.7071068")
        if table:
            p.add_argument("--ratio", type=float, default=1.0, help="short side / long side, in (0, 1]")
            p.add_argument("--legs", type=float, default=0.0, help="leg length L >= 0")
        p.add_argument("--samples", type=int, default=samples,
                       help="azimuth samples, or sample pairs for lipschitz (>= 4)")
        p.add_argument("--out", help="write the report or CSV here")
        p.add_argument("--seed", type=int)

    common(sub.add_parser("balance", help="balance a table by turning"))
    common(sub.add_parser("sweep", help="CSV of equal hovering positions over a half-turn"))
    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, help=", ".join(SUITES))
    common(p, ground=False, table=False)
    p = sub.add_parser("gallery", help="canonical demonstrations")
    p.add_argument("--name", required=True, help=", ".join(GALLERY))
    p.add_argument("--budget", type=int, default=1_000_000, help="brute-force evaluations (cliff)")
    common(p, ground=False, table=False)
    common(sub.add_parser("lipschitz", help="declared and sampled Lipschitz constants"), table=False,
           samples=10_000)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        ground_spec=getattr(ns, "ground", "flat"),
        ratio=getattr(ns, "ratio", 1.0),
        legs=getattr(ns, "legs", 0.0),
        samples=ns.samples,
        out=ns.out,
        seed=ns.seed,
        suite=getattr(ns, "suite", None),
        name=getattr(ns, "name", None),
        budget=getattr(ns, "budget", 1_000_000),
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(build_parser().parse_args(argv))
        return HANDLERS[cfg.command](cfg, Output(cfg.out))
    except (UsageError, GroundSpecError, OSError) as exc:
        print(f"tableturn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
