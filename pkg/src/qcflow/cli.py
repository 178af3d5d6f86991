"""Command line entry point.

Exit codes: 0 success, 1 verdict failure under ``--strict``, 2 bad config or
arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import comparison_experiment, preservation_experiment, relabel_experiment
from .config import ConfigError, ExperimentConfig, format_grid, load_config, parse_grid
from .envelopes import EnvelopeParams, envelope_gap_study, power_envelope, quasiconvex_envelope
from .evolve import EvolveConfig, SchemeError, evolve, radial_evolve
from .fields import GridSpec, ScalarField, read_snapshot, write_snapshot
from .operators import (
    SamplePlan,
    check_ellipticity,
    check_f7,
    check_geometric,
    check_set_monotonicity,
    parse_profile,
)
from .oracles import (
    AffineSigma,
    SubsolutionSpec,
    example_field,
    example_radial_profile,
    make_subsolution,
    optimal_trajectory,
    verify_conditions_I,
    verify_subsolution,
)
from .reports import ViolationReport, _plain

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

INIT_KINDS = {
    "cone": lambda r, x: r + 1.0,
    "smooth_cone": lambda r, x: np.sqrt(r * r + 1.0) + 1.0,
    "sqrt_cone": lambda r, x: np.sqrt(r + 1.0),
    "qc_nonconvex": lambda r, x: np.minimum(2.0 * r, r + 1.0) + 1.0,
    "wshape": lambda r, x: np.minimum(np.abs(x[..., 0] - 1.0), 3.0 * np.abs(x[..., 0] + 1.0)) + 1.0,
    "double_well": lambda r, x: np.minimum((x[..., 0] - 1.0) ** 2, (x[..., 0] + 1.0) ** 2) + 1.0,
}
RELABELS = {
    "sqrt": (np.sqrt, np.square),
    "square": (np.square, np.sqrt),
    "identity": (lambda s: s, lambda s: s),
}


class Run:
    """Collects artifacts for one invocation and writes the manifest."""

    def __init__(self, out: Path, cfg: ExperimentConfig, command: str):
        self.out = out
        self.cfg = cfg
        self.command = command
        self.artifacts: list[str] = []
        self.failed: list[str] = []
        self.started = datetime.now(timezone.utc).isoformat()
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content)

    def json(self, name: str, obj: Any) -> None:
        self.text(name, json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")

    def report(self, name: str, rep: ViolationReport) -> None:
        self.text(name, rep.to_json() + "\n")
        if not rep.passed:
            self.failed.append(name)

    def snapshot(self, name: str, f: ScalarField) -> None:
        write_snapshot(f, self.path(name))

    def manifest(self) -> None:
        entries = [{"path": a, "sha256": hashlib.sha256((self.out / a).read_bytes()).hexdigest()}
                   for a in self.artifacts]
        man = {
            "command": self.command,
            "config": self.cfg.dump(),
            "config_hash": self.cfg.digest(),
            "artifacts": entries,
            "failed_verdicts": self.failed,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        (self.out / "manifest.json").write_text(json.dumps(man, sort_keys=True, indent=2) + "\n")


def _tname(t: float) -> str:
    return f"{t:.6g}"


def initial_field(cfg: ExperimentConfig, grid: GridSpec | None = None) -> ScalarField:
    grid = grid or cfg.grid()
    kind = cfg["init.kind"]
    if kind == "file":
        return read_snapshot(cfg["init.path"])
    if kind not in INIT_KINDS:
        raise ConfigError(f"unknown init.kind {kind!r}; choose from {sorted(INIT_KINDS)} or file")
    x = grid.points()
    r = np.linalg.norm(x, axis=-1)
    return ScalarField(grid, INIT_KINDS[kind](r, x))


def evolve_config(cfg: ExperimentConfig, snapshots=None) -> EvolveConfig:
    try:
        return EvolveConfig(
            t_end=cfg["evolve.t_end"],
            cfl_first=cfg["evolve.cfl_first"],
            cfl_second=cfg["evolve.cfl_second"],
            eps_grad=cfg["evolve.eps_grad"],
            snapshot_times=cfg["evolve.snapshots"] if snapshots is None else snapshots,
            c0=cfg["evolve.c0"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_evolve(run: Run, args) -> None:
    cfg = run.cfg
    u0 = initial_field(cfg)
    traj = evolve(u0, cfg.operator(), cfg.obstacle(), evolve_config(cfg))
    for t, f in traj.snapshots:
        run.snapshot(f"snap_t{_tname(t)}.fld", f)
    run.text("diagnostics.csv", traj.diagnostics_csv())
    run.json("flags.json", {"flags": traj.flags})
    if traj.flags:
        run.failed.append("flags.json")


def cmd_envelope(run: Run, args) -> None:
    cfg = run.cfg
    f = read_snapshot(args.input) if args.input else initial_field(cfg)
    lam = args.lam if args.lam is not None else cfg["envelope.lambda"]
    q = args.q if args.q is not None else cfg["envelope.q"]
    try:
        params = EnvelopeParams(lam=lam, q=q, search=cfg["envelope.search"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    env = power_envelope(f, params) if q is not None else quasiconvex_envelope(f, params)
    out = Path(args.output) if args.output else None
    if out is not None and out.is_absolute():
        write_snapshot(env, out)
    else:
        run.snapshot(args.output or "envelope.fld", env)


def cmd_gap_study(run: Run, args) -> None:
    cfg = run.cfg
    f = initial_field(cfg)
    s = envelope_gap_study(f, cfg["envelope.lambda"], cfg["envelope.q_list"],
                           search=cfg["envelope.search"], fraction=cfg["envelope.fraction"])
    run.text("gap_study.csv", s.to_csv())
    run.json("gap_study.json", {"C": s.C, "fitted_slope": s.fitted_slope, "bound_ok": s.bound_ok,
                                "bound_worst": s.bound_worst, "monotone_ok": s.monotone_ok,
                                "nonnegative_ok": s.nonnegative_ok})
    if not (s.bound_ok and s.monotone_ok and s.nonnegative_ok and -1.3 <= s.fitted_slope <= -0.7):
        run.failed.append("gap_study.json")


def cmd_check_op(run: Run, args) -> None:
    cfg = run.cfg
    op = cfg.operator()
    K = cfg.obstacle()
    dim = cfg.grid().dim
    a_max = K.measure_total if K is not None else math.pi
    plan = SamplePlan(n_samples=cfg["check.n_samples"], dim=dim,
                      r_range=(cfg["check.r_lo"], cfg["check.r_hi"]), p_max=cfg["check.p_max"],
                      a_max=a_max, seed=cfg["seed"])
    run.report("F1.json", check_ellipticity(op, plan))
    run.report("F4.json", check_set_monotonicity(op, plan))
    for beta in cfg["check.beta"]:
        rep = check_f7(op, beta, r_range=plan.r_range, p_max=plan.p_max, n_samples=plan.n_samples,
                       dim=dim, a_max=a_max, seed=plan.seed)
        run.report(f"F7_beta{beta!r}.json", rep)
    if op.geometric:
        run.report("geometric.json", check_geometric(op, plan))


def cmd_preserve(run: Run, args) -> None:
    cfg = run.cfg
    u0 = initial_field(cfg)
    ecfg = evolve_config(cfg)
    res = preservation_experiment(u0, cfg.operator(), cfg.obstacle(), ecfg,
                                  qc_tol=cfg["analysis.qc_tol"], convex_tol=cfg["analysis.convex_tol"])
    for row in res.rows:
        run.report(f"quasiconvexity_t{_tname(row.time)}.json", row.quasiconvexity)
        # nonconvexity is an expected outcome, so it is not a verdict failure
        run.text(f"convexity_t{_tname(row.time)}.json", row.convexity.to_json() + "\n")
    run.text("diagnostics.csv", res.trajectory.diagnostics_csv())


def cmd_compare(run: Run, args) -> None:
    cfg = run.cfg
    u0 = initial_field(cfg)
    v0 = u0.with_values(u0.values + cfg["analysis.shift"])
    worst = comparison_experiment(u0, v0, cfg.operator(), cfg.obstacle(), evolve_config(cfg))
    run.report("compare.json", ViolationReport(worst, 1e-12, [], name="comparison"))


def cmd_relabel(run: Run, args) -> None:
    cfg = run.cfg
    name = cfg["analysis.relabel"]
    if name not in RELABELS:
        raise ConfigError(f"unknown analysis.relabel {name!r}; choose from {sorted(RELABELS)}")
    g, g_inv = RELABELS[name]
    op = cfg.operator()
    if not op.geometric:
        raise ConfigError(f"relabel needs a geometric operator, got {op.name}")
    rep = relabel_experiment(initial_field(cfg), g, g_inv, op, cfg.obstacle(), evolve_config(cfg),
                             cfg["analysis.levels"])
    run.report("relabel.json", rep)


def _sub_spec(cfg: ExperimentConfig) -> tuple[SubsolutionSpec, Any]:
    variant = cfg["oracle.variant"]
    K = cfg.obstacle()
    mK = K.measure_total if K is not None else 0.0
    dim = cfg.grid().dim
    try:
        sigma = AffineSigma(c0=cfg["oracle.c0"])
        if variant == "s51":
            spec = SubsolutionSpec("s51", sigma=sigma, a=cfg["op.a_drift"], b=cfg["op.b"], c=cfg["op.c"],
                                   mK=mK, n=dim, C_scale=cfg["oracle.C_scale"])
        elif variant == "s52":
            spec = SubsolutionSpec("s52", sigma=sigma, V=parse_profile(cfg["op.V"]), mK=mK, n=dim,
                                   C_scale=cfg["oracle.C_scale"])
        else:
            spec = SubsolutionSpec("s53", k=cfg["oracle.k"], R=cfg["oracle.R"], c0=cfg["oracle.c0"],
                                   a_coef=cfg["op.a_coef"], alpha=cfg["op.alpha"], n=dim,
                                   C_scale=cfg["oracle.C_scale"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return spec, make_subsolution(spec)


def cmd_oracle(run: Run, args) -> None:
    cfg = run.cfg
    R, t = cfg["oracle.R"], cfg["oracle.t"]
    which = args.which
    if which == "example51":
        run.snapshot(f"example51_t{_tname(t)}.fld", example_field(cfg.grid(), t, R))
    elif which == "trajectory":
        rs = np.asarray(cfg["oracle.r"])
        lines = ["r,t,gamma,value"]
        for r in rs:
            lines.append(f"{r!r},{t!r},{optimal_trajectory(r, t, R)!r},{example_radial_profile(r, t, R)!r}")
        run.text("trajectory.csv", "\n".join(lines) + "\n")
    elif which == "verify-sub":
        spec, sub = _sub_spec(cfg)
        rep = verify_subsolution(sub, cfg.operator(), cfg.obstacle(), cfg.grid(), cfg["oracle.times"])
        run.report(f"verify_sub_{spec.variant}.json", rep)
    elif which == "verify-I":
        spec, sub = _sub_spec(cfg)
        reps = verify_conditions_I(sub, initial_field(cfg), spec.floor, cfg["oracle.boxes"], cfg["oracle.times"])
        for key, rep in reps.items():
            run.report(f"conditions_I_{key}.json", rep)


def cmd_convergence(run: Run, args) -> None:
    cfg = run.cfg
    R, t = cfg["oracle.R"], cfg["evolve.t_end"]
    mode = cfg["convergence.mode"]
    rows = []
    for N in cfg["convergence.N"]:
        if mode == "radial":
            g = GridSpec((0.0,), (cfg["convergence.r_max"],), (N,))
            phi0 = ScalarField(g, g.axis(0) + 1.0)
            f = radial_evolve(phi0, R, evolve_config(cfg, snapshots=())).final
            err = float(np.max(np.abs(f.values - example_radial_profile(g.axis(0), t, R))))
        elif mode == "2d":
            L = cfg["convergence.r_max"]
            g = GridSpec((-L, -L), (L, L), (N, N))
            u0 = ScalarField(g, np.linalg.norm(g.points(), axis=-1) + 1.0)
            f = evolve(u0, cfg.operator(), cfg.obstacle(), evolve_config(cfg, snapshots=())).final
            err = float(np.max(np.abs(f.values - example_field(g, t, R).values)))
        else:
            raise ConfigError(f"unknown convergence.mode {mode!r}")
        rows.append((N, g.h, err))
    lines = ["N,h,Linf_err,order"]
    for k, (N, h, e) in enumerate(rows):
        order = "" if k == 0 else repr(math.log(rows[k - 1][2] / e) / math.log(rows[k - 1][1] / h))
        lines.append(f"{N},{h!r},{e!r},{order}")
    run.text("convergence.csv", "\n".join(lines) + "\n")


COMMANDS = {
    "evolve": cmd_evolve,
    "envelope": cmd_envelope,
    "gap-study": cmd_gap_study,
    "check-op": cmd_check_op,
    "preserve": cmd_preserve,
    "compare": cmd_compare,
    "relabel": cmd_relabel,
    "oracle": cmd_oracle,
    "convergence": cmd_convergence,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--grid", help="grid as lo:hi:n[,lo:hi:n]")
    common.add_argument("--output-dir", default=".", help="directory for artifacts")
    common.add_argument("--seed", type=int, help="seed for the sampling checkers")
    common.add_argument("--strict", action="store_true", help="exit 1 when any verdict fails")

    p = _Parser(prog="qcflow", description="Monotone schemes and quasiconvexity experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "envelope":
            sp.add_argument("--input", help="snapshot file (default: init field)")
            sp.add_argument("--output", help="output snapshot path")
            sp.add_argument("--lambda", dest="lam", type=float)
            sp.add_argument("--q", type=float)
        if name == "oracle":
            sp.add_argument("which", choices=["example51", "trajectory", "verify-sub", "verify-I"])
            sp.add_argument("--R", type=float)
            sp.add_argument("--t", type=float)
            sp.add_argument("--variant", choices=["s51", "s52", "s53"])
            sp.add_argument("--k", type=float)
    return p


def make_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v)
    if args.grid:
        try:
            cfg.set("grid", format_grid(parse_grid(args.grid)))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad --grid {args.grid!r} ({exc})") from None
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    for flag, key in (("R", "oracle.R"), ("t", "oracle.t"), ("variant", "oracle.variant"), ("k", "oracle.k")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg.set(key, str(v))
    return cfg


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = make_config(args)
        cfg.grid()
        run = Run(Path(args.output_dir), cfg, args.command + (f" {args.which}" if args.command == "oracle" else ""))
        COMMANDS[args.command](run, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    run.manifest()
    if args.strict and run.failed:
        print("verdict failures: " + ", ".join(run.failed), file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
