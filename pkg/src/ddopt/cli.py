"""Command-line front end.

Subcommands: simulate, optimize, sweep, landscape, compare, heff, fit,
replay.  Units at this boundary are rad/ns for J and beta, ns for times;
the dimensionless products (J tau_d, beta tau_d, epsilon) are echoed in
the output for sanity.

Every command writes a manifest next to its outputs with the fully
resolved configuration; ``ddopt replay manifest.json --out DIR``
re-executes it and reproduces the outputs byte for byte at any --jobs.
All randomness flows from --seed; nothing reads entropy from the clock or
the environment.  Exit codes: 0 success, 2 usage/config error, 3 numerical
failure (log branch ambiguity).  DDOPT_OUTDIR overrides the default
output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ga import FitnessContext, config_from_json, config_to_json, history_csv, run_ga
from .linalg import BranchAmbiguityError
from .metrics import (
    decoupling_order,
    distance_report,
    effective_error_hamiltonian,
    fit_scaling,
)
from .model import BathSpec, PulseModel, build_model
from .sequences import cyclic_ok, make_named, sequence_from_text, sequence_to_text, propagate
from .sweep import (
    SweepPlan,
    compare,
    compare_csv,
    fit_csv,
    landscape_2d,
    landscape_csv,
    sweep_1d,
    sweep_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class CLIError(Exception):
    """Invalid configuration or arguments (exit code 2)."""


def _outdir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("DDOPT_OUTDIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def _json_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _manifest(outdir: Path, command: str, config: dict, seed: int, outputs: list[str],
              t_start: float):
    doc = {
        "command": command,
        "config": config,
        "version": __version__,
        "seed": seed,
        "outputs": sorted(outputs),
        "wall_clock_s": time.time() - t_start,
    }
    _write(outdir / "manifest.json", _json_dumps(doc))


def _pulse_model_from(args) -> PulseModel:
    kind = args.model
    try:
        return PulseModel(
            kind=kind,
            tau_p=args.tau_p if kind in ("finite-width", "finite-width-flip-angle") else None,
            epsilon=args.epsilon if kind in ("flip-angle", "finite-width-flip-angle") else None,
        )
    except ValueError as exc:
        raise CLIError(str(exc)) from exc


def _load_sequence(args):
    if getattr(args, "seq_file", None):
        text = Path(args.seq_file).read_text(encoding="utf-8")
        try:
            seq = sequence_from_text(text, name=Path(args.seq_file).name)
        except ValueError as exc:
            raise CLIError(str(exc)) from exc
    elif getattr(args, "seq", None):
        try:
            seq = make_named(args.seq, tau_d=args.tau_d)
        except ValueError as exc:
            raise CLIError(str(exc)) from exc
    else:
        raise CLIError("one of --seq or --seq-file is required")
    if not cyclic_ok(seq):
        raise CLIError(
            f"sequence {seq.name!r} violates the cyclic DD condition "
            "(ideal pulse product is not proportional to the identity)")
    return seq


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    t0 = time.time()
    seq = _load_sequence(args)
    model = _pulse_model_from(args)
    spec = BathSpec(n_spins=args.n_spins, seed=args.seed, J=args.J, beta=args.beta)
    sys_model = build_model(spec)
    u, tau_c = propagate(seq, sys_model, model)
    report = distance_report(u, tau_c)
    outdir = _outdir(args)
    doc = {
        "sequence": seq.name or args.seq,
        "model": model.kind,
        "J": args.J, "beta": args.beta, "tau_d": args.tau_d,
        "tau_p": model.tau_p, "epsilon": model.epsilon,
        "J_tau_d": args.J * args.tau_d, "beta_tau_d": args.beta * args.tau_d,
        "seed": args.seed, "n_spins": args.n_spins,
        "D": report.D, "q": report.q, "tau_c": report.tau_c,
        "n_pulses": seq.n_pulses,
    }
    _write(outdir / "distance.json", _json_dumps(doc))
    config = {k: doc[k] for k in ("sequence", "model", "J", "beta", "tau_d", "tau_p",
                                  "epsilon", "seed", "n_spins")}
    config["seq"] = args.seq
    config["seq_text"] = sequence_to_text(seq)
    _manifest(outdir, "simulate", config, args.seed, ["distance.json"], t0)
    print(f"D = {report.D:.6g}")
    print(f"q = {report.q:.6g}")
    print(f"tau_c = {report.tau_c:.6g} ns")
    return EXIT_OK


def cmd_optimize(args) -> int:
    t0 = time.time()
    try:
        cfg = config_from_json(Path(args.config).read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise CLIError(f"bad GA config: {exc}") from exc
    ctx = FitnessContext(cfg)
    result = run_ga(cfg, ctx)
    outdir = _outdir(args)
    _write(outdir / "history.csv", history_csv(result))
    ledger_line = (f"{result.best_fitness!r}\t{sequence_to_text(result.best_sequence)}\n")
    ledger = outdir / "best_sequences.txt"
    with open(ledger, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(ledger_line)
    _write(outdir / "result.json", _json_dumps({
        "best_fitness": result.best_fitness,
        "best_sequence": sequence_to_text(result.best_sequence),
        "level_best": result.level_best,
    }))
    _manifest(outdir, "optimize", json.loads(config_to_json(cfg)), cfg.seed,
              ["history.csv", "result.json", "best_sequences.txt"], t0)
    print(f"best q = {result.best_fitness:.6g}")
    print(f"best sequence: {' '.join(result.best_sequence.labels())}")
    return EXIT_OK


def _plan_from_doc(doc: dict) -> SweepPlan:
    try:
        return SweepPlan(
            sequences=tuple(doc["sequences"]),
            model_kind=doc.get("model", "ideal"),
            axis=doc.get("axis", "tau_d"),
            grid=tuple(doc.get("grid", ())),
            axis2=doc.get("axis2"),
            grid2=tuple(doc.get("grid2", ())),
            J=doc.get("J", 1e-3), beta=doc.get("beta", 1e-6),
            tau_d=doc.get("tau_d", 0.1), tau_p=doc.get("tau_p"),
            epsilon=doc.get("epsilon"), fixed_tau_c=doc.get("fixed_tau_c"),
            n_spins=doc.get("n_spins", 4), n_seeds=doc.get("n_seeds", 10),
            seed0=doc.get("seed0", 0), precision=doc.get("precision", "double"),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise CLIError(f"bad sweep plan: {exc}") from exc


def _plan_doc(plan: SweepPlan) -> dict:
    return {
        "sequences": list(plan.sequences), "model": plan.model_kind,
        "axis": plan.axis, "grid": list(plan.grid),
        "axis2": plan.axis2, "grid2": list(plan.grid2),
        "J": plan.J, "beta": plan.beta, "tau_d": plan.tau_d,
        "tau_p": plan.tau_p, "epsilon": plan.epsilon,
        "fixed_tau_c": plan.fixed_tau_c, "n_spins": plan.n_spins,
        "n_seeds": plan.n_seeds, "seed0": plan.seed0, "precision": plan.precision,
    }


def _safe_name(seq_spec: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in seq_spec)


def cmd_sweep(args) -> int:
    t0 = time.time()
    plan = _plan_from_doc(json.loads(Path(args.plan).read_text(encoding="utf-8")))
    tables = sweep_1d(plan, jobs=args.jobs)
    outdir = _outdir(args)
    outputs = []
    for seq_spec, rows in tables.items():
        fname = f"sweep_{_safe_name(seq_spec)}.csv"
        _write(outdir / fname, sweep_csv(rows))
        outputs.append(fname)
    _manifest(outdir, "sweep", _plan_doc(plan), plan.seed0, outputs, t0)
    print(f"wrote {len(outputs)} sweep table(s) to {outdir}")
    return EXIT_OK


def cmd_landscape(args) -> int:
    t0 = time.time()
    plan = _plan_from_doc(json.loads(Path(args.plan).read_text(encoding="utf-8")))
    rows = landscape_2d(plan, jobs=args.jobs)
    outdir = _outdir(args)
    _write(outdir / "landscape.csv", landscape_csv(rows))
    _manifest(outdir, "landscape", _plan_doc(plan), plan.seed0, ["landscape.csv"], t0)
    print(f"wrote landscape.csv to {outdir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    t0 = time.time()
    if not args.seq:
        raise CLIError("compare needs at least one --seq")
    model = _pulse_model_from(args)
    plan = SweepPlan(sequences=tuple(args.seq), model_kind=model.kind,
                     axis="tau_d", grid=(args.tau_d,),
                     J=args.J, beta=args.beta, tau_d=args.tau_d,
                     tau_p=model.tau_p, epsilon=model.epsilon,
                     fixed_tau_c=args.tau_c, n_spins=args.n_spins,
                     n_seeds=args.n_seeds, seed0=args.seed,
                     precision=args.precision)
    rows = compare(tuple(args.seq), plan, jobs=args.jobs)
    outdir = _outdir(args)
    _write(outdir / "compare.csv", compare_csv(rows))
    _manifest(outdir, "compare", _plan_doc(plan), args.seed, ["compare.csv"], t0)
    for r in rows:
        print(f"{r['sequence']}: D = {r['D']:.6g} ({r['pulses']} pulses, "
              f"tau_c = {r['tau_c']:.6g} ns)")
    return EXIT_OK


def cmd_heff(args) -> int:
    t0 = time.time()
    seq = _load_sequence(args)
    model = _pulse_model_from(args)
    spec = BathSpec(n_spins=args.n_spins, seed=args.seed, J=args.J, beta=args.beta)
    sys_model = build_model(spec)
    u, tau_c = propagate(seq, sys_model, model)
    report = effective_error_hamiltonian(u, tau_c, sys_model.d_s, sys_model.d_b)
    outdir = _outdir(args)
    doc = {
        "sequence": seq.name or args.seq, "model": model.kind,
        "J": args.J, "beta": args.beta, "tau_d": args.tau_d,
        "tau_p": model.tau_p, "epsilon": model.epsilon,
        "seed": args.seed, "n_spins": args.n_spins, "tau_c": tau_c,
        "channel_norms": report.channel_norms,
        "bath_norm": report.bath_norm,
        "err_norm": report.err_norm,
    }
    _write(outdir / "heff.json", _json_dumps(doc))
    config = dict(doc)
    config.pop("channel_norms"), config.pop("bath_norm"), config.pop("err_norm")
    config["seq"] = args.seq
    config["seq_text"] = sequence_to_text(seq)
    _manifest(outdir, "heff", config, args.seed, ["heff.json"], t0)
    for mu in ("x", "y", "z"):
        print(f"||B_{mu}|| = {report.channel_norms[mu]:.6g} rad/ns")
    print(f"||H_B|| = {report.bath_norm:.6g} rad/ns")
    print(f"||H_err|| = {report.err_norm:.6g} rad/ns")
    return EXIT_OK


def cmd_fit(args) -> int:
    t0 = time.time()
    path = Path(args.csv)
    points = []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CLIError(f"{path} is empty")
    header = lines[0].split(",")
    try:
        xi, di = header.index("x"), header.index("D_mean")
    except ValueError as exc:
        raise CLIError(f"{path} lacks x/D_mean columns") from exc
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) <= max(xi, di) or not cells[di]:
            continue
        points.append((float(cells[xi]), float(cells[di])))
    try:
        fit = fit_scaling(points)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    outdir = _outdir(args)
    doc = {"slope": fit.slope, "intercept": fit.intercept,
           "r_squared": fit.r_squared, "n_points": fit.n_points,
           "source": path.name}
    _write(outdir / "fit.json", _json_dumps(doc))
    _write(outdir / "fit.csv", fit_csv(fit))
    _manifest(outdir, "fit", {"csv": str(path)}, 0, ["fit.csv", "fit.json"], t0)
    print(f"slope = {fit.slope:.6g}  intercept = {fit.intercept:.6g}  "
          f"r^2 = {fit.r_squared:.6g}  ({fit.n_points} points)")
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    command = manifest["command"]
    config = manifest["config"]
    out = args.out or str(Path(args.manifest).parent)
    jobs = args.jobs

    if command == "simulate":
        ns = argparse.Namespace(
            seq=config.get("seq"), seq_file=None, model=config["model"],
            J=config["J"], beta=config["beta"], tau_d=config["tau_d"],
            tau_p=config.get("tau_p"), epsilon=config.get("epsilon"),
            seed=config["seed"], n_spins=config["n_spins"], out=out)
        if not ns.seq:
            ns.seq = None
            seq = sequence_from_text(config["seq_text"], name=config["sequence"])
            tmp = Path(out) / "_replay.seq"
            tmp.parent.mkdir(parents=True, exist_ok=True)
            _write(tmp, sequence_to_text(seq))
            ns.seq_file = str(tmp)
        return cmd_simulate(ns)
    if command == "heff":
        ns = argparse.Namespace(
            seq=config.get("seq"), seq_file=None, model=config["model"],
            J=config["J"], beta=config["beta"], tau_d=config["tau_d"],
            tau_p=config.get("tau_p"), epsilon=config.get("epsilon"),
            seed=config["seed"], n_spins=config["n_spins"], out=out)
        return cmd_heff(ns)
    if command == "optimize":
        cfg_path = Path(out) / "_replay_config.json"
        cfg_path.parent.mkdir(parents=True, exist_ok=True)
        _write(cfg_path, json.dumps(config, sort_keys=True, indent=2) + "\n")
        return cmd_optimize(argparse.Namespace(config=str(cfg_path), out=out, jobs=jobs))
    if command in ("sweep", "landscape"):
        plan_path = Path(out) / "_replay_plan.json"
        plan_path.parent.mkdir(parents=True, exist_ok=True)
        _write(plan_path, json.dumps(config, sort_keys=True, indent=2) + "\n")
        ns = argparse.Namespace(plan=str(plan_path), out=out, jobs=jobs)
        return cmd_sweep(ns) if command == "sweep" else cmd_landscape(ns)
    if command == "compare":
        ns = argparse.Namespace(
            seq=config["sequences"], model=config["model"],
            J=config["J"], beta=config["beta"], tau_d=config["tau_d"],
            tau_p=config.get("tau_p"), epsilon=config.get("epsilon"),
            tau_c=config.get("fixed_tau_c"), n_spins=config["n_spins"],
            n_seeds=config["n_seeds"], seed=config["seed0"],
            precision=config.get("precision", "double"), out=out, jobs=jobs)
        return cmd_compare(ns)
    if command == "fit":
        return cmd_fit(argparse.Namespace(csv=config["csv"], out=out))
    raise CLIError(f"cannot replay command {command!r}")


# ---------------------------------------------------------------------------
# Argument parsing


def _add_model_args(p, with_tau_d=True):
    p.add_argument("--model", default="ideal",
                   choices=["ideal", "finite-width", "flip-angle", "finite-width-flip-angle"],
                   help="pulse error model")
    p.add_argument("--J", type=float, default=1e-3,
                   help="error Hamiltonian strength, rad/ns (default 1e-3 = 1 MHz)")
    p.add_argument("--beta", type=float, default=1e-6,
                   help="pure-bath strength, rad/ns (default 1e-6 = 1 kHz)")
    if with_tau_d:
        p.add_argument("--tau-d", dest="tau_d", type=float, default=0.1,
                       help="pulse interval, ns")
    p.add_argument("--tau-p", dest="tau_p", type=float, default=None,
                   help="pulse duration, ns (finite-width models)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="flip-angle error (fraction of pi)")
    p.add_argument("--seed", type=int, default=0, help="bath / master seed")
    p.add_argument("--n-spins", dest="n_spins", type=int, default=4, choices=[4, 6],
                   help="bath spins")


def _add_seq_args(p):
    p.add_argument("--seq", default=None,
                   help="named family, e.g. ga8a:X,Y, cdd:2, qdd:3,3, rga8a^2, rga4*4")
    p.add_argument("--seq-file", dest="seq_file", default=None,
                   help="sequence text file (tokens interval:LABEL)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ddopt",
        description="Dynamical-decoupling sequence simulator and optimizer "
                    "(units: rad/ns and ns).")
    ap.add_argument("--version", action="version", version=f"ddopt {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="propagate one sequence and report D")
    _add_seq_args(p)
    _add_model_args(p)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("optimize", help="run the genetic search from a JSON config")
    p.add_argument("config", help="GA config JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("sweep", help="run a 1-D sweep plan (JSON)")
    p.add_argument("plan", help="sweep plan JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("landscape", help="run a 2-D winner landscape plan (JSON)")
    p.add_argument("plan", help="sweep plan JSON with axis2/grid2")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_landscape)

    p = sub.add_parser("compare", help="rank sequences at fixed parameters")
    p.add_argument("--seq", action="append", default=[],
                   help="sequence spec (repeatable)")
    _add_model_args(p)
    p.add_argument("--tau-c", dest="tau_c", type=float, default=None,
                   help="pin the cycle time instead of tau_d")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=10)
    p.add_argument("--precision", default="double", choices=["double", "extended"])
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("heff", help="extract effective-Hamiltonian channel norms")
    _add_seq_args(p)
    _add_model_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_heff)

    p = sub.add_parser("fit", help="log-log scaling fit of a sweep CSV")
    p.add_argument("csv", help="sweep CSV with x and D_mean columns")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest", help="manifest JSON written by a previous run")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_replay)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BranchAmbiguityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
