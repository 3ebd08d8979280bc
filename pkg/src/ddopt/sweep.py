"""Parameter-sweep harness: 1-D scaling sweeps, 2-D winner landscapes, and
head-to-head comparisons.

Every sweep is a pure function of its plan and seed: bath realizations come
from the per-seed counter-based stream, cells are visited in a fixed order,
and per-seed distances are combined by a geometric mean (D spans decades;
the log-domain average is what the scaling fits consume).  Cells that
cannot be evaluated (infeasible pulse timing, log-branch failures) are
recorded with a reason instead of aborting the sweep.

Sweepable axes: tau_d, J, beta, tau_p, epsilon, tau_p_over_tau_d,
J_over_beta.  A plan may pin the cycle time tau_c instead of tau_d, in
which case tau_d is derived per sequence from its interval weight and pulse
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import BranchAmbiguityError, EXTENDED_DTYPE, sup_norm
from .metrics import distance, fitness
from .model import BathSpec, PulseModel, SystemModel, build_bath_operators, PAULI
from .sequences import Sequence, make_named, propagate

__all__ = [
    "AXES",
    "SweepPlan",
    "BathDraw",
    "log_grid",
    "sweep_1d",
    "landscape_2d",
    "compare",
    "extract_exponents",
    "sweep_csv",
    "landscape_csv",
    "compare_csv",
    "fit_csv",
]

AXES = ("tau_d", "J", "beta", "tau_p", "epsilon", "tau_p_over_tau_d", "J_over_beta")


def log_grid(lo: float, hi: float, points_per_decade: int = 6) -> tuple[float, ...]:
    """Log-spaced grid including both endpoints."""
    if lo <= 0 or hi <= lo:
        raise ValueError("need 0 < lo < hi")
    decades = math.log10(hi / lo)
    n = max(2, int(round(decades * points_per_decade)) + 1)
    return tuple(float(x) for x in np.logspace(math.log10(lo), math.log10(hi), n))


@dataclass(frozen=True)
class SweepPlan:
    """One axis (or two, for landscapes) over a list of sequences."""

    sequences: tuple[str, ...]
    model_kind: str = "ideal"
    axis: str = "tau_d"
    grid: tuple[float, ...] = ()
    axis2: str | None = None
    grid2: tuple[float, ...] = ()
    J: float = 1e-3
    beta: float = 1e-6
    tau_d: float = 0.1
    tau_p: float | None = None
    epsilon: float | None = None
    fixed_tau_c: float | None = None
    n_spins: int = 4
    n_seeds: int = 10
    seed0: int = 0
    precision: str = "double"  # or "extended"

    def __post_init__(self):
        if not self.sequences:
            raise ValueError("plan needs at least one sequence")
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if self.axis2 is not None and self.axis2 not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis2!r}")
        if any(x <= 0 for x in self.grid):
            raise ValueError("grid values must be positive")
        if self.precision not in ("double", "extended"):
            raise ValueError("precision must be 'double' or 'extended'")

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(range(self.seed0, self.seed0 + self.n_seeds))

    @property
    def dtype(self):
        return EXTENDED_DTYPE if self.precision == "extended" else None


class BathDraw:
    """One seed's raw bath operators, reusable across (J, beta) cells."""

    def __init__(self, n_spins: int, seed: int):
        self.n_spins = n_spins
        self.seed = seed
        ops = build_bath_operators(BathSpec(n_spins=n_spins, seed=seed, J=1.0, beta=0.0))
        d_b = 2**n_spins
        self.raw_err = np.zeros((2 * d_b, 2 * d_b), dtype=complex)
        for mu in ("x", "y", "z"):
            self.raw_err += np.kron(PAULI[mu], ops[mu])
        self.raw_bath = ops["I"] - (np.trace(ops["I"]) / d_b) * np.eye(d_b)
        self.norm_err = sup_norm(self.raw_err)
        self.norm_bath = sup_norm(self.raw_bath)

    def realize(self, j: float, beta: float) -> SystemModel:
        spec = BathSpec(n_spins=self.n_spins, seed=self.seed, J=j, beta=beta)
        h_err = (j / self.norm_err) * self.raw_err if j else np.zeros_like(self.raw_err)
        h_b = (beta / self.norm_bath) * self.raw_bath if beta else np.zeros_like(self.raw_bath)
        h_b_full = np.kron(PAULI["I"], h_b)
        return SystemModel(spec=spec, H_err=h_err, H_B=h_b, H_B_full=h_b_full,
                           H0=h_err + h_b_full)


def _base_params(plan: SweepPlan) -> dict:
    return {"J": plan.J, "beta": plan.beta, "tau_d": plan.tau_d,
            "tau_p": plan.tau_p, "epsilon": plan.epsilon}


def _apply_axis(params: dict, axis: str, x: float) -> dict:
    params = dict(params)
    if axis == "J":
        params["J"] = x
    elif axis == "beta":
        params["beta"] = x
    elif axis == "tau_d":
        params["tau_d"] = x
    elif axis == "tau_p":
        params["tau_p"] = x
    elif axis == "epsilon":
        params["epsilon"] = x
    elif axis == "tau_p_over_tau_d":
        params["tau_p"] = x * params["tau_d"]
    elif axis == "J_over_beta":
        params["J"] = x * params["beta"]
    return params


def _pulse_model(kind: str, params: dict) -> PulseModel:
    return PulseModel(kind=kind,
                      tau_p=params["tau_p"] if kind in ("finite-width", "finite-width-flip-angle") else None,
                      epsilon=params["epsilon"] if kind in ("flip-angle", "finite-width-flip-angle") else None)


def _sequence_for_cell(seq_spec: str, params: dict, model: PulseModel,
                       fixed_tau_c: float | None) -> Sequence:
    if fixed_tau_c is None:
        return make_named(seq_spec, tau_d=params["tau_d"])
    unit = make_named(seq_spec, tau_d=1.0)
    weight = unit.total_interval
    pulse_time = (model.tau_p or 0.0) * unit.n_pulses if model.has_width else 0.0
    tau_d = (fixed_tau_c - pulse_time) / weight
    if tau_d <= 0:
        raise ValueError("infeasible: pulse time exceeds the fixed cycle time")
    return unit.scaled(tau_d)


def _cell_distance(seq_spec: str, params: dict, plan: SweepPlan, draw: BathDraw) -> float:
    model = _pulse_model(plan.model_kind, params)
    seq = _sequence_for_cell(seq_spec, params, model, plan.fixed_tau_c)
    sys = draw.realize(params["J"], params["beta"])
    u, _ = propagate(seq, sys, model, dtype=plan.dtype)
    return distance(u, None, sys.d_s, sys.d_b)


def _seed_worker(args):
    plan, seed, cells = args
    draw = BathDraw(plan.n_spins, seed)
    out = []
    for seq_spec, axis_values in cells:
        for xs in axis_values:
            params = _apply_axis(_base_params(plan), plan.axis, xs[0])
            if len(xs) > 1:
                params = _apply_axis(params, plan.axis2, xs[1])
            try:
                d = _cell_distance(seq_spec, params, plan, draw)
                out.append((seq_spec, xs, d, ""))
            except (ValueError, BranchAmbiguityError) as exc:
                out.append((seq_spec, xs, math.nan, str(exc)))
    return out


def _gather(plan: SweepPlan, cells, jobs: int = 1):
    """Evaluate all (sequence, x, seed) distances; deterministic order."""
    tasks = [(plan, seed, cells) for seed in plan.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            per_seed = list(pool.map(_seed_worker, tasks))
    else:
        per_seed = [_seed_worker(t) for t in tasks]
    table: dict[tuple, list] = {}
    reasons: dict[tuple, str] = {}
    for rows in per_seed:
        for seq_spec, xs, d, reason in rows:
            key = (seq_spec, xs)
            table.setdefault(key, []).append(d)
            if reason:
                reasons[key] = reason
    return table, reasons


def _geomean(ds: list[float]) -> tuple[float, float]:
    """Geometric mean and the stderr of log10 D across seeds (in decades)."""
    arr = np.asarray(ds, dtype=float)
    if np.any(np.isnan(arr)):
        return math.nan, math.nan
    if np.any(arr == 0.0):
        return 0.0, 0.0
    logs = np.log10(arr)
    stderr = float(logs.std(ddof=1) / math.sqrt(len(logs))) if len(logs) > 1 else 0.0
    return float(10.0 ** logs.mean()), stderr


def sweep_1d(plan: SweepPlan, jobs: int = 1) -> dict[str, list[dict]]:
    """Per-sequence tables of rows {x, D_mean, D_stderr, n_seeds, reason}."""
    if not plan.grid:
        raise ValueError("plan has an empty grid")
    cells = [(seq, [(x,) for x in plan.grid]) for seq in plan.sequences]
    table, reasons = _gather(plan, cells, jobs)
    out: dict[str, list[dict]] = {seq: [] for seq in plan.sequences}
    for seq in plan.sequences:
        for x in plan.grid:
            key = (seq, (x,))
            mean, stderr = _geomean(table[key])
            out[seq].append({"x": x, "D_mean": mean, "D_stderr": stderr,
                             "n_seeds": plan.n_seeds, "reason": reasons.get(key, "")})
    return out


def landscape_2d(plan: SweepPlan, jobs: int = 1) -> list[dict]:
    """Winner per (x, y) cell: smallest geometric-mean D, ties to fewer pulses."""
    if plan.axis2 is None or not plan.grid2:
        raise ValueError("landscape needs a second axis and grid")
    cells = [(seq, [(x, y) for x in plan.grid for y in plan.grid2])
             for seq in plan.sequences]
    table, reasons = _gather(plan, cells, jobs)
    n_pulses = {seq: make_named(seq, tau_d=1.0).n_pulses for seq in plan.sequences}
    rows = []
    for x in plan.grid:
        for y in plan.grid2:
            best = None
            for seq in plan.sequences:
                mean, _ = _geomean(table[(seq, (x, y))])
                if math.isnan(mean):
                    continue
                cand = (mean, n_pulses[seq], seq)
                if best is None or cand < best:
                    best = cand
            if best is None:
                rows.append({"x": x, "y": y, "winner": "", "D": math.nan,
                             "reason": reasons.get((plan.sequences[0], (x, y)), "no data")})
            else:
                rows.append({"x": x, "y": y, "winner": best[2], "D": best[0], "reason": ""})
    return rows


def compare(sequences: tuple[str, ...], plan: SweepPlan, jobs: int = 1) -> list[dict]:
    """One row per sequence at the plan's fixed parameters, sorted by D."""
    if not sequences:
        raise ValueError("nothing to compare")
    base = replace(plan, sequences=tuple(sequences), grid=(1.0,), axis="tau_d")
    # axis value 1.0 is a placeholder: pin tau_d explicitly
    cells = [(seq, [(base.tau_d,)]) for seq in sequences]
    table, reasons = _gather(base, cells, jobs)
    rows = []
    for seq in sequences:
        key = (seq, (base.tau_d,))
        mean, stderr = _geomean(table[key])
        unit = make_named(seq, tau_d=1.0)
        model = _pulse_model(base.model_kind, _base_params(base))
        if base.fixed_tau_c is not None:
            tau_c = base.fixed_tau_c
        else:
            tau_c = unit.total_interval * base.tau_d
            if model.has_width:
                tau_c += model.tau_p * unit.n_pulses
        rows.append({"sequence": seq, "D": mean,
                     "q": fitness(mean) if mean == mean else math.inf,
                     "pulses": unit.n_pulses, "tau_c": tau_c,
                     "D_stderr": stderr, "reason": reasons.get(key, "")})
    rows.sort(key=lambda r: (math.isnan(r["D"]), r["D"], r["sequence"]))
    return rows


def extract_exponents(seq_spec: str, regime: str, *, model_kind: str = "ideal",
                      tau_d: float = 0.1, tau_grid=None, j_grid=None,
                      beta: float | None = None, n_seeds: int = 10,
                      seed0: int = 0, precision: str = "double",
                      jobs: int = 1):
    """Scaling exponents (N, n_J, n_beta) of D ~ J^n_J beta^n_beta tau_d^(N+1).

    The tau_d sweep fixes N+1; the J sweep inside the requested regime
    ('J>>beta': strengths three decades apart, or 'J<<beta') gives n_J, and
    n_beta is the remaining weight.  Default grids: one decade of tau_d
    ending at the Magnus-safe (J+beta) tau_c = 0.3, and three decades of J.
    Returns ((N, n_J, n_beta), tau_fit, j_fit).
    """
    from .metrics import fit_scaling
    if regime not in ("J>>beta", "J<<beta"):
        raise ValueError("regime must be 'J>>beta' or 'J<<beta'")
    weight = make_named(seq_spec, 1.0).total_interval
    cap = 0.3 / (weight * tau_d)  # largest J + beta the cycle tolerates
    if regime == "J>>beta":
        if j_grid is None:
            j_grid = log_grid(cap / 1e3, cap, 8)
        beta = 1e-3 * min(j_grid) if beta is None else beta
        j_ref = float(np.sqrt(min(j_grid) * max(j_grid)))
    else:
        beta = cap / (1 + 1e-3) if beta is None else beta
        if j_grid is None:
            j_grid = log_grid(1e-6 * beta, 1e-3 * beta, 8)
        j_ref = float(np.sqrt(min(j_grid) * max(j_grid)))

    if tau_grid is None:
        hi = 0.3 / (weight * (j_ref + beta))
        tau_grid = log_grid(hi / 10, hi, 8)

    def fit_rows(axis, grid, j, b, td):
        plan = SweepPlan(sequences=(seq_spec,), model_kind=model_kind, axis=axis,
                         grid=tuple(grid), J=j, beta=b, tau_d=td,
                         n_seeds=n_seeds, seed0=seed0, precision=precision)
        rows = sweep_1d(plan, jobs=jobs)[seq_spec]
        pts = [(r["x"], r["D_mean"]) for r in rows
               if r["D_mean"] == r["D_mean"] and r["D_mean"] > 0]
        return fit_scaling(pts)

    tau_fit = fit_rows("tau_d", tau_grid, j_ref, beta, tau_d)
    j_fit = fit_rows("J", j_grid, j_ref, beta, tau_d)
    n = tau_fit.slope - 1.0
    return (n, j_fit.slope, tau_fit.slope - j_fit.slope), tau_fit, j_fit


# ---------------------------------------------------------------------------
# CSV serialization (deterministic: repr floats, \n newlines)


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def sweep_csv(rows: list[dict]) -> str:
    lines = ["x,D_mean,D_stderr,n_seeds,reason"]
    for r in rows:
        lines.append(",".join([_fmt(r["x"]), _fmt(r["D_mean"]), _fmt(r["D_stderr"]),
                               str(r["n_seeds"]), r["reason"]]))
    return "\n".join(lines) + "\n"


def landscape_csv(rows: list[dict]) -> str:
    lines = ["x,y,winner,D,reason"]
    for r in rows:
        lines.append(",".join([_fmt(r["x"]), _fmt(r["y"]), r["winner"], _fmt(r["D"]),
                               r["reason"]]))
    return "\n".join(lines) + "\n"


def compare_csv(rows: list[dict]) -> str:
    lines = ["sequence,D,q,pulses,tau_c,D_stderr,reason"]
    for r in rows:
        lines.append(",".join([r["sequence"], _fmt(r["D"]), _fmt(r["q"]),
                               str(r["pulses"]), _fmt(r["tau_c"]), _fmt(r["D_stderr"]),
                               r["reason"]]))
    return "\n".join(lines) + "\n"


def fit_csv(fit) -> str:
    return ("slope,intercept,r_squared,n_points\n"
            f"{fit.slope!r},{fit.intercept!r},{fit.r_squared!r},{fit.n_points}\n")
