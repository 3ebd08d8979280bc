"""Pulse sequences: representation, execution, and the named families.

A Sequence is an ordered list of (free interval, pulse label) steps stored
in *time order*: the first step's free evolution happens first, then its
pulse, and so on.  The DD literature writes sequences as operator products
that act right-to-left, so every constructor below reverses the customary
listing into time order; a zero interval encodes back-to-back pulses.

Families:

* cpmg, xy4/ga4, ga8a/b, ga16a/b, ga32a/b, ga64a/b/c, ga256a/b/c - the
  equal-interval sequences found optimal under ideal pulses;
* rga2, rga4, rga4p, rga8a/ap/b/c, rga16a/ap/bpp, rga32a/c, rga64a/c,
  rga256a/c - phase-adjusted (barred) variants robust to pulse errors;
* cdd(r) - recursive four-fold symmetrization; cdd(1) == rga4p;
* udd(M), qdd(M1, M2) - sin^2-spaced interval constructions;
* concatenate / repeat / self_concat - generic combinators.

The text format is one token per step, ``interval:LABEL``, with intervals
in ns; it round-trips exactly through repr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import herm_expm, expm_taylor
from .model import BARRED, LABELS, PulseModel, SystemModel, label_axis, pulse_table

__all__ = [
    "Sequence",
    "cyclic_ok",
    "pauli_merge",
    "propagate",
    "concatenate",
    "repeat",
    "self_concat",
    "trivial",
    "make_named",
    "parse_seq_spec",
    "sequence_to_text",
    "sequence_from_text",
    "FAMILIES",
    "cpmg", "xy4", "ga4", "ga8a", "ga8b", "ga16a", "ga16b", "ga32a", "ga32b",
    "ga64a", "ga64b", "ga64c", "ga256a", "ga256b", "ga256c",
    "rga2", "rga4", "rga4p", "rga8a", "rga8ap", "rga8b", "rga8c",
    "rga16a", "rga16ap", "rga16bpp", "rga32a", "rga32c", "rga64a", "rga64c",
    "rga256a", "rga256c", "cdd", "udd", "udd_fractions", "qdd",
]

# Pauli axes compose like a XOR group (phases aside): I=0, x=1, y=2, z=3.
_AXIS_BITS = {"I": 0, "x": 1, "y": 2, "z": 3}
_BITS_AXIS = {0: "I", 1: "X", 2: "Y", 3: "Z"}


@dataclass(frozen=True)
class Sequence:
    """An executable pulse sequence (time-ordered steps)."""

    steps: tuple[tuple[float, str], ...]
    tau_d: float
    name: str = ""

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a sequence needs at least one step")
        for interval, label in self.steps:
            if interval < 0:
                raise ValueError(f"negative interval {interval}")
            if label not in LABELS:
                raise ValueError(f"unknown pulse label {label!r}")

    @property
    def n_pulses(self) -> int:
        return len(self.steps)

    @property
    def total_interval(self) -> float:
        return float(sum(interval for interval, _ in self.steps))

    def labels(self) -> tuple[str, ...]:
        return tuple(label for _, label in self.steps)

    def scaled(self, tau_d: float) -> "Sequence":
        """The same pulse pattern with all intervals rescaled to a new tau_d."""
        if self.tau_d <= 0:
            raise ValueError("cannot rescale a sequence with tau_d = 0")
        f = tau_d / self.tau_d
        return Sequence(tuple((interval * f, p) for interval, p in self.steps), tau_d, self.name)


def _axis_bits(label: str) -> int:
    return _AXIS_BITS[label_axis(label)]


def cyclic_ok(seq: Sequence) -> bool:
    """True iff the ideal pulse product is proportional to the identity.

    Pauli products compose on axes like XOR regardless of order, so the
    phase-insensitive check reduces to an accumulator over the labels.
    """
    acc = 0
    for _, label in seq.steps:
        acc ^= _axis_bits(label)
    return acc == 0


def pauli_merge(p: str, q: str) -> str:
    """Label whose ideal operator equals p.q up to a global phase (p after q).

    Merging with I preserves the other label exactly (including its bar);
    any other merge resolves to the unbarred product label.
    """
    if label_axis(p) == "I":
        return q
    if label_axis(q) == "I":
        return p
    return _BITS_AXIS[_axis_bits(p) ^ _axis_bits(q)]


def propagate(seq: Sequence, sys: SystemModel, model: PulseModel,
              dtype=None) -> tuple[np.ndarray, float]:
    """Total propagator and cycle time of a sequence.

    Free evolution uses exp(-i H0 t); each pulse contributes its model
    unitary and elapsed time.  Passing dtype=complex256 switches the whole
    product to extended precision, which is what makes distances below
    ~1e-12 resolvable.
    """
    labels = sorted(set(seq.labels()))
    table = pulse_table(model, sys, labels=labels, dtype=dtype)
    free: dict[float, np.ndarray] = {}
    for interval, _ in seq.steps:
        if interval > 0 and interval not in free:
            if dtype is None or dtype == np.complex128:
                free[interval] = herm_expm(sys.H0, interval)
            else:
                free[interval] = expm_taylor(sys.H0, interval, dtype=dtype)
    dt = np.complex128 if dtype is None else dtype
    u = np.eye(sys.dim, dtype=dt)
    tau_c = 0.0
    for interval, label in seq.steps:
        if interval > 0:
            u = free[interval] @ u
            tau_c += interval
        pu, elapsed = table[label]
        u = pu @ u
        tau_c += elapsed
    return u, tau_c


# ---------------------------------------------------------------------------
# Combinators


def trivial(tau_d: float) -> Sequence:
    """A single free interval with no pulse (the identity label)."""
    return Sequence(((tau_d, "I"),), tau_d, "free")


def concatenate(outer: Sequence, inner: Sequence, merge: bool = True,
                name: str | None = None) -> Sequence:
    """Replace every free interval of the outer sequence by an inner cycle.

    An outer pulse then lands back-to-back with the inner cycle's final
    pulse; with merge=True (the canonical form) the pair collapses to one
    pulse via pauli_merge, otherwise it is kept as a zero-interval step.
    """
    for which, s in (("outer", outer), ("inner", inner)):
        if not cyclic_ok(s):
            raise ValueError(f"{which} sequence does not satisfy the cyclic DD condition")
    steps: list[tuple[float, str]] = []

    def add_pulse(label: str):
        if merge and steps:
            last_interval, last_label = steps[-1]
            steps[-1] = (last_interval, pauli_merge(label, last_label))
        else:
            steps.append((0.0, label))

    for interval, label in outer.steps:
        if interval > 0:
            steps.extend(inner.steps)
        add_pulse(label)
    if name is None:
        name = f"{outer.name}[{inner.name}]"
    return Sequence(tuple(steps), inner.tau_d, name)


def repeat(seq: Sequence, n: int) -> Sequence:
    """n cycles of a sequence, end to end."""
    if n < 1:
        raise ValueError("repeat count must be >= 1")
    return Sequence(seq.steps * n, seq.tau_d, f"{seq.name}*{n}" if n > 1 else seq.name)


def self_concat(base: Sequence, q: int) -> Sequence:
    """q-fold self-concatenation: level 1 is the base itself."""
    if q < 1:
        raise ValueError("concatenation level must be >= 1")
    out = trivial(base.tau_d)
    for _ in range(q):
        out = concatenate(base, out)
    return Sequence(out.steps, base.tau_d, f"{base.name}^{q}" if q > 1 else base.name)


# ---------------------------------------------------------------------------
# Named families.  Pulse arguments default to the papers' customary X/Y pair.


def _pick(p, fallback):
    return fallback if p is None else p


def _third_axis(p1: str, p2: str) -> str:
    return next(p for p in ("X", "Y", "Z") if p not in (p1, p2))


def _check_distinct(*pulses):
    seen = set()
    for p in pulses:
        if p in seen:
            raise ValueError(f"pulses must be pairwise distinct, got {pulses}")
        seen.add(p)
    for p in pulses:
        if p not in ("X", "Y", "Z"):
            raise ValueError(f"generator pulses must be unbarred X/Y/Z, got {p!r}")


def _fixed(labels, tau_d, name) -> Sequence:
    return Sequence(tuple((tau_d, p) for p in labels), tau_d, name)


def cpmg(p: str = "X", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p)
    return _fixed([p, p], tau_d, f"cpmg:{p}")


def ga4(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2, p1, p2], tau_d, f"ga4:{p1},{p2}")


def xy4(tau_d: float = 0.1) -> Sequence:
    s = ga4("X", "Y", tau_d)
    return Sequence(s.steps, tau_d, "xy4")


def ga8a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2, p1, "I", p1, p2, p1, "I"], tau_d, f"ga8a:{p1},{p2}")


def ga8b(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    p3 = _pick(p3, p1)
    _check_distinct(p1, p2)
    _check_distinct(p2, p3)
    s = concatenate(cpmg(p3, tau_d), ga4(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga8b:{p1},{p2},{p3}")


def ga16a(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    p3 = _pick(p3, _third_axis(p1, p2))
    _check_distinct(p1, p2)
    s = concatenate(cpmg(p3, tau_d), ga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga16a:{p1},{p2},{p3}")


def ga16b(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga4(p1, p2, tau_d), ga4(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga16b:{p1},{p2}")


def ga32a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga4(p1, p2, tau_d), ga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga32a:{p1},{p2}")


def ga32b(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga8a(p1, p2, tau_d), ga4(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga32b:{p1},{p2}")


def ga64a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga8a(p1, p2, tau_d), ga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga64a:{p1},{p2}")


def ga64b(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga8b(p1, p2, p3, tau_d), ga8b(p1, p2, p3, tau_d))
    return Sequence(s.steps, tau_d, f"ga64b:{p1},{p2},{_pick(p3, p1)}")


def ga64c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga4(p1, p2, tau_d), ga16b(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga64c:{p1},{p2}")


def ga256a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga4(p1, p2, tau_d), ga64a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga256a:{p1},{p2}")


def ga256b(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga8b(p1, p2, p3, tau_d), ga32a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga256b:{p1},{p2},{_pick(p3, p1)}")


def ga256c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(ga4(p1, p2, tau_d), ga64c(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"ga256c:{p1},{p2}")


def rga2(p: str = "X", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p)
    return _fixed([p, p + "b"], tau_d, f"rga2:{p}")


def rga4(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2 + "b", p1, p2 + "b"], tau_d, f"rga4:{p1},{p2}")


def rga4p(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2 + "b", p1 + "b", p2 + "b"], tau_d, f"rga4p:{p1},{p2}")


def rga8a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2 + "b", p1, "I", p1 + "b", p2, p1 + "b", "I"], tau_d,
                  f"rga8a:{p1},{p2}")


def rga8ap(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2 + "b", p1, "I", p1, p2 + "b", p1, "I"], tau_d,
                  f"rga8ap:{p1},{p2}")


def rga8b(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    p3 = _pick(p3, p1)
    _check_distinct(p1, p2)
    s = concatenate(rga2(p3, tau_d), rga4(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga8b:{p1},{p2},{p3}")


def rga8c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    _check_distinct(p1, p2)
    return _fixed([p1, p2, p1, p2, p2, p1, p2, p1], tau_d, f"rga8c:{p1},{p2}")


def rga16a(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    p3 = _pick(p3, p1)
    _check_distinct(p1, p2)
    outer = _fixed([p3, p3 + "b"], tau_d, "pbarp")
    s = concatenate(outer, rga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga16a:{p1},{p2},{p3}")


def rga16ap(p1: str = "X", p2: str = "Y", p3: str | None = None, tau_d: float = 0.1) -> Sequence:
    p3 = _pick(p3, p1)
    _check_distinct(p1, p2)
    s = concatenate(cpmg(p3, tau_d), rga8ap(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga16ap:{p1},{p2},{p3}")


def rga16bpp(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga4p(p1, p2, tau_d), rga4p(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga16bpp:{p1},{p2}")


def rga32a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga4(p1, p2, tau_d), rga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga32a:{p1},{p2}")


def rga32c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga8c(p1, p2, tau_d), rga4(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga32c:{p1},{p2}")


def rga64a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga8a(p1, p2, tau_d), rga8a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga64a:{p1},{p2}")


def rga64c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga8c(p1, p2, tau_d), rga8c(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga64c:{p1},{p2}")


def rga256a(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga4(p1, p2, tau_d), rga64a(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga256a:{p1},{p2}")


def rga256c(p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    s = concatenate(rga4(p1, p2, tau_d), rga64c(p1, p2, tau_d))
    return Sequence(s.steps, tau_d, f"rga256c:{p1},{p2}")


def cdd(r: int, p1: str = "X", p2: str = "Y", tau_d: float = 0.1) -> Sequence:
    """Concatenated DD at recursion level r (cdd(1) == rga4p)."""
    if r < 1:
        raise ValueError("CDD level must be >= 1")
    _check_distinct(p1, p2)
    out = trivial(tau_d)
    for _ in range(r):
        out = concatenate(rga4p(p1, p2, tau_d), out)
    return Sequence(out.steps, tau_d, f"cdd:{r},{p1},{p2}")


def udd_fractions(m: int) -> np.ndarray:
    """Normalized UDD intervals lambda_k >= 1, k = 1..M+1 (min exactly 1)."""
    if m < 1:
        raise ValueError("UDD order must be >= 1")
    k = np.arange(0, m + 2)
    t = np.sin(k * np.pi / (2 * m + 2)) ** 2
    gaps = np.diff(t)
    return gaps / gaps.min()


def _udd_steps(m: int, gen: str, base: float) -> list[tuple[float, str]]:
    lam = udd_fractions(m)
    steps = [(float(lam[j] * base), gen) for j in range(m)]
    closer = gen if m % 2 == 1 else "I"
    steps.append((float(lam[m] * base), closer))
    return steps


def udd(m: int, gen: str = "X", tau_d: float = 0.1) -> Sequence:
    """Uhrig DD of order M: sin^2-spaced intervals, minimum pinned to tau_d.

    M pulses of the generator sit inside the cycle; odd M needs a closing
    generator pulse at the cycle end to restore cyclicity.
    """
    _check_distinct(gen)
    return Sequence(tuple(_udd_steps(m, gen, tau_d)), tau_d, f"udd:{m},{gen}")


def qdd(m1: int, m2: int, g1: str = "Z", g2: str = "X", tau_d: float = 0.1) -> Sequence:
    """Quadratic DD: an inner UDD in g1 nested in every outer UDD interval.

    The k-th outer interval scales a whole inner cycle by lambda_k; outer
    pulses merge with the adjacent inner boundary pulse, which keeps the
    pulse count at the canonical (M+1)^2 for odd M1 = M2 = M.
    """
    _check_distinct(g1, g2)
    lam2 = udd_fractions(m2)
    steps: list[tuple[float, str]] = []
    for k in range(m2 + 1):
        steps.extend(_udd_steps(m1, g1, float(lam2[k] * tau_d)))
        outer_pulse = g2 if (k < m2 or m2 % 2 == 1) else "I"
        last_interval, last_label = steps[-1]
        steps[-1] = (last_interval, pauli_merge(outer_pulse, last_label))
    return Sequence(tuple(steps), tau_d, f"qdd:{m1},{m2},{g1},{g2}")


# ---------------------------------------------------------------------------
# Text format and the named-sequence grammar.


def sequence_to_text(seq: Sequence) -> str:
    return " ".join(f"{interval!r}:{label}" for interval, label in seq.steps)


def sequence_from_text(text: str, tau_d: float | None = None, name: str = "") -> Sequence:
    steps = []
    for token in text.split():
        try:
            interval_s, label = token.split(":")
            interval = float(interval_s)
        except ValueError as exc:
            raise ValueError(f"bad sequence token {token!r}") from exc
        if label not in LABELS:
            raise ValueError(f"bad sequence token {token!r}: unknown label {label!r}")
        steps.append((interval, label))
    if tau_d is None:
        positive = [i for i, _ in steps if i > 0]
        tau_d = min(positive) if positive else 0.0
    return Sequence(tuple(steps), tau_d, name)


# name -> (builder, pulse arity, int arity); builders take (*ints, *pulses, tau_d)
FAMILIES: dict[str, tuple] = {
    "free": (lambda tau_d: trivial(tau_d), 0, 0),
    "cpmg": (cpmg, 1, 0),
    "xy4": (xy4, 0, 0),
    "ga4": (ga4, 2, 0),
    "ga8a": (ga8a, 2, 0),
    "ga8b": (ga8b, 3, 0),
    "ga16a": (ga16a, 3, 0),
    "ga16b": (ga16b, 2, 0),
    "ga32a": (ga32a, 2, 0),
    "ga32b": (ga32b, 2, 0),
    "ga64a": (ga64a, 2, 0),
    "ga64b": (ga64b, 3, 0),
    "ga64c": (ga64c, 2, 0),
    "ga256a": (ga256a, 2, 0),
    "ga256b": (ga256b, 3, 0),
    "ga256c": (ga256c, 2, 0),
    "rga2": (rga2, 1, 0),
    "rga4": (rga4, 2, 0),
    "rga4p": (rga4p, 2, 0),
    "rga8a": (rga8a, 2, 0),
    "rga8ap": (rga8ap, 2, 0),
    "rga8b": (rga8b, 3, 0),
    "rga8c": (rga8c, 2, 0),
    "rga16a": (rga16a, 3, 0),
    "rga16ap": (rga16ap, 3, 0),
    "rga16bpp": (rga16bpp, 2, 0),
    "rga32a": (rga32a, 2, 0),
    "rga32c": (rga32c, 2, 0),
    "rga64a": (rga64a, 2, 0),
    "rga64c": (rga64c, 2, 0),
    "rga256a": (rga256a, 2, 0),
    "rga256c": (rga256c, 2, 0),
    "cdd": (cdd, 2, 1),
    "udd": (udd, 1, 1),
    "qdd": (qdd, 2, 2),
}


def parse_seq_spec(spec: str) -> tuple[str, int, int, list[str]]:
    """Split 'name[^q][*n][:params]' into (name, q, n, params)."""
    head, _, params_s = spec.partition(":")
    reps = 1
    power = 1
    if "*" in head:
        head, _, reps_s = head.partition("*")
        reps = int(reps_s)
    if "^" in head:
        head, _, power_s = head.partition("^")
        power = int(power_s)
    params = [p for p in params_s.split(",") if p] if params_s else []
    return head, power, reps, params


def make_named(spec: str, tau_d: float = 0.1) -> Sequence:
    """Build a sequence from its grammar string, e.g. 'ga8a:X,Y', 'cdd:2',
    'rga8a^2' (self-concatenation) or 'rga4*4' (repeated cycles)."""
    name, power, reps, params = parse_seq_spec(spec)
    if name not in FAMILIES:
        raise ValueError(f"unknown sequence family {name!r}")
    builder, n_pulses, n_ints = FAMILIES[name]
    if len(params) > n_ints + n_pulses:
        raise ValueError(f"{name} takes at most {n_ints + n_pulses} parameters")
    args: list = []
    for idx in range(n_ints):
        if idx >= len(params):
            raise ValueError(f"{name} requires {n_ints} integer parameter(s)")
        args.append(int(params[idx]))
    for p in params[n_ints:]:
        if p not in ("X", "Y", "Z"):
            raise ValueError(f"bad pulse parameter {p!r} in {spec!r}")
        args.append(p)
    seq = builder(*args, tau_d=tau_d)
    if power > 1:
        seq = self_concat(seq, power)
    if reps > 1:
        seq = repeat(seq, reps)
    return Sequence(seq.steps, tau_d, spec)
