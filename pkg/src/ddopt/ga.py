"""Genetic search over cyclic pulse sequences with annealed selection.

A chromosome ties the K pulse sites into linked groups that share one gene;
the complexity ladder starts from the two-group odd/even-site split and
unlinks groups level by level (even sites first, then odd) until every site
is independent.  Within a level the population evolves by softmax selection
at an annealed temperature, a splice crossover whose splice-point gene is
repaired to keep the cyclic DD condition, and single-/double-site
mutations.  Every chromosome in every generation decodes to a sequence
whose ideal pulse product is proportional to the identity.

All randomness flows from one master seed through per-(level, generation,
purpose) Philox streams, so runs reproduce bit-for-bit no matter how the
fitness evaluations are scheduled.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import herm_expm
from .metrics import distance, fitness
from .model import BathSpec, PulseModel, SystemModel, build_model, pulse_set, pulse_table
from .sequences import Sequence, cyclic_ok

__all__ = [
    "Chromosome",
    "GAConfig",
    "GAResult",
    "ktilde",
    "group_schedule",
    "initial_population",
    "selection_probabilities",
    "temperature",
    "crossover",
    "mutate_single",
    "mutate_double",
    "evolve_generation",
    "increase_complexity",
    "run_ga",
    "FitnessContext",
    "config_from_json",
    "config_to_json",
    "history_csv",
]

_AXIS_BITS = {"I": 0, "X": 1, "Y": 2, "Z": 3, "Xb": 1, "Yb": 2, "Zb": 3}


@dataclass(frozen=True)
class Chromosome:
    """Genotype: a site partition plus one pulse gene per group."""

    k: int
    groups: tuple[tuple[int, ...], ...]
    genes: tuple[str, ...]
    level: int

    def __post_init__(self):
        sites = sorted(s for g in self.groups for s in g)
        if sites != list(range(self.k)):
            raise ValueError("groups must partition the pulse sites exactly")
        if len(self.genes) != len(self.groups):
            raise ValueError("one gene per group required")

    def decode(self) -> tuple[str, ...]:
        out = [""] * self.k
        for group, gene in zip(self.groups, self.genes):
            for s in group:
                out[s] = gene
        return tuple(out)

    def decode_sequence(self, tau_d: float) -> Sequence:
        return Sequence(tuple((tau_d, p) for p in self.decode()), tau_d,
                        name="ga-candidate")

    def is_cyclic(self) -> bool:
        acc = 0
        for group, gene in zip(self.groups, self.genes):
            if len(group) % 2:
                acc ^= _AXIS_BITS[gene]
        return acc == 0


def ktilde(level: int) -> int:
    """Reported group-count formula: (3/2)(l + 4/3) even l, (3/2)(l + 1) odd."""
    if level % 2 == 0:
        return (3 * level + 4) // 2
    return (3 * (level + 1)) // 2


def group_schedule(k: int) -> list[tuple[tuple[int, ...], ...]]:
    """Partitions for levels 0..l_max.

    Level 0 links all odd sites together and all even sites together.  Each
    later level splits every still-linked even-site block into its
    alternating halves (stride doubling); once the even sites are all
    singletons the odd sites unlink the same way.  The group counts this
    produces are powers-of-two compositions and do not always match the
    ktilde reporting formula; the schedule is what the search uses.
    """
    if k < 2 or k % 2:
        raise ValueError("pulse count must be even and >= 2")
    odd_blocks = [tuple(range(0, k, 2))]   # sites 1,3,5,... (1-based)
    even_blocks = [tuple(range(1, k, 2))]  # sites 2,4,6,...

    def snapshot():
        return tuple(sorted(odd_blocks + even_blocks))

    levels = [snapshot()]
    while any(len(b) > 1 for b in even_blocks):
        even_blocks = [half for b in even_blocks for half in (b[0::2], b[1::2]) if half]
        levels.append(snapshot())
    while any(len(b) > 1 for b in odd_blocks):
        odd_blocks = [half for b in odd_blocks for half in (b[0::2], b[1::2]) if half]
        levels.append(snapshot())
    return levels


@dataclass(frozen=True)
class GAConfig:
    """Search settings; annealing constants default to the tuned values."""

    k: int
    model: PulseModel = PulseModel.ideal()
    q_pop: int = 16
    j: float = 1e-3
    beta: float = 1e-6
    tau_d: float = 0.1
    n_spins: int = 4
    bath_seeds: tuple[int, ...] = (0,)
    seed: int = 0
    t0: float | None = None       # None: per-level adaptive (max fitness gap)
    tf: float = 0.05
    eta: float = 0.3
    lam: float = 3.0
    alpha_c: int | None = None    # None: 50 * (1 + K/64)
    generations_per_level: int | None = None

    def __post_init__(self):
        if self.q_pop % 8:
            raise ValueError("population size must be divisible by 8")
        if self.k < 2 or self.k % 2:
            raise ValueError("pulse count must be even and >= 2")
        if self.t0 is not None and not self.t0 > self.tf > 0:
            raise ValueError("need T0 > Tf > 0")
        if self.tf <= 0:
            raise ValueError("need Tf > 0")
        if not 0 <= self.eta < 1:
            raise ValueError("eta must lie in [0, 1)")

    @property
    def cutoff_generation(self) -> int:
        if self.alpha_c is not None:
            return self.alpha_c
        return int(round(50 * (1 + self.k / 64)))

    @property
    def n_generations(self) -> int:
        if self.generations_per_level is not None:
            return self.generations_per_level
        return self.cutoff_generation


@dataclass
class GAResult:
    best_sequence: Sequence
    best_fitness: float
    history: list[dict]
    level_best: list[dict]


def _stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.Philox(ss))


# purpose ids for rng streams
_INIT, _SELECT, _SPLICE, _MUT1, _MUT2, _REFILL = range(6)


class FitnessContext:
    """Precomputed propagators for fast chromosome evaluation.

    Fitness is the mean of q = -log10 D over the configured bath seeds;
    results are cached by decoded pulse tuple.
    """

    def __init__(self, cfg: GAConfig):
        self.cfg = cfg
        self.cache: dict[tuple[str, ...], float] = {}
        self._engines = []
        for seed in cfg.bath_seeds:
            sys = build_model(BathSpec(n_spins=cfg.n_spins, seed=seed, J=cfg.j, beta=cfg.beta))
            table = pulse_table(cfg.model, sys)
            free = herm_expm(sys.H0, cfg.tau_d)
            self._engines.append((sys, table, free))

    def evaluate(self, chrom: Chromosome) -> float:
        key = chrom.decode()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        qs = []
        for sys, table, free in self._engines:
            u = np.eye(sys.dim, dtype=complex)
            for label in key:
                u = table[label][0] @ (free @ u)
            qs.append(fitness(distance(u, None, sys.d_s, sys.d_b)))
        q = float(np.mean(qs))
        self.cache[key] = q
        return q

    def evaluate_all(self, pop: list[Chromosome]) -> list[float]:
        return [self.evaluate(c) for c in pop]


def _sort_key(chrom: Chromosome, q: float):
    # descending fitness; ties broken by sequence text for determinism
    return (-q, chrom.decode())


def _rank(pop: list[Chromosome], ctx: FitnessContext) -> list[Chromosome]:
    return sorted(pop, key=lambda c: _sort_key(c, ctx.evaluate(c)))


def _random_chromosome(k: int, groups, alphabet: tuple[str, ...], level: int,
                       rng: np.random.Generator) -> Chromosome:
    n = len(groups)
    for _ in range(64):
        genes = tuple(alphabet[i] for i in rng.integers(0, len(alphabet), size=n))
        c = Chromosome(k, groups, genes, level)
        if c.is_cyclic():
            return c
    # Deterministic fallback: identical genes on all odd-sized groups cancel.
    anchor = next(a for a in alphabet if a != "I")
    genes = tuple(anchor if len(g) % 2 else alphabet[int(rng.integers(0, len(alphabet)))]
                  for g in groups)
    return Chromosome(k, groups, genes, level)


def initial_population(cfg: GAConfig) -> list[Chromosome]:
    """Level-0 population on the odd/even-linked chromosome.

    All alphabet pairs (P_odd, P_even) that satisfy the cyclic condition
    are enumerated; if more than Q exist, Q are sampled without
    replacement, otherwise the whole set is the population.
    """
    groups = group_schedule(cfg.k)[0]
    alphabet = pulse_set(cfg.model)
    valid = []
    for genes in itertools.product(alphabet, repeat=len(groups)):
        c = Chromosome(cfg.k, groups, tuple(genes), 0)
        if c.is_cyclic():
            valid.append(c)
    if len(valid) > cfg.q_pop:
        rng = _stream(cfg.seed, 0, 0, _INIT)
        idx = rng.choice(len(valid), size=cfg.q_pop, replace=False)
        valid = [valid[i] for i in sorted(idx)]
    return valid


def selection_probabilities(qs: list[float], t: float) -> np.ndarray:
    """Annealed softmax over fitness, referenced to the generation's best."""
    q = np.asarray(qs, dtype=float)
    t = max(float(t), 1e-12)
    w = np.exp((q - q.max()) / t)
    return w / w.sum()


def temperature(alpha: int, cfg: GAConfig, t0: float) -> float:
    """Geometric cooling modulated by a sinusoid, floored at Tf."""
    a_c = cfg.cutoff_generation
    t = t0 * (cfg.tf / t0) ** (alpha / a_c) * (1 - cfg.eta * np.sin(cfg.lam * np.pi * alpha / a_c))
    return float(max(t, cfg.tf))


def _reencode(template: Chromosome, left: tuple[str, ...], right: tuple[str, ...],
              splice: int) -> Chromosome:
    """Offspring genes: sites before the splice take the left parent's
    decoded pulses, the rest the right parent's; each group inherits the
    gene at its first member site."""
    genes = []
    for group in template.groups:
        first = min(group)
        genes.append(left[first] if first < splice else right[first])
    return replace(template, genes=tuple(genes))


def crossover(c1: Chromosome, c2: Chromosome, alphabet: tuple[str, ...],
              rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    """Splice two parents at a random site, repairing the splice-point gene.

    If no alphabet gene at the splice group restores the cyclic condition a
    new splice point is drawn; splicing at the end reproduces the parents,
    so offspring always exist.
    """
    if c1.groups != c2.groups:
        raise ValueError("parents must share the same group structure")
    left, right = c1.decode(), c2.decode()
    k = c1.k

    def build(a, b, splice):
        child = _reencode(c1, a, b, splice)
        if child.is_cyclic():
            return child
        gi = next(i for i, g in enumerate(child.groups) if (splice - 1) in g)
        for li in rng.permutation(len(alphabet)):
            candidate = replace(child, genes=child.genes[:gi] + (alphabet[li],)
                                + child.genes[gi + 1:])
            if candidate.is_cyclic():
                return candidate
        return None

    for _ in range(64):
        splice = int(rng.integers(1, k + 1))
        o1 = build(left, right, splice)
        o2 = build(right, left, splice)
        if o1 is not None and o2 is not None:
            return o1, o2
    return c1, c2  # splice at k always reproduces the parents


def _mutation_candidates(group: tuple[int, ...], gene: str, alphabet: tuple[str, ...],
                         extra_parity: int = 0) -> list[str]:
    parity = (len(group) + extra_parity) % 2
    out = []
    for label in alphabet:
        if label == gene:
            continue
        if parity and _AXIS_BITS[label] != _AXIS_BITS[gene]:
            continue
        out.append(label)
    return out


def mutate_single(c: Chromosome, alphabet: tuple[str, ...],
                  rng: np.random.Generator) -> Chromosome | None:
    """Replace one group's gene, keeping the cyclic condition.

    An even-sized group cancels its own axis, so any replacement works; an
    odd-sized group only admits same-axis replacements.  Returns None when
    no group can change (a duplicate, to be discarded).
    """
    for gi in rng.permutation(len(c.groups)):
        cands = _mutation_candidates(c.groups[gi], c.genes[gi], alphabet)
        if cands:
            new = cands[int(rng.integers(0, len(cands)))]
            return replace(c, genes=c.genes[:gi] + (new,) + c.genes[gi + 1:])
    return None


def mutate_double(c: Chromosome, alphabet: tuple[str, ...],
                  rng: np.random.Generator) -> Chromosome | None:
    """Linked mutation of two groups that currently share the same gene."""
    for gi in rng.permutation(len(c.groups)):
        partners = [gj for gj in range(len(c.groups))
                    if gj != gi and c.genes[gj] == c.genes[gi]]
        if not partners:
            continue
        for pj in rng.permutation(len(partners)):
            gj = partners[pj]
            cands = _mutation_candidates(c.groups[gi], c.genes[gi], alphabet,
                                         extra_parity=len(c.groups[gj]))
            if not cands:
                continue
            new = cands[int(rng.integers(0, len(cands)))]
            genes = list(c.genes)
            genes[gi] = new
            genes[gj] = new
            return replace(c, genes=tuple(genes))
    return None


def _dedup(chroms: list[Chromosome], taken: set | None = None) -> list[Chromosome]:
    seen = set() if taken is None else set(taken)
    out = []
    for c in chroms:
        key = c.decode()
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


def _refill(pool: list[Chromosome], target: int, cfg: GAConfig, alphabet, groups, level,
            rng: np.random.Generator) -> list[Chromosome]:
    seen = {c.decode() for c in pool}
    attempts = 0
    while len(pool) < target and attempts < 64 * target:
        c = _random_chromosome(cfg.k, groups, alphabet, level, rng)
        attempts += 1
        if c.decode() in seen:
            continue
        seen.add(c.decode())
        pool.append(c)
    return pool


def evolve_generation(pop: list[Chromosome], ctx: FitnessContext, cfg: GAConfig,
                      t: float, level: int, alpha: int) -> list[Chromosome]:
    """One generation: reproduce, prune, mutate, reassemble.

    The next population keeps the best Q/8 parents, 5Q/8 offspring and Q/8
    of each mutation kind, deduplicated by decoded sequence and refilled
    with random valid chromosomes when short.
    """
    q_pop = cfg.q_pop
    alphabet = pulse_set(cfg.model)
    groups = pop[0].groups
    rng_sel = _stream(cfg.seed, level, alpha, _SELECT)
    rng_splice = _stream(cfg.seed, level, alpha, _SPLICE)
    rng_m1 = _stream(cfg.seed, level, alpha, _MUT1)
    rng_m2 = _stream(cfg.seed, level, alpha, _MUT2)
    rng_refill = _stream(cfg.seed, level, alpha, _REFILL)

    qs = ctx.evaluate_all(pop)
    probs = selection_probabilities(qs, t)

    offspring: list[Chromosome] = []
    for _ in range(q_pop):
        if len(pop) < 2:
            offspring.extend(pop * 2)
            break
        i = int(rng_sel.choice(len(pop), p=probs))
        j = i
        while j == i:
            j = int(rng_sel.choice(len(pop), p=probs))
        o1, o2 = crossover(pop[i], pop[j], alphabet, rng_splice)
        offspring.extend([o1, o2])

    ranked_parents = _rank(pop, ctx)
    unique_offspring = _dedup(offspring)
    parents_best = ranked_parents[: q_pop // 4]
    parent_keys = {c.decode() for c in parents_best}
    offspring_ranked = _rank([c for c in unique_offspring if c.decode() not in parent_keys], ctx)
    interim = parents_best + offspring_ranked[: 3 * q_pop // 4]
    interim = _refill(_dedup(interim), q_pop, cfg, alphabet, groups, level, rng_refill)

    singles = [m for m in (mutate_single(c, alphabet, rng_m1) for c in interim) if m is not None]
    doubles = [m for m in (mutate_double(c, alphabet, rng_m2) for c in interim) if m is not None]

    new_pop: list[Chromosome] = []
    taken: set = set()

    def take(source: list[Chromosome], count: int):
        for c in _rank(source, ctx):
            if len(new_pop) >= q_pop or count <= 0:
                return
            key = c.decode()
            if key in taken:
                continue
            taken.add(key)
            new_pop.append(c)
            count -= 1

    take(ranked_parents, q_pop // 8)
    take(unique_offspring, 5 * q_pop // 8)
    take(singles, q_pop // 8)
    take(doubles, q_pop // 8)
    return _refill(new_pop, q_pop, cfg, alphabet, groups, level, rng_refill)


def increase_complexity(pop: list[Chromosome], schedule, level: int) -> list[Chromosome]:
    """Move every chromosome to the next level's finer partition.

    Child groups inherit the parent's gene, so decoded sequences are
    unchanged across the transition.
    """
    new_groups = schedule[level + 1]
    out = []
    for c in pop:
        decoded = c.decode()
        genes = tuple(decoded[min(g)] for g in new_groups)
        out.append(Chromosome(c.k, new_groups, genes, level + 1))
    return out


def run_ga(cfg: GAConfig, ctx: FitnessContext | None = None) -> GAResult:
    """Full search: evolve through every complexity level, track the best."""
    if ctx is None:
        ctx = FitnessContext(cfg)
    schedule = group_schedule(cfg.k)
    pop = initial_population(cfg)
    history: list[dict] = []
    level_best: list[dict] = []
    best_key: tuple | None = None
    best_q = -np.inf

    def consider(c: Chromosome, q: float):
        nonlocal best_key, best_q
        key = c.decode()
        if q > best_q or (q == best_q and (best_key is None or key < best_key)):
            best_q, best_key = q, key

    for level in range(len(schedule)):
        qs = ctx.evaluate_all(pop)
        for c, q in zip(pop, qs):
            consider(c, q)
        t0 = cfg.t0
        if t0 is None:
            gap = (max(qs) - min(qs)) if len(qs) > 1 else 0.0
            t0 = max(gap, 10 * cfg.tf)  # equal likelihood across the level's start
        for alpha in range(cfg.n_generations):
            t = temperature(alpha, cfg, t0)
            pop = evolve_generation(pop, ctx, cfg, t, level, alpha)
            qs = ctx.evaluate_all(pop)
            gen_best = max(qs)
            for c, q in zip(pop, qs):
                consider(c, q)
            history.append({
                "level": level, "generation": alpha, "temperature": t,
                "best_q": float(gen_best), "mean_q": float(np.mean(qs)),
                "best_ever_q": float(best_q),
            })
        idx = int(np.argmax(qs))
        level_best.append({"level": level, "q": float(qs[idx]),
                           "sequence": " ".join(pop[idx].decode())})
        if level + 1 < len(schedule):
            pop = increase_complexity(pop, schedule, level)

    steps = tuple((cfg.tau_d, p) for p in best_key)
    best_seq = Sequence(steps, cfg.tau_d, name="ga-best")
    return GAResult(best_sequence=best_seq, best_fitness=float(best_q),
                    history=history, level_best=level_best)


# ---------------------------------------------------------------------------
# Config / log plumbing


def config_to_json(cfg: GAConfig) -> str:
    doc = {
        "K": cfg.k, "Q": cfg.q_pop,
        "model": {"kind": cfg.model.kind, "tau_p": cfg.model.tau_p,
                  "epsilon": cfg.model.epsilon},
        "J": cfg.j, "beta": cfg.beta, "tau_d": cfg.tau_d, "n_spins": cfg.n_spins,
        "bath_seeds": list(cfg.bath_seeds), "seed": cfg.seed,
        "T0": cfg.t0, "Tf": cfg.tf, "eta": cfg.eta, "lambda": cfg.lam,
        "alpha_c": cfg.alpha_c, "generations_per_level": cfg.generations_per_level,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def config_from_json(text: str) -> GAConfig:
    doc = json.loads(text)
    m = doc.get("model", {"kind": "ideal"})
    model = PulseModel(kind=m.get("kind", "ideal"), tau_p=m.get("tau_p"),
                       epsilon=m.get("epsilon"))
    return GAConfig(
        k=doc["K"], q_pop=doc.get("Q", 16), model=model,
        j=doc.get("J", 1e-3), beta=doc.get("beta", 1e-6),
        tau_d=doc.get("tau_d", 0.1), n_spins=doc.get("n_spins", 4),
        bath_seeds=tuple(doc.get("bath_seeds", [0])), seed=doc.get("seed", 0),
        t0=doc.get("T0"), tf=doc.get("Tf", 0.05), eta=doc.get("eta", 0.3),
        lam=doc.get("lambda", 3.0), alpha_c=doc.get("alpha_c"),
        generations_per_level=doc.get("generations_per_level"),
    )


def history_csv(result: GAResult) -> str:
    lines = ["level,generation,temperature,best_q,mean_q,best_ever_q"]
    for row in result.history:
        lines.append(f"{row['level']},{row['generation']},{row['temperature']!r},"
                     f"{row['best_q']!r},{row['mean_q']!r},{row['best_ever_q']!r}")
    return "\n".join(lines) + "\n"
