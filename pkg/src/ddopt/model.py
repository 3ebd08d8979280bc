"""System model: random spin-bath Hamiltonian and faulty control pulses.

The internal Hamiltonian is H0 = H_err + I_S (x) H_B, where H_err collects
the pure-system and system-bath couplings (its sup norm is the interaction
strength J, in rad/ns) and H_B is the bath-only part (sup norm beta).  Bath
operators are built from uniform-random two-body couplings on a small spin
bath, drawn from a counter-based stream so a (seed, n_spins) pair always
reproduces the same realization regardless of iteration order.

Four pulse models generate the unitary for each symbol of the 7-label
alphabet {I, X, Y, Z, Xb, Yb, Zb}; the "b" labels are 180-degree
phase-reversed (amplitude-negated) pulses.

Unit convention: angular frequencies in rad/ns and times in ns throughout,
with no 2*pi folded in ("J = 1 MHz" enters as 1e-3 rad/ns).  Only the
dimensionless products J*tau, beta*tau, J*tau_p and epsilon matter to any
of the reported quantities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .linalg import EXTENDED_DTYPE, embed, expm_taylor, herm_expm, sup_norm

__all__ = [
    "PAULI",
    "PAULI_AXES",
    "LABELS",
    "BARRED",
    "BathSpec",
    "SystemModel",
    "PulseModel",
    "bath_coefficients",
    "bath_operators_from_coeffs",
    "build_bath_operators",
    "assemble",
    "build_model",
    "pulse_set",
    "pulse_unitary",
    "pulse_table",
    "model_to_json",
    "model_from_json",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_AXES = ("I", "x", "y", "z")

LABELS = ("I", "X", "Y", "Z", "Xb", "Yb", "Zb")
BARRED = {"Xb": "X", "Yb": "Y", "Zb": "Z"}


def label_axis(label: str) -> str:
    """Pauli axis ('I', 'x', 'y' or 'z') of a pulse label, bars ignored."""
    base = BARRED.get(label, label)
    if base not in ("I", "X", "Y", "Z"):
        raise ValueError(f"unknown pulse label {label!r}")
    return base.lower() if base != "I" else "I"


@dataclass(frozen=True)
class BathSpec:
    """Parameters of one bath realization.

    J may be zero only for deliberately degenerate models (H_err = 0);
    every physical configuration uses J > 0.
    """

    n_spins: int = 4
    seed: int = 0
    J: float = 1e-3
    beta: float = 1e-6

    def __post_init__(self):
        if self.n_spins not in (4, 6):
            raise ValueError(f"n_spins must be 4 or 6, got {self.n_spins}")
        if self.J < 0 or self.beta < 0:
            raise ValueError("J and beta must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class SystemModel:
    """Assembled Hamiltonian blocks for one bath realization."""

    spec: BathSpec
    H_err: np.ndarray      # d_S*d_B, sup norm J
    H_B: np.ndarray        # d_B only, sup norm beta
    H_B_full: np.ndarray   # I_S (x) H_B
    H0: np.ndarray         # H_err + H_B_full

    @property
    def d_s(self) -> int:
        return 2

    @property
    def d_b(self) -> int:
        return 2**self.spec.n_spins

    @property
    def dim(self) -> int:
        return self.d_s * self.d_b


def bath_coefficients(n_spins: int, seed: int) -> np.ndarray:
    """Uniform[0,1] couplings c[mu, i, j, alpha, beta], zero on i == j.

    Each coefficient comes from its own Philox stream keyed by
    (seed; mu, i, j, alpha, beta), so the draw is independent of the order
    in which anything iterates over the array.
    """
    c = np.zeros((4, n_spins, n_spins, 4, 4))
    for mu in range(4):
        for i in range(n_spins):
            for j in range(n_spins):
                if i == j:
                    continue
                ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(mu, i, j))
                block = np.random.Generator(np.random.Philox(ss)).random(16)
                c[mu, i, j] = block.reshape(4, 4)
    return c


def bath_operators_from_coeffs(n_spins: int, coeffs: np.ndarray) -> dict[str, np.ndarray]:
    """Assemble B_mu = sum_{i != j} c^mu_{ab,ij} sigma^a_i sigma^b_j.

    Exposed separately from build_bath_operators so tests can force
    specific coefficient patterns (including bath sizes outside {4, 6}).
    """
    d_b = 2**n_spins
    ops = {}
    pair_terms: dict[tuple, np.ndarray] = {}
    for mu_idx, mu in enumerate(PAULI_AXES):
        b = np.zeros((d_b, d_b), dtype=complex)
        for i in range(n_spins):
            for j in range(n_spins):
                if i == j:
                    continue
                for a_idx, a in enumerate(PAULI_AXES):
                    for b_idx, bb in enumerate(PAULI_AXES):
                        cc = coeffs[mu_idx, i, j, a_idx, b_idx]
                        if cc == 0.0:
                            continue
                        key = (i, j, a_idx, b_idx)
                        term = pair_terms.get(key)
                        if term is None:
                            term = embed(np.kron(PAULI[a], PAULI[bb]), (i, j), n_spins)
                            pair_terms[key] = term
                        b += cc * term
        ops[mu] = b
    return ops


def build_bath_operators(spec: BathSpec, coeffs: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Bath operators B_I, B_x, B_y, B_z for the given spec."""
    if coeffs is None:
        coeffs = bath_coefficients(spec.n_spins, spec.seed)
    return bath_operators_from_coeffs(spec.n_spins, coeffs)


def assemble(spec: BathSpec, bath_ops: dict[str, np.ndarray]) -> SystemModel:
    """Normalize the raw bath operators into a SystemModel.

    The raw error Hamiltonian sum_{mu in xyz} sigma^mu (x) B_mu is rescaled
    as a whole so its sup norm is exactly J; the bath term is B_I with its
    identity component removed (a pure global phase) rescaled to beta.
    """
    d_b = 2**spec.n_spins
    raw_err = np.zeros((2 * d_b, 2 * d_b), dtype=complex)
    for mu in ("x", "y", "z"):
        raw_err += np.kron(PAULI[mu], bath_ops[mu])
    raw_bath = bath_ops["I"] - (np.trace(bath_ops["I"]) / d_b) * np.eye(d_b)

    def rescale(raw, target, what):
        if target == 0.0:
            return np.zeros_like(raw)
        norm = sup_norm(raw)
        if norm == 0.0:
            raise ValueError(f"raw {what} operator vanishes but target strength is {target}")
        return (target / norm) * raw

    h_err = rescale(raw_err, spec.J, "error")
    h_b = rescale(raw_bath, spec.beta, "bath")
    h_b_full = np.kron(PAULI["I"], h_b)
    return SystemModel(spec=spec, H_err=h_err, H_B=h_b, H_B_full=h_b_full, H0=h_err + h_b_full)


def build_model(spec: BathSpec) -> SystemModel:
    return assemble(spec, build_bath_operators(spec))


@dataclass(frozen=True)
class PulseModel:
    """Which error mechanism generates pulse unitaries.

    kind is one of 'ideal', 'finite-width', 'flip-angle',
    'finite-width-flip-angle'; tau_p (ns) and epsilon apply where the kind
    requires them.  Positive epsilon is an over-rotation, negative an
    under-rotation.
    """

    kind: str = "ideal"
    tau_p: float | None = None
    epsilon: float | None = None

    KINDS = ("ideal", "finite-width", "flip-angle", "finite-width-flip-angle")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown pulse model kind {self.kind!r}")
        if self.kind in ("finite-width", "finite-width-flip-angle"):
            if self.tau_p is None or self.tau_p <= 0:
                raise ValueError(f"{self.kind} requires tau_p > 0")
        if self.kind in ("flip-angle", "finite-width-flip-angle"):
            if self.epsilon is None or not -1 < self.epsilon < 1:
                raise ValueError(f"{self.kind} requires epsilon in (-1, 1)")

    @classmethod
    def ideal(cls) -> "PulseModel":
        return cls("ideal")

    @classmethod
    def finite_width(cls, tau_p: float) -> "PulseModel":
        return cls("finite-width", tau_p=tau_p)

    @classmethod
    def flip_angle(cls, epsilon: float) -> "PulseModel":
        return cls("flip-angle", epsilon=epsilon)

    @classmethod
    def finite_width_flip_angle(cls, tau_p: float, epsilon: float) -> "PulseModel":
        return cls("finite-width-flip-angle", tau_p=tau_p, epsilon=epsilon)

    @property
    def has_width(self) -> bool:
        return self.kind in ("finite-width", "finite-width-flip-angle")


def pulse_set(model: PulseModel) -> tuple[str, ...]:
    """The search alphabet for a pulse model.

    Ideal pulses need no phase reversals; the flip-angle alphabet drops I
    (an error-free wait adds nothing to that search space); the
    finite-width models use all seven symbols.
    """
    if model.kind == "ideal":
        return ("I", "X", "Y", "Z")
    if model.kind == "flip-angle":
        return ("X", "Y", "Z", "Xb", "Yb", "Zb")
    return LABELS


def pulse_unitary(label: str, model: PulseModel, sys: SystemModel) -> tuple[np.ndarray, float]:
    """Unitary and elapsed time (ns) for one pulse under a given model.

    Beyond the search alphabet, every model also accepts the labels needed
    to execute deterministic families: barred labels under 'ideal' map to
    the unbarred operator times a global phase, and 'I' under 'flip-angle'
    is an exact zero-width identity (there is no rotation to mis-rotate).
    """
    if label not in LABELS:
        raise ValueError(f"unknown pulse label {label!r}")
    d_b = sys.d_b
    eye = np.eye(2 * d_b, dtype=complex)
    axis = label_axis(label)
    barred = label in BARRED

    if model.kind == "ideal":
        if axis == "I":
            return eye, 0.0
        u = np.kron(-1j * PAULI[axis], np.eye(d_b))
        return (-u if barred else u), 0.0

    if model.kind == "flip-angle":
        if axis == "I":
            return eye, 0.0
        angle = (np.pi / 2) * (1 + model.epsilon)
        u2 = herm_expm(angle * PAULI[axis], 1.0)
        if barred:
            u2 = u2.conj().T
        return np.kron(u2, np.eye(d_b)), 0.0

    # Finite-width kinds: H0 acts during the rectangular pulse.
    tau_p = model.tau_p
    if axis == "I":
        return herm_expm(sys.H0, tau_p), tau_p
    amp = np.pi / (2 * tau_p)
    if model.kind == "finite-width-flip-angle":
        amp *= 1 + model.epsilon
    sign = -1.0 if barred else 1.0
    h = sign * amp * np.kron(PAULI[axis], np.eye(d_b)) + sys.H0
    return herm_expm(h, tau_p), tau_p


def pulse_table(model: PulseModel, sys: SystemModel, labels: Iterable[str] = LABELS,
                dtype=None) -> dict[str, tuple[np.ndarray, float]]:
    """Precompute (unitary, elapsed) for a set of labels.

    With a dtype of complex256 the finite-width unitaries are recomputed by
    the extended Taylor exponential so the high-precision propagation path
    is not limited by double-precision pulse operators.
    """
    table = {}
    for label in labels:
        u, dt = pulse_unitary(label, model, sys)
        if dtype is not None and dtype != np.complex128:
            if model.has_width and label_axis(label) == "I":
                u = expm_taylor(sys.H0, model.tau_p, dtype=dtype)
            elif model.has_width:
                amp = np.pi / (2 * model.tau_p)
                if model.kind == "finite-width-flip-angle":
                    amp *= 1 + model.epsilon
                sign = -1.0 if label in BARRED else 1.0
                h = sign * amp * np.kron(PAULI[label_axis(label)], np.eye(sys.d_b)) + sys.H0
                u = expm_taylor(h, model.tau_p, dtype=dtype)
            else:
                u = u.astype(dtype)
        table[label] = (u, dt)
    return table


def model_to_json(sys: SystemModel, include_matrices: bool = False) -> str:
    """Serialize a SystemModel for exact experiment replay."""
    doc = {
        "n_spins": sys.spec.n_spins,
        "seed": int(sys.spec.seed),
        "J": sys.spec.J,
        "beta": sys.spec.beta,
    }
    if include_matrices:
        def mat(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]
        doc["matrices"] = {"H_err": mat(sys.H_err), "H_B": mat(sys.H_B)}
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> SystemModel:
    doc = json.loads(text)
    spec = BathSpec(n_spins=doc["n_spins"], seed=doc["seed"], J=doc["J"], beta=doc["beta"])
    sys = build_model(spec)
    if "matrices" in doc:
        h_err = np.array([[complex(re, im) for re, im in row] for row in doc["matrices"]["H_err"]])
        if sup_norm(h_err - sys.H_err) > 1e-9 * max(1.0, spec.J):
            raise ValueError("stored matrices disagree with the rebuilt model")
    return sys
