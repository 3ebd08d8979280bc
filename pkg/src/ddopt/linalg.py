"""Dense complex linear algebra for small multi-spin Hilbert spaces.

Everything here operates on plain numpy arrays of shape (d, d) with
d = 2 * 2**n_spins <= 128.  Matrix exponentials and logarithms use spectral
routes (eigendecomposition / Schur), which are exact for the Hermitian and
unitary matrices that appear in this problem and give full control over the
logarithm branch.

A small extended-precision path (complex256 where the platform provides it)
is exposed through the ``dtype`` arguments.  It exists because distances of
well-decoupled sequences fall below what complex128 products can resolve;
the Taylor-with-squaring exponential keeps the propagation error near the
extended-precision epsilon.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

__all__ = [
    "BranchAmbiguityError",
    "NonHermitianError",
    "EXTENDED_DTYPE",
    "embed",
    "herm_expm",
    "expm_taylor",
    "unitary_logm",
    "sup_norm",
    "trace_norm",
    "frobenius_norm",
    "partial_trace_system",
    "polar_unitary",
    "require_hermitian",
]

# complex256 is x86 80-bit extended; fall back gracefully elsewhere.
EXTENDED_DTYPE = getattr(np, "complex256", np.complex128)

HERM_TOL = 1e-12
UNITARY_TOL = 1e-10
BRANCH_MARGIN = 1e-6


class NonHermitianError(ValueError):
    """Input failed the Hermiticity tolerance of a spectral routine."""


class BranchAmbiguityError(ArithmeticError):
    """A unitary has eigenphases too close to the log branch cut at +/- pi.

    The caller should shrink the cycle time until all eigenphases sit
    safely inside (-pi, pi); this is the numerical face of the Magnus
    convergence condition.
    """


def require_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Return the symmetrized (A + A^dag)/2, or raise if A is not Hermitian.

    The tolerance is relative to the largest entry magnitude (with a floor
    of 1 so the zero matrix passes).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    dev = float(np.max(np.abs(a - a.conj().T)))
    if dev > tol * scale:
        raise NonHermitianError(
            f"matrix deviates from Hermiticity by {dev:.3e} (tol {tol * scale:.3e})"
        )
    return (a + a.conj().T) / 2


def embed(op: np.ndarray, sites: int | tuple[int, ...], n_spins: int) -> np.ndarray:
    """Embed a 1- or 2-site operator into an n_spins tensor product.

    ``op`` is 2x2 for a single site or 4x4 for an ordered site pair, where
    the 4x4 operator's first tensor factor acts on ``sites[0]``.  Site 0 is
    the leftmost Kronecker factor of the full space.
    """
    if isinstance(sites, (int, np.integer)):
        sites = (int(sites),)
    else:
        sites = tuple(int(s) for s in sites)
    op = np.asarray(op, dtype=complex)
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site index in {sites}")
    for s in sites:
        if not 0 <= s < n_spins:
            raise ValueError(f"site {s} outside [0, {n_spins})")
    if op.shape != (2 ** len(sites),) * 2:
        raise ValueError(f"operator shape {op.shape} does not match {len(sites)} site(s)")

    if len(sites) == 1:
        factors = [np.eye(2)] * n_spins
        factors[sites[0]] = op
        out = factors[0]
        for f in factors[1:]:
            out = np.kron(out, f)
        return out

    # Two-site case: reshape to per-site indices and contract into place.
    i, j = sites
    full = np.zeros((2**n_spins, 2**n_spins), dtype=complex)
    op4 = op.reshape(2, 2, 2, 2)  # (i_out, j_out, i_in, j_in)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    if op4[a, b, c, d] == 0:
                        continue
                    factors = [np.eye(2)] * n_spins
                    ei = np.zeros((2, 2))
                    ei[a, c] = 1.0
                    ej = np.zeros((2, 2))
                    ej[b, d] = 1.0
                    factors[i] = ei
                    factors[j] = ej
                    term = factors[0]
                    for f in factors[1:]:
                        term = np.kron(term, f)
                    full += op4[a, b, c, d] * term
    return full


def herm_expm(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i H t) for Hermitian H, via eigendecomposition.

    The result is unitary to machine precision for any ||H|| t.
    """
    h = require_hermitian(h)
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * t)
    return (v * phases) @ v.conj().T


def expm_taylor(h: np.ndarray, t: float, dtype=EXTENDED_DTYPE) -> np.ndarray:
    """exp(-i H t) by scaling-and-squaring Taylor, in the requested dtype.

    Intended for the extended-precision propagation path; H is only assumed
    square (Hermiticity is not needed for correctness here).  The argument
    is scaled until its 1-norm is below 1/4, expanded to Taylor order 16,
    then squared back, so the truncation error sits far below the extended
    epsilon.
    """
    h = np.asarray(h)
    a = np.asarray(-1j * t, dtype=dtype) * h.astype(dtype)
    norm1 = float(np.max(np.sum(np.abs(a), axis=0)))
    squarings = 0
    if norm1 > 0.25:
        squarings = int(np.ceil(np.log2(norm1 / 0.25)))
        a = a / (2**squarings)
    eye = np.eye(h.shape[0], dtype=dtype)
    out = eye.copy()
    term = eye.copy()
    for k in range(1, 17):
        term = term @ a / dtype(k)
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def unitary_logm(u: np.ndarray) -> np.ndarray:
    """Principal Hermitian logarithm: H with exp(-i H) = U.

    Uses a complex Schur decomposition (exact for normal matrices) so that
    degenerate eigenphases do not degrade the eigenbasis.  Raises
    BranchAmbiguityError when any eigenphase comes within ``BRANCH_MARGIN``
    of +/- pi, where the principal branch stops being trustworthy.
    """
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    dev = sup_norm(u.conj().T @ u - np.eye(d))
    if dev > UNITARY_TOL:
        raise ValueError(f"matrix is not unitary (||U^dag U - I|| = {dev:.3e})")
    t, z = sla.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    if np.any(np.abs(phases) >= np.pi - BRANCH_MARGIN):
        raise BranchAmbiguityError(
            "eigenphase within margin of the +/- pi branch cut; shrink the cycle time"
        )
    h = (z * phases) @ z.conj().T
    return -require_hermitian(h, tol=1e-8)


def sup_norm(a: np.ndarray) -> float:
    """Largest singular value (the sup-operator norm)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a.astype(complex), 2))


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(a, dtype=complex), compute_uv=False)))


def frobenius_norm(a: np.ndarray) -> float:
    """Frobenius norm, computed dtype-agnostically (works for complex256)."""
    a = np.asarray(a)
    return float(np.sqrt(np.sum(a.real.astype(np.longdouble) ** 2 + a.imag.astype(np.longdouble) ** 2)))


def partial_trace_system(m: np.ndarray, d_s: int, d_b: int) -> np.ndarray:
    """Trace out the system (first) tensor factor of a d_s*d_b matrix."""
    m = np.asarray(m)
    if m.shape != (d_s * d_b, d_s * d_b):
        raise ValueError(f"matrix shape {m.shape} does not match d_s*d_b = {d_s * d_b}")
    r = m.reshape(d_s, d_b, d_s, d_b)
    out = r[0, :, 0, :].copy()
    for i in range(1, d_s):
        out = out + r[i, :, i, :]
    return out


def polar_unitary(a: np.ndarray) -> np.ndarray:
    """Unitary polar factor W V^dag from the SVD A = W S V^dag."""
    w, _, vh = np.linalg.svd(np.asarray(a, dtype=complex))
    return w @ vh
