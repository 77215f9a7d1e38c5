"""Dense complex linear algebra for small quantum causal models.

Everything here works on plain 2-D ``numpy`` arrays of ``complex128``;
dimensions never exceed a few tens, so all checks use full dense
eigen-decompositions rather than factorizations that misbehave on the
semidefinite boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPhysicalInput,
    NotHermitian,
    NotInvolutory,
    ValidationResult,
)

HERMITICITY_TOL = 1e-9

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NonPhysicalInput("matrix has non-finite entries")
    return a


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def dm(vector: np.ndarray) -> np.ndarray:
    """Density matrix |v><v| of a (normalized) state vector."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def kron(a, b) -> np.ndarray:
    """Kronecker product; kron(a, identity(1)) == a."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def trace_product(state, effect, tol: float = HERMITICITY_TOL) -> float:
    """Outcome probability Re(Tr(state @ effect)), clamped to [0, 1].

    Raises NonPhysicalInput when the trace has a significant imaginary
    part or lies outside [-tol, 1 + tol].
    """
    s = as_matrix(state)
    e = as_matrix(effect)
    if s.shape != e.shape or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"state {s.shape} vs effect {e.shape}")
    tr = np.trace(s @ e)
    if abs(tr.imag) > tol:
        raise NonPhysicalInput(f"imaginary trace component {tr.imag:.3e}")
    p = tr.real
    if p < -tol or p > 1.0 + tol:
        raise NonPhysicalInput(f"probability {p!r} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def dichotomic_effects(obs, tol: float = HERMITICITY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Effects ((1 + obs)/2, (1 - obs)/2) of a +-1-valued observable.

    Outcome o in {0, 1} maps to (1 + (-1)^o obs)/2.
    """
    o = as_matrix(obs)
    n = o.shape[0]
    if o.shape[0] != o.shape[1]:
        raise DimensionMismatch("observable must be square")
    if not is_hermitian(o, tol):
        raise NotHermitian("observable is not Hermitian")
    if np.max(np.abs(o @ o - identity(n))) > tol:
        raise NotInvolutory("observable squared is not the identity")
    eye = identity(n)
    return (eye + o) / 2.0, (eye - o) / 2.0


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2.0)[0])


def is_psd(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return min_eigenvalue(m) >= -tol


def validate_state(m, tol: float = HERMITICITY_TOL) -> ValidationResult:
    """Check Hermiticity, unit trace and positive semidefiniteness."""
    a = as_matrix(m)
    failures: list[str] = []
    if a.shape[0] != a.shape[1]:
        return ValidationResult(False, [f"square: shape {a.shape} is not square"])
    if not is_hermitian(a, tol):
        failures.append(f"hermitian: max |m - m^dag| = {np.max(np.abs(a - a.conj().T)):.3e}")
    tr = np.trace(a)
    if abs(tr - 1.0) > tol:
        failures.append(f"unit_trace: trace = {tr:.12g}")
    lo = min_eigenvalue(a)
    if lo < -tol:
        failures.append(f"psd: min eigenvalue = {lo:.3e}")
    return ValidationResult.collect(failures)


def embed(op: np.ndarray, positions: list[int], dims: list[int]) -> np.ndarray:
    """Embed ``op`` acting on the subsystems at ``positions`` into the
    full tensor-product space with factor dimensions ``dims``.

    ``op`` must act on the tensor product of the selected factors taken
    in the order given by ``positions`` (which must be increasing, i.e.
    global order).
    """
    n = len(dims)
    positions = list(positions)
    sub = [dims[p] for p in positions]
    rest = [i for i in range(n) if i not in positions]
    restdim = int(np.prod([dims[i] for i in rest], dtype=np.int64)) if rest else 1
    op = as_matrix(op)
    if op.shape != (int(np.prod(sub)), int(np.prod(sub))):
        raise DimensionMismatch(
            f"operator shape {op.shape} does not match subsystem dims {sub}"
        )
    full = np.kron(op, identity(restdim))
    # Current tensor-factor order is positions + rest; permute back to 0..n-1.
    order = positions + rest
    perm = [order.index(i) for i in range(n)]
    t = full.reshape([dims[i] for i in order] * 2)
    t = t.transpose(perm + [n + p for p in perm])
    d = int(np.prod(dims, dtype=np.int64))
    return np.ascontiguousarray(t.reshape(d, d))
