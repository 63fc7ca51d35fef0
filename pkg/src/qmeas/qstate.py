"""Dense density-operator algebra on finite tensor-product Hilbert spaces.

Conventions used throughout the package: hbar = 1 (times are in units of
hbar/energy), entropies in nats (k_B = 1). States and observables are dense
complex matrices validated on construction; invariant violations raise
ValidationError instead of being silently repaired.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_MIN_EIG = -1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)
for _p in PAULI:
    _p.setflags(write=False)


def _as_complex_matrix(matrix, what: str) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {m.shape}")
    return m


def _check_hermitian(m: np.ndarray, what: str) -> None:
    dev = float(np.abs(m - m.conj().T).max()) if m.size else 0.0
    if dev > HERMITIAN_TOL:
        raise ValidationError(f"{what} is not Hermitian: max |M - M^dag| = {dev:.3e}")


def hermitian_eigvalsh(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending; cheap path for diagonal input."""
    d = np.diagonal(m)
    if not np.any(m - np.diag(d)):
        return np.sort(d.real)
    return np.linalg.eigvalsh(m)


@dataclass(frozen=True)
class DensityOperator:
    """A state: Hermitian, unit-trace, positive-semidefinite complex matrix.

    Parameters
    ----------
    matrix : array_like
        The dim x dim density matrix.
    subsystem_dims : tuple of int, optional
        Ordered tensor-factor dimensions; their product must equal dim.
        Defaults to the single factor (dim,).
    """

    matrix: np.ndarray
    subsystem_dims: tuple = ()

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix, "density matrix")
        dim = m.shape[0]
        dims = tuple(int(d) for d in self.subsystem_dims) or (dim,)
        if any(d < 1 for d in dims) or int(np.prod(dims)) != dim:
            raise ValidationError(
                f"subsystem_dims {dims} do not multiply to dim {dim}")
        _check_hermitian(m, "density matrix")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace {tr} differs from 1 beyond {TRACE_TOL}")
        min_eig = float(hermitian_eigvalsh(m)[0])
        if min_eig < PSD_MIN_EIG:
            raise ValidationError(
                f"state is not positive semidefinite: min eigenvalue {min_eig:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Observable:
    """A Hermitian operator on a finite-dimensional space."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix, "observable")
        _check_hermitian(m, "observable")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# constructors

def pure_state(amplitudes: Sequence[complex], subsystem_dims: tuple = ()) -> DensityOperator:
    """|psi><psi| from a ket; the ket is normalized (zero vector is an error)."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValidationError("cannot build a pure state from the zero vector")
    v = v / norm
    return DensityOperator(np.outer(v, v.conj()), subsystem_dims)


def bloch_state(v) -> DensityOperator:
    """Qubit state (I + v . sigma)/2 from a Bloch vector with |v| <= 1."""
    v = np.asarray(v, dtype=float).reshape(3)
    if np.linalg.norm(v) > 1.0 + 1e-12:
        raise ValidationError(f"Bloch vector norm {np.linalg.norm(v)} exceeds 1")
    m = 0.5 * (np.eye(2, dtype=complex)
               + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)
    return DensityOperator(m)


def bloch_vector(state: DensityOperator) -> np.ndarray:
    """(Tr D sigma_x, Tr D sigma_y, Tr D sigma_z) of a qubit state."""
    if state.dim != 2:
        raise ValidationError("Bloch vector is defined for qubit states only")
    return np.array([qexpect(state, Observable(p)) for p in PAULI])


def maximally_mixed(dim: int, subsystem_dims: tuple = ()) -> DensityOperator:
    return DensityOperator(np.eye(dim, dtype=complex) / dim, subsystem_dims)


def tensor(*factors):
    """Kronecker product of states (or of observables), left to right.

    For DensityOperator inputs the subsystem dimension lists concatenate.
    """
    if not factors:
        raise ValidationError("tensor needs at least one factor")
    if all(isinstance(f, DensityOperator) for f in factors):
        m = factors[0].matrix
        dims = list(factors[0].subsystem_dims)
        for f in factors[1:]:
            m = np.kron(m, f.matrix)
            dims.extend(f.subsystem_dims)
        return DensityOperator(m, tuple(dims))
    if all(isinstance(f, Observable) for f in factors):
        m = factors[0].matrix
        for f in factors[1:]:
            m = np.kron(m, f.matrix)
        return Observable(m)
    raise ValidationError("tensor factors must be all states or all observables")


# ---------------------------------------------------------------------------
# operations

def qexpect(state: DensityOperator, obs: Observable) -> float:
    """q-expectation Tr(D O); the imaginary residue must be below 1e-12."""
    if state.dim != obs.dim:
        raise ValidationError(f"dimension mismatch: state {state.dim}, obs {obs.dim}")
    val = complex(np.einsum("ij,ji->", state.matrix, obs.matrix))
    if abs(val.imag) > 1e-12:
        raise ValidationError(f"imaginary residue {val.imag:.3e} in expectation value")
    return float(val.real)


def evolve_unitary(state: DensityOperator, hamiltonian: Observable, t: float) -> DensityOperator:
    """U D U^dag with U = exp(-i H t), H time-independent (hbar = 1)."""
    if state.dim != hamiltonian.dim:
        raise ValidationError("dimension mismatch between state and Hamiltonian")
    evals, vecs = np.linalg.eigh(hamiltonian.matrix)
    phases = np.exp(-1j * evals * t)
    u = (vecs * phases) @ vecs.conj().T
    return DensityOperator(u @ state.matrix @ u.conj().T, state.subsystem_dims)


def partial_trace(state: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """Marginal state on the tensor factors listed in `keep` (original order)."""
    dims = state.subsystem_dims
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValidationError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"keep {keep} out of range for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    m = state.matrix.reshape(*dims, *dims)
    nleft = n
    for i in reversed(traced):
        m = np.trace(m, axis1=i, axis2=i + nleft)
        nleft -= 1
    kept_dims = tuple(dims[i] for i in keep)
    d = int(np.prod(kept_dims))
    return DensityOperator(m.reshape(d, d), kept_dims)


def merge(parts: Sequence[tuple]) -> DensityOperator:
    """Count-weighted mixture: N D = sum_k N_k D_k over (count, state) pairs."""
    if not parts:
        raise ValidationError("merge needs at least one (count, state) pair")
    counts = []
    states = []
    for count, state in parts:
        if int(count) != count or count <= 0:
            raise ValidationError(f"counts must be positive integers, got {count}")
        counts.append(int(count))
        states.append(state)
    dim = states[0].dim
    dims = states[0].subsystem_dims
    if any(s.dim != dim or s.subsystem_dims != dims for s in states):
        raise ValidationError("merge requires identical state dimensions")
    total = sum(counts)
    m = sum(c * s.matrix for c, s in zip(counts, states)) / total
    return DensityOperator(m, dims)


def vn_entropy(state: DensityOperator) -> float:
    """von Neumann entropy -Tr D ln D in nats, with 0 ln 0 = 0."""
    evals = np.clip(hermitian_eigvalsh(state.matrix), 0.0, 1.0)
    evals = evals[evals > 0.0]
    return max(0.0, float(-np.sum(evals * np.log(evals))))


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """(1/2) ||A - B||_1 via the spectrum of the Hermitian difference."""
    if a.dim != b.dim:
        raise ValidationError("dimension mismatch in trace distance")
    return 0.5 * float(np.abs(hermitian_eigvalsh(a.matrix - b.matrix)).sum())
