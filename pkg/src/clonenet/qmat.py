"""Dense linear algebra and quantum-state primitives.

Everything here works on plain numpy arrays. ``DensityMatrix`` is a thin,
read-only wrapper that pins a subsystem shape to a validated matrix; most
functions accept either a ``DensityMatrix`` or a bare square array plus
``dims``.

Subsystem indices are 0-based throughout this module. Entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-9
RANK_TOL = 1e-10
MAX_DIM = 2**10


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density matrix over subsystems of dimensions ``dims``."""

    data: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, data, dims: Sequence[int] | None = None, validate: bool = True):
        mat = np.array(data, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if dims is None:
            dims = _qubit_dims(mat.shape[0])
        dims = tuple(int(x) for x in dims)
        if any(x < 1 for x in dims) or int(np.prod(dims)) != mat.shape[0]:
            raise ValueError(f"dims {dims} do not match matrix dimension {mat.shape[0]}")
        if mat.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {mat.shape[0]} exceeds supported maximum {MAX_DIM}")
        if validate:
            check_density(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "data", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def num_subsystems(self) -> int:
        return len(self.dims)

    @classmethod
    def from_pure(cls, psi, dims: Sequence[int] | None = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(np.outer(psi, psi.conj()), dims)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def _qubit_dims(dim: int) -> tuple[int, ...]:
    n = int(round(np.log2(dim))) if dim > 0 else 0
    if dim > 1 and 2**n == dim:
        return (2,) * n
    return (dim,)


def _unwrap(rho, dims=None) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(rho, DensityMatrix):
        return rho.data, rho.dims
    mat = np.asarray(rho, dtype=complex)
    if dims is None:
        dims = _qubit_dims(mat.shape[0])
    return mat, tuple(int(x) for x in dims)


def check_density(mat: np.ndarray) -> None:
    """Raise ``ValueError`` unless ``mat`` is Hermitian, unit-trace and PSD."""
    if not np.all(np.isfinite(mat)):
        raise ValueError("density matrix has non-finite entries")
    herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if herm > HERMITIAN_TOL:
        raise ValueError(f"density matrix is not Hermitian (deviation {herm:.3e})")
    tr = np.trace(mat).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(mat).min()
    if lam_min < POSITIVITY_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3e}")


def _check_indices(idx: Iterable[int], n: int, what: str) -> list[int]:
    out = sorted({int(i) for i in idx})
    for i in out:
        if not 0 <= i < n:
            raise ValueError(f"{what} index {i} out of range for {n} subsystems")
    return out


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(mats: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace(rho, keep: Iterable[int], dims: Sequence[int] | None = None) -> DensityMatrix:
    """Reduced state on the subsystems in ``keep`` (kept in their original order)."""
    mat, dims = _unwrap(rho, dims)
    n = len(dims)
    keep = _check_indices(keep, n, "keep")
    drop = [i for i in range(n) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    dt = int(np.prod([dims[i] for i in drop]))
    t = mat.reshape(dims + dims)
    order = keep + drop + [n + i for i in keep] + [n + i for i in drop]
    t = t.transpose(order).reshape(dk, dt, dk, dt)
    red = np.einsum("ijkj->ik", t)
    return DensityMatrix(red, [dims[i] for i in keep] or [1], validate=False)


def permute_subsystems(rho, order: Sequence[int], dims: Sequence[int] | None = None) -> DensityMatrix:
    """Reorder subsystems so that new subsystem ``k`` is old subsystem ``order[k]``."""
    mat, dims = _unwrap(rho, dims)
    n = len(dims)
    order = [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} subsystems")
    t = mat.reshape(dims + dims).transpose(order + [n + i for i in order])
    new_dims = [dims[i] for i in order]
    d = mat.shape[0]
    return DensityMatrix(t.reshape(d, d), new_dims, validate=False)


def partial_transpose(rho, flip: Iterable[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """Transpose on the subsystems listed in ``flip`` only."""
    mat, dims = _unwrap(rho, dims)
    n = len(dims)
    flip = _check_indices(flip, n, "flip")
    axes = list(range(2 * n))
    for i in flip:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    d = mat.shape[0]
    return mat.reshape(dims + dims).transpose(axes).reshape(d, d)


def eig_hermitian(h, vectors: bool = False, tol: float = 1e-8):
    """Ascending eigenvalues of a Hermitian matrix, optionally with eigenvectors.

    Raises ``ValueError`` if ``h`` deviates from Hermiticity by more than ``tol``.
    """
    h = np.asarray(h.data if isinstance(h, DensityMatrix) else h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    h = 0.5 * (h + h.conj().T)
    if vectors:
        return np.linalg.eigh(h)
    return np.linalg.eigvalsh(h)


def entropy_from_spectrum(p) -> float:
    p = np.clip(np.real(np.asarray(p, dtype=float)), 0.0, None)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def entropy(rho, dims: Sequence[int] | None = None) -> float:
    """Von Neumann entropy in bits."""
    mat, _ = _unwrap(rho, dims)
    return entropy_from_spectrum(eig_hermitian(mat))


def fidelity_pure(psi, rho) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure state with a density matrix."""
    psi = np.asarray(psi, dtype=complex).ravel()
    mat, _ = _unwrap(rho)
    if psi.shape[0] != mat.shape[0]:
        raise ValueError(f"state dimension {psi.shape[0]} does not match density dimension {mat.shape[0]}")
    return float(np.real(psi.conj() @ mat @ psi))


def purify(rho, dims: Sequence[int] | None = None, tol: float = RANK_TOL) -> tuple[np.ndarray, int]:
    """Purification of ``rho`` on ``system ⊗ ancilla``.

    Returns the state vector (system index major) and the ancilla dimension,
    which equals the number of eigenvalues above ``tol``.
    """
    mat, _ = _unwrap(rho, dims)
    lam, vec = eig_hermitian(mat, vectors=True)
    keep = lam > tol
    lam, vec = lam[keep], vec[:, keep]
    psi = (vec * np.sqrt(lam)).reshape(-1)
    psi /= np.linalg.norm(psi)
    return psi, int(lam.size)


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm


def check_pure(psi, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValueError("state vector is not normalized")
    return psi


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random state vector."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
