"""Bužek–Hillery symmetric cloning machines for one input and two or three copies.

A machine is fixed by the input dimension ``M``, the number of copies and the
real amplitude ``d`` on the cross terms; the direct-copy amplitude ``c`` follows
from unitarity.  For basis input ``|i>`` the two-copy machine produces::

    c |i>|i>|X_ii> + d sum_{j != i} (|i>|j> + |j>|i>) |Y_ij>

and the three-copy machine::

    c |i>|i>|i>|X_ii> + d sum_{j,k != i} (all six slot orderings of i,j,k) |Y_ijk>

where the sum runs over ordered ``(j, k)`` including ``j == k``.

Two conventions for the machine kets are supported:

``"shared"`` (default)
    The machine is a register whose basis states are labelled by the indices
    written into the blank ports: ``X_ii -> |i>``, ``Y_ij -> |j>`` for two
    copies and ``X_ii -> |i,i>``, ``Y_ijk -> |j,k>`` for three copies.  For two
    copies this is the M-dimensional universal machine and gives the
    state-independent fidelity ``(M + 3) / (2 (M + 1))`` at ``d**2 = 1/(2(M+1))``.
``"distinct"``
    Every tag ``X_ii``, ``Y_ij``, ``Y_ijk`` gets its own orthonormal machine
    state.  Different inputs then decohere completely and the clones carry no
    coherence between basis states.

Both conventions share the normalization ``c**2 + weight(M, copies) d**2 = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, InvariantError
from .qmat import DensityMatrix, _qubit_dims, check_pure, fidelity_pure, partial_trace

MACHINE_KINDS = ("shared", "distinct")
GRAM_TOL = 1e-10


def _check_copies(copies: int) -> None:
    if copies not in (2, 3):
        raise ValueError(f"copies must be 2 or 3, got {copies}")


def _check_M(M: int) -> None:
    if int(M) != M or M < 2:
        raise ValueError(f"input dimension must be an integer >= 2, got {M}")


def weight(M: int, copies: int) -> int:
    """Coefficient of ``d**2`` in the unitarity constraint."""
    _check_M(M)
    _check_copies(copies)
    if copies == 2:
        return 2 * (M - 1)
    return 6 * (M - 1) * (M - 2) + 12 * (M - 1)


def d_max(M: int, copies: int) -> float:
    """Largest machine parameter, where the direct-copy amplitude ``c`` vanishes."""
    return float(np.sqrt(1.0 / weight(M, copies)))


def machine_dim(M: int, copies: int, machine: str = "shared") -> int:
    """Dimension of the machine register after the transformation."""
    _check_M(M)
    _check_copies(copies)
    if machine == "distinct":
        return M + M * (M - 1) if copies == 2 else M + M * (M - 1) ** 2
    if machine == "shared":
        return len(_shared_labels(M, copies))
    raise ValueError(f"unknown machine convention {machine!r}")


def _shared_labels(M: int, copies: int) -> list[tuple[int, ...]]:
    if copies == 2:
        return [(i,) for i in range(M)]
    # pairs (j, k) with j != k need a third index distinct from both
    return [(j, k) for j in range(M) for k in range(M) if j == k or M >= 3]


def normalization(M: int, copies: int, d: float) -> float:
    """Direct-copy amplitude ``c`` for machine parameter ``d``.

    Raises ``DomainError`` when ``d`` is negative or beyond ``d_max``.
    """
    w = weight(M, copies)
    if d < 0:
        raise DomainError(f"machine parameter d={d} must be non-negative")
    c2 = 1.0 - w * d * d
    if c2 < -1e-12:
        raise DomainError(f"machine parameter d={d} exceeds d_max={d_max(M, copies):.12g} for M={M}, copies={copies}")
    return float(np.sqrt(max(c2, 0.0)))


@dataclass(frozen=True)
class MachineSpec:
    M: int
    copies: int
    d: float
    machine: str = "shared"

    def __post_init__(self):
        if self.machine not in MACHINE_KINDS:
            raise ValueError(f"unknown machine convention {self.machine!r}")
        normalization(self.M, self.copies, self.d)

    @property
    def c(self) -> float:
        return normalization(self.M, self.copies, self.d)

    @property
    def d_max(self) -> float:
        return d_max(self.M, self.copies)


@dataclass(frozen=True)
class CloneIsometry:
    """Isometry ``V: C^M -> (C^M)^{⊗copies} ⊗ C^K``.

    Row index is ``slots * K + machine`` with the clone slots in C order.
    ``machine_tags[k]`` lists the Bužek–Hillery kets mapped to machine state ``k``.
    """

    spec: MachineSpec
    matrix: np.ndarray
    machine_dim: int
    slot_dims: tuple[int, ...]
    machine_tags: tuple[tuple[str, ...], ...] = field(repr=False)

    @property
    def M(self) -> int:
        return self.spec.M

    @property
    def copies(self) -> int:
        return self.spec.copies


def _terms(M: int, copies: int, i: int):
    """Yield ``(slots, amplitude_kind, tag)`` for the image of basis state ``i``."""
    yield (i,) * copies, "c", ("X", i, i)
    others = [j for j in range(M) if j != i]
    if copies == 2:
        for j in others:
            yield (i, j), "d", ("Y", i, j)
            yield (j, i), "d", ("Y", i, j)
    else:
        for j, k in itertools.product(others, others):
            for perm in itertools.permutations((i, j, k)):
                yield perm, "d", ("Y", i, j, k)


def _shared_key(tag: tuple, copies: int) -> tuple[int, ...]:
    if copies == 2:
        return (tag[1],) if tag[0] == "X" else (tag[2],)
    return (tag[1], tag[1]) if tag[0] == "X" else (tag[2], tag[3])


def _tag_name(tag: tuple) -> str:
    return f"{tag[0]}_" + "".join(str(x) for x in tag[1:])


def build_isometry(spec: MachineSpec) -> CloneIsometry:
    """Explicit isometry matrix for ``spec``; checks ``V^dag V = I`` before returning."""
    M, n = spec.M, spec.copies
    c, d = spec.c, spec.d
    keys: dict = {}
    if spec.machine == "shared":
        for lab in _shared_labels(M, n):
            keys[lab] = len(keys)
    tags: dict[int, list[str]] = {}
    entries = []
    for i in range(M):
        for slots, kind, tag in _terms(M, n, i):
            key = _shared_key(tag, n) if spec.machine == "shared" else tag
            if key not in keys:
                keys[key] = len(keys)
            k = keys[key]
            name = _tag_name(tag)
            bucket = tags.setdefault(k, [])
            if name not in bucket:
                bucket.append(name)
            entries.append((slots, c if kind == "c" else d, k, i))
    K = len(keys)
    V = np.zeros((M**n * K, M), dtype=complex)
    for slots, amp, k, i in entries:
        row = int(np.ravel_multi_index(slots, (M,) * n)) * K + k
        V[row, i] += amp
    gram = V.conj().T @ V
    err = np.linalg.norm(gram - np.eye(M))
    if err > GRAM_TOL:
        raise InvariantError(f"cloning map is not an isometry: ||V^dag V - I||_F = {err:.3e}")
    V.setflags(write=False)
    return CloneIsometry(
        spec=spec,
        matrix=V,
        machine_dim=K,
        slot_dims=(M,) * n,
        machine_tags=tuple(tuple(tags.get(k, ())) for k in range(K)),
    )


def apply_cloner(
    iso: CloneIsometry, state, target: int, dims: Sequence[int]
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Apply ``I_rest ⊗ V`` to subsystem ``target`` of a pure state.

    The target subsystem is replaced in place by the clone slots and the machine
    register is appended as the last subsystem.  Returns the new state vector
    and its subsystem dimensions.
    """
    psi = check_pure(state)
    dims = tuple(int(x) for x in dims)
    if int(np.prod(dims)) != psi.size:
        raise ValueError(f"dims {dims} do not match state of length {psi.size}")
    if not 0 <= target < len(dims):
        raise ValueError(f"target {target} out of range for {len(dims)} subsystems")
    if dims[target] != iso.M:
        raise ValueError(f"target dimension {dims[target]} does not match cloner input dimension {iso.M}")
    n, K = iso.copies, iso.machine_dim
    # move target to the front, act with V, then restore order
    t = np.moveaxis(psi.reshape(dims), target, 0).reshape(iso.M, -1)
    out = (iso.matrix @ t).reshape((iso.M,) * n + (K,) + tuple(d for j, d in enumerate(dims) if j != target))
    # current axes: clones..., machine, rest...
    rest = [j for j in range(len(dims)) if j != target]
    before = [r for r in rest if r < target]
    after = [r for r in rest if r > target]
    rest_axes = {r: n + 1 + idx for idx, r in enumerate(rest)}
    order = [rest_axes[r] for r in before] + list(range(n)) + [rest_axes[r] for r in after] + [n]
    out = out.transpose(order)
    new_dims = tuple(dims[r] for r in before) + (iso.M,) * n + tuple(dims[r] for r in after) + (K,)
    return out.reshape(-1), new_dims


def clone_output_density(spec: MachineSpec, state, iso: CloneIsometry | None = None) -> DensityMatrix:
    """State of the clone register with the machine traced out.

    Dimensions are reported per qubit when ``M`` is a power of two.
    """
    iso = build_isometry(spec) if iso is None else iso
    psi = check_pure(state)
    if psi.size != spec.M:
        raise ValueError(f"input has dimension {psi.size}, machine expects {spec.M}")
    out = (iso.matrix @ psi).reshape(-1, iso.machine_dim)
    rho = out @ out.conj().T
    dims = []
    for _ in range(spec.copies):
        dims.extend(_qubit_dims(spec.M))
    return DensityMatrix(rho, dims)


def single_clone_state(spec: MachineSpec, state, slot: int = 0, iso: CloneIsometry | None = None) -> DensityMatrix:
    rho = clone_output_density(spec, state, iso)
    return partial_trace(rho.data, [slot], dims=[spec.M] * spec.copies)


def clone_fidelity(spec: MachineSpec, state, slot: int = 0, iso: CloneIsometry | None = None) -> float:
    """Fidelity of one clone with the input state."""
    psi = check_pure(state)
    return fidelity_pure(psi, single_clone_state(spec, psi, slot, iso))


@dataclass(frozen=True)
class UniversalPoint:
    d: float
    fidelity: float
    spread: float
    converged: bool


def fidelity_sample(M: int, samples: int = 200, seed: int = 20240607) -> np.ndarray:
    """Fixed pseudo-random sample of Haar input states, one per row."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(samples, M)) + 1j * rng.normal(size=(samples, M))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _fidelities(M: int, copies: int, d: float, states: np.ndarray, machine: str) -> np.ndarray:
    iso = build_isometry(MachineSpec(M, copies, d, machine))
    K = iso.machine_dim
    out = (iso.matrix @ states.T).T.reshape(len(states), M, -1)
    # single clone in slot 0: rho[s] = out[s] out[s]^dag
    rho = np.einsum("sik,sjk->sij", out, out.conj())
    return np.real(np.einsum("si,sij,sj->s", states.conj(), rho, states))


def universal_parameter(
    M: int,
    copies: int,
    machine: str = "shared",
    samples: int = 200,
    seed: int = 20240607,
    grid: int = 401,
    tol: float = 1e-8,
) -> UniversalPoint:
    """Machine parameter at which the clone fidelity stops depending on the input.

    Scans the spread (max - min) of clone fidelities over a fixed sample of
    input states on a grid in ``[0, d_max]`` and refines every local minimum
    with a bounded scalar search.  Several input-independent points can exist
    (the ``c = 0`` endpoint is often one); the one with the highest fidelity
    is returned.  ``converged`` is False when no refined point gets the spread
    below ``tol``, in which case the smallest-spread point is reported.
    """
    states = fidelity_sample(M, samples, seed)
    top = d_max(M, copies)

    def spread(d):
        f = _fidelities(M, copies, float(np.clip(d, 0.0, top)), states, machine)
        return float(f.max() - f.min())

    ds = np.linspace(0.0, top, grid)
    vals = np.array([spread(d) for d in ds])
    padded = np.concatenate([[np.inf], vals, [np.inf]])
    minima = [k for k in range(grid) if padded[k + 1] <= padded[k] and padded[k + 1] <= padded[k + 2]]

    candidates = []
    for k in minima:
        lo, hi = ds[max(k - 1, 0)], ds[min(k + 1, grid - 1)]
        res = minimize_scalar(spread, bounds=(lo, hi), method="bounded", options={"xatol": 1e-15, "maxiter": 500})
        d, s = (float(res.x), float(res.fun)) if res.fun <= vals[k] else (float(ds[k]), float(vals[k]))
        fid = float(np.mean(_fidelities(M, copies, d, states, machine)))
        candidates.append(UniversalPoint(d=d, fidelity=fid, spread=s, converged=s < tol))

    good = [p for p in candidates if p.converged]
    if good:
        return max(good, key=lambda p: p.fidelity)
    return min(candidates, key=lambda p: p.spread)
