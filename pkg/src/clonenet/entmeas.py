"""Entanglement and correlation measures (all entropies in bits).

``squashed_upper`` returns a variational *upper bound* on the squashed
entanglement: the state on AB is purified, the purifying system R is sent
through a channel R -> E given by a Stinespring isometry R -> E ⊗ K, and
``I(A;B|E) / 2`` is minimised over the isometry.  Each restart fixes a base
unitary ``U0`` and searches isometries ``(U0 expm(G))[:, :rank]`` where the
anti-Hermitian generator ``G`` has the block form ``[[X, -Y^dag], [Y, 0]]``.
K defaults to the rank of the state, which is the smallest size that keeps
the discard-everything channel inside the search family; a smaller
``discard_dim`` makes the search cheaper but bounds the channel's Kraus rank.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .errors import CapacityError
from .qmat import (
    DensityMatrix,
    _unwrap,
    eig_hermitian,
    entropy,
    entropy_from_spectrum,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    purify,
)

MAX_ESQ_DIM = 2**8


@dataclass(frozen=True)
class Bipartition:
    """Two disjoint sets of subsystem indices; anything else is traced out first."""

    side_a: tuple[int, ...]
    side_b: tuple[int, ...]

    def __init__(self, side_a: Iterable[int], side_b: Iterable[int]):
        a = tuple(sorted(int(i) for i in side_a))
        b = tuple(sorted(int(i) for i in side_b))
        if set(a) & set(b):
            raise ValueError(f"bipartition sides overlap: {a} and {b}")
        if not a or not b:
            raise ValueError("both sides of a bipartition must be non-empty")
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)


def _restrict(rho, part: Bipartition) -> tuple[np.ndarray, int, int]:
    """State on A ∪ B with A's subsystems first; returns (matrix, dA, dB)."""
    mat, dims = _unwrap(rho)
    n = len(dims)
    for i in part.side_a + part.side_b:
        if not 0 <= i < n:
            raise ValueError(f"subsystem index {i} out of range for {n} subsystems")
    kept = sorted(part.side_a + part.side_b)
    red = partial_trace(DensityMatrix(mat, dims, validate=False), kept)
    order = [kept.index(i) for i in part.side_a + part.side_b]
    red = permute_subsystems(red, order)
    dA = int(np.prod([dims[i] for i in part.side_a]))
    dB = int(np.prod([dims[i] for i in part.side_b]))
    return red.data, dA, dB


def negativity(rho, part: Bipartition) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    mat, dA, dB = _restrict(rho, part)
    lam = eig_hermitian(partial_transpose(mat, [0], dims=(dA, dB)))
    return float(abs(lam[lam < 0].sum()))


def is_ppt(rho, part: Bipartition, tol: float = 1e-9) -> bool:
    return negativity(rho, part) <= tol


def _marginal_entropy(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> float:
    if not keep:
        return 0.0
    return entropy(partial_trace(DensityMatrix(mat, dims, validate=False), keep))


def mutual_information(rho, part: Bipartition) -> float:
    """``S(A) + S(B) - S(AB)``."""
    mat, dA, dB = _restrict(rho, part)
    dims = (dA, dB)
    return _marginal_entropy(mat, dims, [0]) + _marginal_entropy(mat, dims, [1]) - entropy(mat)


def conditional_mutual_information(rho, a: Sequence[int], b: Sequence[int], e: Sequence[int]) -> float:
    """``I(A;B|E) = S(AE) + S(BE) - S(ABE) - S(E)`` on the given subsystems."""
    mat, dims = _unwrap(rho)
    a, b, e = list(a), list(b), list(e)
    if len(set(a) | set(b) | set(e)) != len(a) + len(b) + len(e):
        raise ValueError("subsystem sets must be disjoint")
    s = lambda idx: _marginal_entropy(mat, dims, sorted(idx))
    return s(a + e) + s(b + e) - s(a + b + e) - s(e)


def tmi(rho, parts: Sequence[Iterable[int]]) -> float:
    """Tripartite mutual information of three disjoint subsystem groups.

    ``S(ABC) + S(A) + S(B) + S(C) - S(AB) - S(AC) - S(BC)``
    """
    mat, dims = _unwrap(rho)
    groups = [sorted(int(i) for i in p) for p in parts]
    if len(groups) != 3:
        raise ValueError("tmi needs exactly three parts")
    flat = [i for g in groups for i in g]
    if len(set(flat)) != len(flat):
        raise ValueError("tmi parts overlap")
    if any(not 0 <= i < len(dims) for i in flat):
        raise ValueError("tmi part index out of range")
    a, b, c = groups
    s = lambda idx: _marginal_entropy(mat, dims, sorted(idx))
    return s(a + b + c) + s(a) + s(b) + s(c) - s(a + b) - s(a + c) - s(b + c)


@dataclass(frozen=True)
class EsqOptions:
    extension_dim: int = 4
    restarts: int = 16
    max_iters: int = 2000
    seed: int = 0
    tolerance: float = 1e-7
    workers: int = 1
    discard_dim: int | None = None
    method: str = "nelder-mead"
    simplex_step: float = 0.3
    perturbation: float = 0.5

    def __post_init__(self):
        if self.method not in ("nelder-mead", "powell"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.extension_dim < 1:
            raise ValueError("extension_dim must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass(frozen=True)
class EsqResult:
    """Upper bound on squashed entanglement (bits)."""

    estimate: float
    trivial_bound: float
    converged: bool
    best_params: np.ndarray = field(repr=False)
    restart_values: tuple[float, ...] = field(default=(), repr=False)


def _entropy_of_split(t: np.ndarray, row_axes: Sequence[int]) -> float:
    """Entropy of the marginal on ``row_axes`` of the pure state tensor ``t``."""
    col_axes = [i for i in range(t.ndim) if i not in row_axes]
    dr = int(np.prod([t.shape[i] for i in row_axes]))
    x = t.transpose(list(row_axes) + col_axes).reshape(dr, -1)
    g = x @ x.conj().T if x.shape[0] <= x.shape[1] else x.T @ x.conj()
    return entropy_from_spectrum(np.linalg.eigvalsh(g))


class _ExtensionObjective:
    """``I(A;B|E) / 2`` as a function of real isometry parameters.

    The isometry is ``(U0 @ expm(G))[:, :r]`` for a fixed base unitary ``U0``
    chosen per restart.
    """

    def __init__(self, mat: np.ndarray, dA: int, dB: int, ext_dim: int, discard_dim: int | None):
        psi, r = purify(mat)
        self.psi = psi.reshape(dA, dB, r)
        self.dA, self.dB, self.r, self.e = dA, dB, r, ext_dim
        k = r if discard_dim is None else discard_dim
        self.k = max(k, -(-r // ext_dim))
        self.N = ext_dim * self.k
        self.n_params = r * r + 2 * r * (self.N - r)
        self._iu = np.triu_indices(r, 1)

    def generator(self, x: np.ndarray) -> np.ndarray:
        r, N = self.r, self.N
        g = np.zeros((N, N), dtype=complex)
        m = len(self._iu[0])
        h = np.zeros((r, r), dtype=complex)
        h[self._iu] = x[:m] + 1j * x[m : 2 * m]
        h = h - h.conj().T
        h[np.diag_indices(r)] = 1j * x[2 * m : 2 * m + r]
        g[:r, :r] = h
        off = 2 * m + r
        if N > r:
            n_off = r * (N - r)
            y = (x[off : off + n_off] + 1j * x[off + n_off :]).reshape(N - r, r)
            g[r:, :r] = y
            g[:r, r:] = -y.conj().T
        return g

    def isometry(self, x: np.ndarray, base: np.ndarray) -> np.ndarray:
        return base @ expm(self.generator(x))[:, : self.r]

    def value_of(self, w: np.ndarray) -> float:
        t = np.einsum("abm,nm->abn", self.psi, w).reshape(self.dA, self.dB, self.e, self.k)
        # axes A=0 B=1 E=2 K=3 of a pure state; S(ABE) = S(K)
        s_ae = _entropy_of_split(t, [0, 2])
        s_be = _entropy_of_split(t, [1, 2])
        s_abe = _entropy_of_split(t, [3])
        s_e = _entropy_of_split(t, [2])
        return 0.5 * (s_ae + s_be - s_abe - s_e)

    def trivial_base(self) -> np.ndarray:
        # column m -> (E=0, K=m); E carries nothing only when k >= r
        return np.eye(self.N, dtype=complex)

    def copy_base(self) -> np.ndarray:
        """Permutation whose first r columns send |m> to |m mod e>_E |m mod k>_K."""
        N, e, k = self.N, self.e, self.k
        targets = []
        for m in range(self.r):
            cand = (m % e) * k + (m % k)
            while cand in targets:
                cand = (cand + 1) % N
            targets.append(cand)
        rest = [i for i in range(N) if i not in targets]
        u = np.zeros((N, N), dtype=complex)
        for col, row in enumerate(targets + rest):
            u[row, col] = 1.0
        return u


def _restart_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _random_generator(n: int, rng: np.random.Generator, scale: float) -> np.ndarray:
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (h - h.conj().T) / 2


def _restart_base(obj: _ExtensionObjective, opts: EsqOptions, index: int) -> np.ndarray:
    """Base unitary of restart ``index``.

    0 and 1 are the trivial and eigenbasis-copy channels; later restarts
    alternate between the two, rotated by a seeded random unitary.
    """
    base = obj.trivial_base() if index % 2 == 0 else obj.copy_base()
    if index < 2:
        return base
    rng = _restart_seed(opts.seed, index)
    return base @ expm(_random_generator(obj.N, rng, opts.perturbation))


def _run_restart(obj: _ExtensionObjective, opts: EsqOptions, index: int):
    base = _restart_base(obj, opts, index)
    x0 = np.zeros(obj.n_params)
    fun = lambda x: obj.value_of(obj.isometry(x, base))
    if opts.method == "powell":
        res = minimize(fun, x0, method="Powell", options={"maxiter": opts.max_iters, "ftol": opts.tolerance, "xtol": 1e-6})
    else:
        simplex = np.vstack([x0, x0 + opts.simplex_step * np.eye(obj.n_params)])
        res = minimize(
            fun,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": opts.max_iters,
                "fatol": opts.tolerance,
                "xatol": 1e-9,
                "adaptive": True,
                "initial_simplex": simplex,
            },
        )
    return float(res.fun), np.asarray(res.x), bool(res.success)


def squashed_upper(rho, part: Bipartition, opts: EsqOptions | None = None) -> EsqResult:
    """Variational upper bound on the squashed entanglement across ``part``.

    The trivial extension (E independent of AB) is always a candidate, so the
    estimate never exceeds ``I(A;B) / 2``.  Restart 0 starts from the trivial
    channel, restart 1 from the channel that writes the eigenbasis label of the
    state into E, and the rest from randomly rotated copies of those two drawn
    from per-restart seed streams.
    """
    opts = EsqOptions() if opts is None else opts
    mat, dA, dB = _restrict(rho, part)
    if dA * dB > MAX_ESQ_DIM:
        raise CapacityError(f"combined dimension {dA * dB} exceeds the supported {MAX_ESQ_DIM}")
    dims = (dA, dB)
    trivial = 0.5 * (_marginal_entropy(mat, dims, [0]) + _marginal_entropy(mat, dims, [1]) - entropy(mat))
    obj = _ExtensionObjective(mat, dA, dB, opts.extension_dim, opts.discard_dim)
    if obj.r == 1:
        # pure state: every extension is a product, nothing to optimize
        return EsqResult(max(trivial, 0.0), trivial, True, np.zeros(0), (trivial,))

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            runs = list(pool.map(lambda i: _run_restart(obj, opts, i), range(opts.restarts)))
    else:
        runs = [_run_restart(obj, opts, i) for i in range(opts.restarts)]

    values = tuple(v for v, _, _ in runs)
    k = int(np.argmin(values))
    best, params, ok = runs[k]
    if trivial <= best:
        return EsqResult(max(trivial, 0.0), trivial, True, np.zeros(obj.n_params), values)
    return EsqResult(max(best, 0.0), trivial, ok, params, values)


@dataclass(frozen=True)
class Dependence:
    value: float
    e_a_bc: EsqResult
    e_a_b: EsqResult
    e_a_c: EsqResult


def dependence(net, opts: EsqOptions | None = None) -> Dependence:
    """``|E(A|BC) - E(A|B) - E(A|C)|`` for a triangle network.

    ``E(A|B)`` is evaluated on the state with C's qubits traced out and
    ``E(A|C)`` with B's traced out; every term is a ``squashed_upper`` bound
    computed with the same options.
    """
    from .netbuild import Topology

    if net.topology is not Topology.TRIANGLE_NONLOCAL:
        raise ValueError(f"dependence is defined for the triangle network, got {net.topology.value}")
    opts = EsqOptions() if opts is None else opts
    idx = lambda labels: [q - 1 for q in labels]
    A, B, C = (idx(net.parties[p]) for p in "ABC")
    e_abc = squashed_upper(net.rho, Bipartition(A, B + C), opts)
    e_ab = squashed_upper(net.rho, Bipartition(A, B), opts)
    e_ac = squashed_upper(net.rho, Bipartition(A, C), opts)
    value = abs(e_abc.estimate - e_ab.estimate - e_ac.estimate)
    return Dependence(value, e_abc, e_ab, e_ac)
