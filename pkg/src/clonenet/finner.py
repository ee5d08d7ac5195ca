"""Product projective measurements on network states and Finner-type tests.

Every qubit is measured in the basis ``{|v0>, |v1>}`` with
``|v0> = cos(t/2)|0> + e^{ip} sin(t/2)|1>`` and ``|v1>`` its orthogonal
complement.  Outcomes are then grouped into observers:

* coarse grouping gives one binary observer per party; a party holding two
  qubits reports the bit of its lowest-labelled qubit, or the XOR of its bits;
* fine grouping gives one observer per qubit, ordered party by party, so the
  bilocal nets yield ``a, b, b', c`` and the triangle ``a, a', b, b', c, c'``.

The original inequality bounds ``P(abc)`` by ``sqrt(P(a) P(b) P(c))``; the
modified one applies the same bound with every single-observer marginal of a
fine-grained table.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .qmat import DensityMatrix, _unwrap

MARGINAL_FLOOR = 1e-12
VIOLATION_TOL = 1e-7
NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementSetting:
    """Per-qubit Bloch angles, stored in canonical ranges ``[0, pi]`` x ``[0, 2pi)``."""

    theta: tuple[float, ...]
    phi: tuple[float, ...]

    def __init__(self, theta: Sequence[float], phi: Sequence[float]):
        theta = np.asarray(theta, dtype=float).ravel()
        phi = np.asarray(phi, dtype=float).ravel()
        if theta.shape != phi.shape:
            raise ValueError(f"got {theta.size} polar and {phi.size} azimuthal angles")
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(phi)):
            raise ValueError("measurement angles must be finite")
        # fold onto the canonical chart; flips only change a global phase
        theta = np.mod(theta, 2 * np.pi)
        flip = theta > np.pi
        theta = np.where(flip, 2 * np.pi - theta, theta)
        phi = np.mod(phi + np.pi * flip, 2 * np.pi)
        object.__setattr__(self, "theta", tuple(float(t) for t in theta))
        object.__setattr__(self, "phi", tuple(float(p) for p in phi))

    @property
    def num_qubits(self) -> int:
        return len(self.theta)

    @classmethod
    def computational(cls, n: int) -> "MeasurementSetting":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_vector(cls, x) -> "MeasurementSetting":
        """``[theta_1..theta_n, phi_1..phi_n]``."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size % 2:
            raise ValueError("parameter vector must have even length")
        n = x.size // 2
        return cls(x[:n], x[n:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi])

    def bases(self) -> np.ndarray:
        """Array of shape ``(n, 2, 2)``; ``bases()[q][:, o]`` is the vector for outcome ``o``."""
        t = np.asarray(self.theta) / 2
        ph = np.exp(1j * np.asarray(self.phi))
        out = np.empty((self.num_qubits, 2, 2), dtype=complex)
        out[:, 0, 0] = np.cos(t)
        out[:, 1, 0] = ph * np.sin(t)
        out[:, 0, 1] = -np.conj(ph) * np.sin(t)
        out[:, 1, 1] = np.cos(t)
        return out


class Grouping(str, enum.Enum):
    COARSE = "coarse"
    FINE = "fine"


class Reduction(str, enum.Enum):
    LOWEST = "lowest"
    XOR = "xor"


@dataclass(frozen=True)
class ObserverGrouping:
    mode: Grouping = Grouping.COARSE
    reduction: Reduction = Reduction.LOWEST

    def __post_init__(self):
        object.__setattr__(self, "mode", Grouping(self.mode))
        object.__setattr__(self, "reduction", Reduction(self.reduction))


@dataclass(frozen=True)
class ProbTable:
    """Joint outcome distribution; ``probs[o_1, ..., o_k]`` for observers ``labels``."""

    labels: tuple[str, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        labels = tuple(self.labels)
        if p.ndim != len(labels):
            raise ValueError(f"{len(labels)} labels for a {p.ndim}-way table")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate observer labels {labels}")
        if np.any(p < -NORMALIZATION_TOL):
            raise ValueError("probabilities must be nonnegative")
        total = p.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", p)

    @property
    def num_observers(self) -> int:
        return len(self.labels)

    def marginal(self, k: int) -> np.ndarray:
        axes = tuple(i for i in range(self.probs.ndim) if i != k)
        return self.probs.sum(axis=axes)

    def marginals(self) -> list[np.ndarray]:
        return [self.marginal(k) for k in range(self.num_observers)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.labels) + ["probability"])
        for idx in itertools.product(*(range(s) for s in self.probs.shape)):
            w.writerow(list(idx) + [f"{self.probs[idx]:.12g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ProbTable":
        rows = list(csv.reader(io.StringIO(text)))
        labels = rows[0][:-1]
        shape = [1 + max(int(r[i]) for r in rows[1:]) for i in range(len(labels))]
        p = np.zeros(shape)
        for r in rows[1:]:
            p[tuple(int(v) for v in r[:-1])] = float(r[-1])
        return cls(tuple(labels), p)


def _default_parties(n: int) -> dict[str, tuple[int, ...]]:
    return {chr(ord("A") + i): (i + 1,) for i in range(n)}


def qubit_distribution(rho, setting: MeasurementSetting) -> np.ndarray:
    """Born-rule distribution over all qubit outcomes, shape ``(2,) * n``."""
    mat, dims = _unwrap(rho)
    n = len(dims)
    if any(d != 2 for d in dims):
        raise ValueError("measurements are defined on qubit registers only")
    if setting.num_qubits != n:
        raise ValueError(f"setting covers {setting.num_qubits} qubits, state has {n}")
    # interleave row/column axes so qubit q's pair is always at the front
    t = mat.reshape((2,) * (2 * n))
    t = t.transpose([a for q in range(n) for a in (q, n + q)])
    for b in setting.bases():
        # T[o, j, k] = conj(b[j, o]) b[k, o]
        op = np.einsum("jo,ko->ojk", b.conj(), b)
        t = np.moveaxis(np.tensordot(op, t, axes=([1, 2], [0, 1])), 0, -1)
    return np.clip(t.real, 0.0, None)


def observers(parties: Mapping[str, Sequence[int]], grouping: ObserverGrouping) -> list[tuple[str, tuple[int, ...]]]:
    """Observer labels with the qubit labels each one reads."""
    out = []
    for name, qubits in parties.items():
        qubits = tuple(qubits)
        if grouping.mode is Grouping.COARSE:
            out.append((name.lower(), qubits))
        else:
            for k, q in enumerate(qubits):
                out.append((name.lower() + "'" * k, (q,)))
    return out


def probabilities(
    state,
    setting: MeasurementSetting,
    grouping: ObserverGrouping | None = None,
    parties: Mapping[str, Sequence[int]] | None = None,
) -> ProbTable:
    """Observer-level outcome table for a network state or a bare density matrix.

    ``parties`` maps party names to 1-based qubit labels; it defaults to the
    network's own parties, or to one party per qubit for a bare matrix.
    """
    grouping = ObserverGrouping() if grouping is None else grouping
    rho = getattr(state, "rho", state)
    if parties is None:
        parties = getattr(state, "parties", None)
    full = qubit_distribution(rho, setting)
    n = full.ndim
    parties = _default_parties(n) if parties is None else parties
    labels_seen = sorted(q for qs in parties.values() for q in qs)
    if labels_seen != list(range(1, n + 1)):
        raise ValueError(f"parties must cover qubits 1..{n} exactly once, got {labels_seen}")

    obs = observers(parties, grouping)
    key = _outcome_map(n, tuple(qs for _, qs in obs), grouping.reduction)
    table = np.bincount(key, weights=full.ravel(), minlength=2 ** len(obs))
    return ProbTable(tuple(label for label, _ in obs), table.reshape((2,) * len(obs)))


@functools.lru_cache(maxsize=64)
def _outcome_map(n: int, groups: tuple[tuple[int, ...], ...], reduction: Reduction) -> np.ndarray:
    """Flat observer-outcome index for every flat qubit-outcome index."""
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    key = np.zeros(len(bits), dtype=np.int64)
    for qubits in groups:
        cols = bits[:, [q - 1 for q in qubits]]
        if reduction is Reduction.XOR:
            b = np.bitwise_xor.reduce(cols, axis=1)
        else:
            b = cols[:, int(np.argmin(qubits))]
        key = 2 * key + b
    key.setflags(write=False)
    return key


def _product_ratio(p: ProbTable) -> float:
    probs = p.probs
    if probs.sum() <= 0:
        raise ValueError("probability table is identically zero")
    margs = p.marginals()
    denom = np.ones_like(probs)
    ok = np.ones(probs.shape, dtype=bool)
    for k, m in enumerate(margs):
        shape = [1] * probs.ndim
        shape[k] = -1
        denom = denom * m.reshape(shape)
        ok &= m.reshape(shape) >= MARGINAL_FLOOR
    if not ok.any():
        raise ValueError("every outcome has a vanishing marginal")
    ratio = np.where(ok, probs / np.sqrt(np.where(ok, denom, 1.0)), -np.inf)
    return float(ratio.max())


def finner_ratio(p: ProbTable) -> float:
    """``max P(o) / sqrt(prod_k P_k(o_k))`` over outcomes; above 1 is a violation.

    Outcomes where any single-observer marginal is below ``1e-12`` are skipped.
    """
    if p.num_observers < 2:
        raise ValueError("the Finner ratio needs at least two observers")
    return _product_ratio(p)


def modified_ratio(p: ProbTable) -> float:
    """Finner ratio of a fine-grained table with four or six observers."""
    if p.num_observers not in (4, 6):
        raise ValueError(f"modified ratio needs 4 or 6 observers, got {p.num_observers}")
    return _product_ratio(p)


def bilocality_residual(p: ProbTable) -> float:
    """``max_{a,c} |sum_b P(abc) - P(a) P(c)|`` for a three-observer table."""
    if p.num_observers != 3:
        raise ValueError(f"bilocality residual needs 3 observers, got {p.num_observers}")
    pac = p.probs.sum(axis=1)
    return float(np.max(np.abs(pac - np.outer(p.marginal(0), p.marginal(2)))))


def is_violation(ratio: float) -> bool:
    return ratio > 1.0 + VIOLATION_TOL


class Variant(str, enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


@dataclass(frozen=True)
class SearchOptions:
    starts: int = 50
    max_iters: int = 400
    seed: int = 0
    workers: int = 1
    reduction: Reduction = Reduction.LOWEST

    def __post_init__(self):
        if self.starts < 0:
            raise ValueError("starts must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        object.__setattr__(self, "reduction", Reduction(self.reduction))


@dataclass(frozen=True)
class ViolationResult:
    variant: Variant
    best_ratio: float
    best_setting: MeasurementSetting
    computational_ratio: float
    start_values: tuple[float, ...] = field(default=(), repr=False)


def _start_point(n: int, seed: int, index: int) -> np.ndarray:
    """Start 0 is the computational basis, the rest are uniform on the sphere."""
    if index == 0:
        return np.zeros(2 * n)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    theta = np.arccos(1 - 2 * rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    return np.concatenate([theta, phi])


def search_violation(
    net,
    variant="original",
    opts: SearchOptions | None = None,
    extra_starts: Sequence[MeasurementSetting] = (),
) -> ViolationResult:
    """Maximise the Finner ratio of ``variant`` over per-qubit measurement bases.

    Start 0 is the computational basis, starts ``1..opts.starts`` are random,
    and ``extra_starts`` are appended after them.  Each start runs a
    Nelder-Mead refinement; the best ratio over all of them is returned.
    """
    opts = SearchOptions() if opts is None else opts
    variant = Variant(variant)
    if variant is Variant.ORIGINAL:
        grouping, ratio_fn = ObserverGrouping(Grouping.COARSE, opts.reduction), finner_ratio
    else:
        grouping, ratio_fn = ObserverGrouping(Grouping.FINE, opts.reduction), modified_ratio
    n = net.rho.num_subsystems if isinstance(net.rho, DensityMatrix) else int(np.log2(len(net.rho)))

    def ratio_at(x):
        return ratio_fn(probabilities(net, MeasurementSetting.from_vector(x), grouping))

    comp = ratio_at(np.zeros(2 * n))

    extra = [np.asarray(st.to_vector()) for st in extra_starts]

    def run(index):
        x0 = _start_point(n, opts.seed, index) if index <= opts.starts else extra[index - opts.starts - 1]
        res = minimize(
            lambda x: -ratio_at(x),
            x0,
            method="Nelder-Mead",
            options={"maxiter": opts.max_iters, "xatol": 1e-8, "fatol": 1e-10, "adaptive": True},
        )
        return -float(res.fun), np.asarray(res.x)

    indices = range(opts.starts + 1 + len(extra))
    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            runs = list(pool.map(run, indices))
    else:
        runs = [run(i) for i in indices]
    values = tuple(v for v, _ in runs)
    k = int(np.argmax(values))
    best, x = runs[k]
    if comp > best:
        best, x = comp, np.zeros(2 * n)
    return ViolationResult(variant, best, MeasurementSetting.from_vector(x), comp, values)
