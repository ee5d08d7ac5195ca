"""Three-party networks produced by cloning a single source.

Qubits carry 1-based labels matching the network figures.  Four constructions
are available:

``three_copies``
    One qubit ``sqrt(a2)|0> + sqrt(1-a2)|1>`` cloned 1 -> 3; A={1}, B={2}, C={3}.
``bilocal_local``
    The pair ``sqrt(a2)|00> + sqrt(1-a2)|11>`` with a 1 -> 2 qubit cloner at each
    end.  A's cloner outputs qubits 1 and 3, B's outputs 2 and 4;
    A={1}, B={2,4}, C={3}.
``bilocal_nonlocal``
    The same pair cloned jointly (M=4) 1 -> 2; clone k occupies qubits
    (2k-1, 2k); A={1}, B={2,4}, C={3}.
``triangle_nonlocal``
    The pair cloned jointly 1 -> 3; clone k occupies qubits (2k-1, 2k);
    A={1,6}, B={4,5}, C={2,3}.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cloner import MachineSpec, apply_cloner, build_isometry
from .qmat import DensityMatrix, partial_trace, partial_transpose, eig_hermitian

ENTANGLEMENT_TOL = 1e-9
EQUALITY_TOL = 1e-10


class Topology(str, enum.Enum):
    THREE_COPIES = "three_copies"
    BILOCAL_LOCAL = "bilocal_local"
    BILOCAL_NONLOCAL = "bilocal_nonlocal"
    TRIANGLE_NONLOCAL = "triangle_nonlocal"

    @classmethod
    def parse(cls, value) -> "Topology":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {
            "three": cls.THREE_COPIES,
            "local": cls.BILOCAL_LOCAL,
            "bilocal": cls.BILOCAL_LOCAL,
            "nonlocal": cls.BILOCAL_NONLOCAL,
            "triangle": cls.TRIANGLE_NONLOCAL,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown topology {value!r}") from None


# (M, copies) of the cloner each topology uses
MACHINE = {
    Topology.THREE_COPIES: (2, 3),
    Topology.BILOCAL_LOCAL: (2, 2),
    Topology.BILOCAL_NONLOCAL: (4, 2),
    Topology.TRIANGLE_NONLOCAL: (4, 3),
}

PARTIES = {
    Topology.THREE_COPIES: {"A": (1,), "B": (2,), "C": (3,)},
    Topology.BILOCAL_LOCAL: {"A": (1,), "B": (2, 4), "C": (3,)},
    Topology.BILOCAL_NONLOCAL: {"A": (1,), "B": (2, 4), "C": (3,)},
    Topology.TRIANGLE_NONLOCAL: {"A": (1, 6), "B": (4, 5), "C": (2, 3)},
}

# pairs that must be entangled / separable for the network to be usable;
# for the bilocal nets these are the A-B and B-C links
INTENDED_ENTANGLED = {
    Topology.THREE_COPIES: ((1, 2), (1, 3), (2, 3)),
    Topology.BILOCAL_LOCAL: ((1, 2), (3, 4)),
    Topology.BILOCAL_NONLOCAL: ((1, 2), (3, 4)),
    Topology.TRIANGLE_NONLOCAL: ((1, 2), (3, 4), (5, 6)),
}
REQUIRED_SEPARABLE = {
    Topology.THREE_COPIES: (),
    Topology.BILOCAL_LOCAL: ((1, 3), (2, 4)),
    Topology.BILOCAL_NONLOCAL: ((1, 3), (2, 4)),
    Topology.TRIANGLE_NONLOCAL: ((1, 3), (1, 5), (3, 5), (2, 4), (2, 6), (4, 6)),
}


def machine_spec(topology, d: float, machine: str = "shared") -> MachineSpec:
    M, copies = MACHINE[Topology.parse(topology)]
    return MachineSpec(M, copies, d, machine)


def topology_d_max(topology) -> float:
    return machine_spec(topology, 0.0).d_max


@dataclass(frozen=True)
class NetworkState:
    rho: DensityMatrix
    parties: dict
    topology: Topology
    alpha_sq: float
    d: float
    machine: str = "shared"

    @property
    def num_qubits(self) -> int:
        return self.rho.num_subsystems

    def party_qubits(self, name: str) -> tuple[int, ...]:
        return tuple(self.parties[name])

    def to_json(self) -> dict:
        mat = self.rho.data
        return {
            "topology": self.topology.value,
            "alpha_sq": self.alpha_sq,
            "d": self.d,
            "machine": self.machine,
            "num_qubits": self.num_qubits,
            "parties": {k: list(v) for k, v in self.parties.items()},
            "dims": list(self.rho.dims),
            "rho": [[float(z.real), float(z.imag)] for z in mat.ravel()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NetworkState":
        dims = doc["dims"]
        flat = np.array([complex(re, im) for re, im in doc["rho"]])
        dim = int(np.prod(dims))
        rho = DensityMatrix(flat.reshape(dim, dim), dims)
        return cls(
            rho=rho,
            parties={k: tuple(v) for k, v in doc["parties"].items()},
            topology=Topology.parse(doc["topology"]),
            alpha_sq=float(doc["alpha_sq"]),
            d=float(doc["d"]),
            machine=doc.get("machine", "shared"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def input_pair(alpha_sq: float) -> np.ndarray:
    """``sqrt(a2)|00> + sqrt(1 - a2)|11>`` as a length-4 vector."""
    a, b = _amplitudes(alpha_sq)
    return np.array([a, 0, 0, b], dtype=complex)


def input_qubit(alpha_sq: float) -> np.ndarray:
    a, b = _amplitudes(alpha_sq)
    return np.array([a, b], dtype=complex)


def _amplitudes(alpha_sq: float) -> tuple[float, float]:
    if not 0.0 <= alpha_sq <= 1.0:
        raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq}")
    return float(np.sqrt(alpha_sq)), float(np.sqrt(1.0 - alpha_sq))


def _trace_tail(psi: np.ndarray, dims: tuple[int, ...], n_keep: int) -> np.ndarray:
    keep = int(np.prod(dims[:n_keep]))
    a = psi.reshape(keep, -1)
    return a @ a.conj().T


def _reorder_qubits(rho: np.ndarray, order: list[int]) -> np.ndarray:
    n = len(order)
    d = rho.shape[0]
    t = rho.reshape((2,) * (2 * n)).transpose(order + [n + i for i in order])
    return t.reshape(d, d)


def build(topology, alpha_sq: float, d: float, machine: str = "shared") -> NetworkState:
    """Cloned network state with the machine registers traced out."""
    topo = Topology.parse(topology)
    spec = machine_spec(topo, d, machine)
    iso = build_isometry(spec)
    if topo is Topology.THREE_COPIES:
        psi, dims = apply_cloner(iso, input_qubit(alpha_sq), 0, (2,))
        rho = _trace_tail(psi, dims, 3)
    elif topo is Topology.BILOCAL_LOCAL:
        psi, dims = apply_cloner(iso, input_pair(alpha_sq), 0, (2, 2))
        psi, dims = apply_cloner(iso, psi, 2, dims)
        # dims: a1 a2 b1 b2 Ka Kb  -> labels 1 3 2 4
        rho = _trace_tail(psi, dims, 4)
        rho = _reorder_qubits(rho, [0, 2, 1, 3])
    else:
        psi, dims = apply_cloner(iso, input_pair(alpha_sq), 0, (4,))
        rho = _trace_tail(psi, dims, spec.copies)
    n = int(round(np.log2(rho.shape[0])))
    rho = 0.5 * (rho + rho.conj().T)
    return NetworkState(
        rho=DensityMatrix(rho, (2,) * n),
        parties=dict(PARTIES[topo]),
        topology=topo,
        alpha_sq=float(alpha_sq),
        d=float(d),
        machine=machine,
    )


def _labels_to_indices(net: NetworkState, qubits: Iterable[int]) -> list[int]:
    out = []
    for q in qubits:
        q = int(q)
        if not 1 <= q <= net.num_qubits:
            raise ValueError(f"qubit label {q} out of range 1..{net.num_qubits}")
        out.append(q - 1)
    return sorted(set(out))


def reduced(net: NetworkState, qubits: Iterable[int]) -> DensityMatrix:
    """Marginal on the given qubit labels, in ascending label order."""
    return partial_trace(net.rho, _labels_to_indices(net, qubits))


def two_qubit_negativity(rho) -> float:
    lam = eig_hermitian(partial_transpose(rho, [1], dims=(2, 2)))
    return float(abs(lam[lam < 0].sum()))


@dataclass(frozen=True)
class PairClass:
    pair: tuple[int, int]
    entangled: bool
    negativity: float


def pair_entanglement_map(net: NetworkState, tol: float = ENTANGLEMENT_TOL) -> list[PairClass]:
    """PPT classification of every two-qubit marginal."""
    out = []
    for p in itertools.combinations(range(1, net.num_qubits + 1), 2):
        neg = two_qubit_negativity(reduced(net, p))
        out.append(PairClass(pair=p, entangled=neg > tol, negativity=neg))
    return out


def pair_equality_classes(net: NetworkState, tol: float = EQUALITY_TOL) -> list[list[tuple[int, int]]]:
    """Group qubit pairs whose two-qubit marginals coincide (Frobenius < tol)."""
    pairs = list(itertools.combinations(range(1, net.num_qubits + 1), 2))
    mats = {p: reduced(net, p).data for p in pairs}
    classes: list[list[tuple[int, int]]] = []
    for p in pairs:
        for cls in classes:
            if np.linalg.norm(mats[p] - mats[cls[0]]) < tol:
                cls.append(p)
                break
        else:
            classes.append([p])
    return classes


def usable(net: NetworkState, tol: float = ENTANGLEMENT_TOL) -> bool:
    """Intended pairs entangled and required-separable pairs separable."""
    neg = {pc.pair: pc.negativity for pc in pair_entanglement_map(net, tol)}
    return all(neg[p] > tol for p in INTENDED_ENTANGLED[net.topology]) and all(
        neg[p] <= tol for p in REQUIRED_SEPARABLE[net.topology]
    )
