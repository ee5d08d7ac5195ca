"""(alpha^2, d) parameter sweeps over cloned networks.

Each grid point builds the network, checks the pair-entanglement pattern,
runs the Finner violation searches, and optionally evaluates the tripartite
mutual information and the dependence measure.  Points are processed in a
thread pool but written in grid order, and every random choice at a point is
drawn from a seed derived from ``(seed, point index)``, so output bytes do
not depend on the number of workers.

The CSV is written next to a manifest ``<stem>.manifest.json`` describing
the run.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .entmeas import EsqOptions, dependence, tmi
from .errors import DomainError
from .finner import (
    MeasurementSetting,
    ObserverGrouping,
    SearchOptions,
    Variant,
    bilocality_residual,
    is_violation,
    probabilities,
    search_violation,
)
from .netbuild import Topology, build, topology_d_max, usable

COLUMNS = (
    "alpha_sq",
    "d",
    "entangled",
    "ratio_original",
    "ratio_modified",
    "bilocality_residual",
    "tmi",
    "dependence",
    "class",
)
DEFAULT_COUNT = 45


class Classification(str, enum.Enum):
    NOT_USABLE = "NotUsable"
    ENTANGLED_ONLY = "EntangledOnly"
    ORIGINAL = "OriginalDistinguishable"
    MODIFIED = "ModifiedDistinguishable"


def classify(entangled: bool, ratio_original: float | None, ratio_modified: float | None) -> Classification:
    if not entangled:
        return Classification.NOT_USABLE
    if ratio_original is not None and is_violation(ratio_original):
        return Classification.ORIGINAL
    if ratio_modified is not None and is_violation(ratio_modified):
        return Classification.MODIFIED
    return Classification.ENTANGLED_ONLY


@dataclass(frozen=True)
class SweepConfig:
    """Sweep description; field names double as the JSON config keys."""

    topology: str = "bilocal_local"
    alpha_min: float = 0.0
    alpha_max: float = 1.0
    alpha_count: int = DEFAULT_COUNT
    d_min: float = 0.0
    d_max: float | str = "auto"
    d_count: int = DEFAULT_COUNT
    seed: int = 0
    machine: str = "shared"
    compute_finner: bool = True
    finner_starts: int = 2
    finner_max_iters: int = 150
    finner_reduction: str = "lowest"
    compute_tmi: bool = False
    compute_dependence: bool = False
    esq_restarts: int = 2
    esq_max_iters: int = 500
    record_timing: bool = False
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology.parse(self.topology).value)
        if self.alpha_count < 1 or self.d_count < 1:
            raise ValueError("grid counts must be at least 1")
        if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
            raise ValueError(f"alpha_sq range [{self.alpha_min}, {self.alpha_max}] must lie inside [0, 1]")
        if self.d_min < 0:
            raise DomainError(f"d_min must be nonnegative, got {self.d_min}")
        if isinstance(self.d_max, str) and self.d_max != "auto":
            raise ValueError(f"d_max must be a number or 'auto', got {self.d_max!r}")
        limit = topology_d_max(self.topology)
        if self.d_upper > limit + 1e-12:
            raise DomainError(f"d_max {self.d_upper} exceeds the unitarity limit {limit:.12g} for {self.topology}")
        if self.d_min > self.d_upper:
            raise ValueError(f"d_min {self.d_min} exceeds d_max {self.d_upper}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def d_upper(self) -> float:
        return topology_d_max(self.topology) if self.d_max == "auto" else float(self.d_max)

    @property
    def total_points(self) -> int:
        return self.alpha_count * self.d_count

    def alpha_grid(self) -> np.ndarray:
        return np.linspace(self.alpha_min, self.alpha_max, self.alpha_count)

    def d_grid(self) -> np.ndarray:
        # clip guards against linspace overshooting the limit by an ulp
        return np.clip(np.linspace(self.d_min, self.d_upper, self.d_count), 0.0, topology_d_max(self.topology))

    def grid(self) -> list[tuple[float, float]]:
        """Points in output order: alpha^2 outer, d inner."""
        return [(float(a), float(d)) for a in self.alpha_grid() for d in self.d_grid()]

    @classmethod
    def from_json(cls, doc: dict) -> "SweepConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def grid_counts(points: int) -> tuple[int, int]:
        """Square-ish grid with at least ``points`` points."""
        if points < 1:
            raise ValueError("points must be positive")
        n = math.isqrt(points)
        if n * n < points:
            n += 1
        return n, n


@dataclass(frozen=True)
class SweepRecord:
    alpha_sq: float
    d: float
    entangled: bool
    ratio_original: float | None = None
    ratio_modified: float | None = None
    bilocality_residual: float | None = None
    tmi: float | None = None
    dependence: float | None = None
    classification: Classification = Classification.NOT_USABLE
    seconds: float = field(default=0.0, compare=False)

    def row(self) -> list[str]:
        return [
            _fmt(self.alpha_sq),
            _fmt(self.d),
            "true" if self.entangled else "false",
            _fmt(self.ratio_original),
            _fmt(self.ratio_modified),
            _fmt(self.bilocality_residual),
            _fmt(self.tmi),
            _fmt(self.dependence),
            self.classification.value,
        ]


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    # avoid printing -0 so equal values give equal bytes
    return f"{x + 0.0:.12g}"


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def evaluate_point(cfg: SweepConfig, index: int, alpha_sq: float, d: float) -> SweepRecord:
    t0 = time.perf_counter()
    topo = Topology(cfg.topology)
    net = build(topo, alpha_sq, d, cfg.machine)
    ok = usable(net)
    seed = point_seed(cfg.seed, index)
    r_orig = r_mod = resid = None
    if cfg.compute_finner:
        opts = SearchOptions(starts=cfg.finner_starts, max_iters=cfg.finner_max_iters, seed=seed, reduction=cfg.finner_reduction)
        orig = search_violation(net, Variant.ORIGINAL, opts)
        r_orig = orig.best_ratio
        if topo in (Topology.BILOCAL_LOCAL, Topology.BILOCAL_NONLOCAL):
            table = probabilities(net, orig.best_setting, ObserverGrouping(reduction=cfg.finner_reduction))
            resid = bilocality_residual(table)
        if topo is not Topology.THREE_COPIES:
            # the original optimum is also offered to the modified search
            mod = search_violation(net, Variant.MODIFIED, opts, extra_starts=[orig.best_setting])
            r_mod = mod.best_ratio
    t_val = None
    if cfg.compute_tmi:
        parts = [[q - 1 for q in net.parties[p]] for p in ("A", "B", "C")]
        t_val = tmi(net.rho, parts)
    dep = None
    if cfg.compute_dependence and topo is Topology.TRIANGLE_NONLOCAL:
        esq = EsqOptions(restarts=cfg.esq_restarts, max_iters=cfg.esq_max_iters, seed=seed)
        dep = dependence(net, esq).value
    return SweepRecord(
        alpha_sq=alpha_sq,
        d=d,
        entangled=ok,
        ratio_original=r_orig,
        ratio_modified=r_mod,
        bilocality_residual=resid,
        tmi=t_val,
        dependence=dep,
        classification=classify(ok, r_orig, r_mod),
        seconds=time.perf_counter() - t0,
    )


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def build_manifest(cfg: SweepConfig, records: Sequence[SweepRecord], wall: float | None, csv_name: str | None) -> dict:
    doc = {
        "tool": "clonenet",
        "version": __version__,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "points": len(records),
        "grid": {"alpha_count": cfg.alpha_count, "d_count": cfg.d_count, "d_upper": cfg.d_upper},
        "columns": list(COLUMNS),
        "data": csv_name,
        "esq_note": "dependence values are built from variational upper bounds" if cfg.compute_dependence else None,
        "wall_clock_seconds": None,
        "timing": None,
    }
    if cfg.record_timing:
        secs = np.array([r.seconds for r in records]) if records else np.zeros(1)
        doc["wall_clock_seconds"] = wall
        doc["timing"] = {"mean": float(secs.mean()), "max": float(secs.max()), "total": float(secs.sum())}
    return doc


def _csv_line(fields: Iterable[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(list(fields))
    return buf.getvalue()


def write_csv(records: Sequence[SweepRecord], manifest: dict, path) -> Path:
    """Write records and a sibling manifest; returns the manifest path."""
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_line(COLUMNS))
            for r in records:
                fh.write(_csv_line(r.row()))
        mpath = manifest_path(path)
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return mpath


def read_csv(path) -> list[dict]:
    """Parse a sweep CSV back into dicts of floats (``None`` for empty cells)."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if k == "class":
                    rec[k] = v
                elif k == "entangled":
                    rec[k] = v == "true"
                else:
                    rec[k] = float(v) if v != "" else None
            out.append(rec)
    return out


def run_sweep(cfg: SweepConfig, workers: int = 1) -> tuple[list[SweepRecord], dict]:
    """Evaluate every grid point; stream rows to ``cfg.output`` if set."""
    t0 = time.perf_counter()
    fh = None
    if cfg.output is not None:
        path = Path(cfg.output)
        try:
            # fail before any computation if the destination is unusable
            fh = open(path, "w", encoding="utf-8", newline="")
            manifest_path(path).touch()
        except OSError as exc:
            if fh is not None:
                fh.close()
            raise OSError(f"cannot write {path}: {exc}") from exc
    records: list[SweepRecord] = []
    points = cfg.grid()
    try:
        if fh is not None:
            fh.write(_csv_line(COLUMNS))
        job = lambda i: evaluate_point(cfg, i, *points[i])
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                stream = pool.map(job, range(len(points)))
                for rec in stream:
                    records.append(rec)
                    if fh is not None:
                        fh.write(_csv_line(rec.row()))
                        fh.flush()
        else:
            for i in range(len(points)):
                rec = job(i)
                records.append(rec)
                if fh is not None:
                    fh.write(_csv_line(rec.row()))
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    wall = time.perf_counter() - t0
    manifest = build_manifest(cfg, records, wall, Path(cfg.output).name if cfg.output else None)
    if cfg.output is not None:
        mpath = manifest_path(cfg.output)
        try:
            mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {mpath}: {exc}") from exc
    return records, manifest


@dataclass(frozen=True)
class DependencePoint:
    alpha: float
    d: float
    value: float
    e_a_bc: float
    e_a_b: float
    e_a_c: float


def dependence_curve(d: float, alpha_steps: int, opts: EsqOptions, workers: int = 1, machine: str = "shared") -> list[DependencePoint]:
    """Dependence of the triangle network along ``alpha`` in ``[0, 1]`` (amplitude, not its square)."""
    if alpha_steps < 1:
        raise ValueError("alpha_steps must be positive")
    limit = topology_d_max(Topology.TRIANGLE_NONLOCAL)
    if not 0.0 <= d <= limit:
        raise DomainError(f"d = {d} outside [0, {limit:.12g}]")
    alphas = np.linspace(0.0, 1.0, alpha_steps)

    def job(i):
        a = float(alphas[i])
        net = build(Topology.TRIANGLE_NONLOCAL, min(a * a, 1.0), d, machine)
        o = dataclasses.replace(opts, seed=point_seed(opts.seed, i), workers=1)
        dep = dependence(net, o)
        return DependencePoint(a, d, dep.value, dep.e_a_bc.estimate, dep.e_a_b.estimate, dep.e_a_c.estimate)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(alpha_steps)))
    return [job(i) for i in range(alpha_steps)]


def dependence_csv(points: Sequence[DependencePoint]) -> str:
    lines = [_csv_line(["alpha", "d", "e_a_bc_upper", "e_a_b_upper", "e_a_c_upper", "dependence"])]
    for p in points:
        lines.append(_csv_line([_fmt(p.alpha), _fmt(p.d), _fmt(p.e_a_bc), _fmt(p.e_a_b), _fmt(p.e_a_c), _fmt(p.value)]))
    return "".join(lines)
