"""Command-line front end: ``clonenet <subcommand> ...``.

Exit codes: 0 success, 2 argument error, 3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cloner import MachineSpec, clone_fidelity
from .entmeas import Bipartition, EsqOptions, squashed_upper, tmi
from .errors import CapacityError, DomainError
from .finner import (
    ObserverGrouping,
    SearchOptions,
    Variant,
    bilocality_residual,
    probabilities,
    search_violation,
)
from .netbuild import NetworkState, Topology, build, input_pair, input_qubit
from .qmat import DensityMatrix
from .sweep import COLUMNS, SweepConfig, _csv_line, dependence_csv, dependence_curve, run_sweep

EXIT_OK, EXIT_ARGS, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4

# global flags are accepted before or after the subcommand
GLOBAL_DEFAULTS = {"seed": None, "threads": 1, "out": None, "config": None}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)", **kw)
    p.add_argument("--threads", type=_positive_int, help="worker threads", **kw)
    p.add_argument("--out", help="output file (stdout when omitted)", **kw)
    p.add_argument("--config", help="JSON file supplying option values", **kw)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", help="three_copies | bilocal_local | bilocal_nonlocal | triangle_nonlocal")
    p.add_argument("--alpha-sq", type=float, dest="alpha_sq")
    p.add_argument("--d", type=float)
    p.add_argument("--machine", choices=["shared", "distinct"])
    p.add_argument("--input", help="network or density-matrix JSON file instead of building one")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clonenet", description="Cloned quantum network toolkit")
    parser.add_argument("--version", action="version", version=f"clonenet {__version__}")
    _global_flags(parser, suppress=False)
    parser.set_defaults(**GLOBAL_DEFAULTS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    net = sub.add_parser("network", help="network construction")
    net_sub = net.add_subparsers(dest="action", parser_class=_Parser)
    net_sub.required = True
    nb = net_sub.add_parser("build", help="build a network and write it as JSON")
    _network_args(nb)
    _global_flags(nb, suppress=True)

    cf = sub.add_parser("clone-fidelity", help="fidelity of one clone with the input")
    cf.add_argument("--M", type=int, dest="M")
    cf.add_argument("--copies", type=int)
    cf.add_argument("--d", type=float)
    cf.add_argument("--state", type=float, help="alpha^2 of the input (qubit for M=2, pair for M=4)")
    cf.add_argument("--slot", type=int, help="clone index, 0-based")
    cf.add_argument("--machine", choices=["shared", "distinct"])
    _global_flags(cf, suppress=True)

    sw = sub.add_parser("sweep", help="(alpha^2, d) region sweep to CSV")
    sw.add_argument("--topology")
    sw.add_argument("--points", type=_positive_int, help="approximate number of grid points (square grid)")
    sw.add_argument("--alpha-count", type=_positive_int, dest="alpha_count")
    sw.add_argument("--d-count", type=_positive_int, dest="d_count")
    sw.add_argument("--d-max", dest="d_max", help="number or 'auto'")
    sw.add_argument("--tmi", action="store_true", default=None, dest="compute_tmi")
    sw.add_argument("--dependence", action="store_true", default=None, dest="compute_dependence")
    sw.add_argument("--no-finner", action="store_false", default=None, dest="compute_finner")
    sw.add_argument("--finner-starts", type=int, dest="finner_starts")
    sw.add_argument("--reduction", choices=["lowest", "xor"], dest="finner_reduction")
    sw.add_argument("--timing", action="store_true", default=None, dest="record_timing")
    sw.add_argument("--machine", choices=["shared", "distinct"])
    _global_flags(sw, suppress=True)

    fi = sub.add_parser("finner", help="Finner violation search on one network")
    _network_args(fi)
    fi.add_argument("--variant", choices=["original", "modified"])
    fi.add_argument("--starts", type=int)
    fi.add_argument("--max-iters", type=_positive_int, dest="max_iters")
    fi.add_argument("--reduction", choices=["lowest", "xor"])
    _global_flags(fi, suppress=True)

    tm = sub.add_parser("tmi", help="tripartite mutual information of the three parties")
    _network_args(tm)
    _global_flags(tm, suppress=True)

    es = sub.add_parser("esq", help="squashed-entanglement upper bound")
    _network_args(es)
    es.add_argument("--side-a", dest="side_a", help="comma-separated 1-based subsystem labels (default 1)")
    es.add_argument("--side-b", dest="side_b", help="comma-separated labels (default: all others)")
    es.add_argument("--restarts", type=_positive_int)
    es.add_argument("--max-iters", type=_positive_int, dest="max_iters")
    es.add_argument("--extension-dim", type=_positive_int, dest="extension_dim")
    _global_flags(es, suppress=True)

    de = sub.add_parser("dependence", help="triangle dependence along alpha (amplitude) at fixed d")
    de.add_argument("--d", type=float)
    de.add_argument("--alpha-steps", type=_positive_int, dest="alpha_steps")
    de.add_argument("--restarts", type=_positive_int)
    de.add_argument("--max-iters", type=_positive_int, dest="max_iters")
    de.add_argument("--extension-dim", type=_positive_int, dest="extension_dim")
    de.add_argument("--machine", choices=["shared", "distinct"])
    _global_flags(de, suppress=True)
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    return doc


def _opt(args, cfg: dict, name: str, default=None):
    """Explicit flag, else config value, else ``default``."""
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _seed(args, cfg: dict) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc


def _check_writable(out) -> None:
    if out is None:
        return
    parent = Path(out).resolve().parent
    if not parent.is_dir():
        raise OSError(f"cannot write {out}: directory {parent} does not exist")


def _load_state(path):
    """A ``NetworkState`` JSON document, or ``{"rho": ..., "dims": ...}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    if "topology" in doc:
        return NetworkState.from_json(doc)
    if "rho" not in doc:
        raise ValueError(f"{path} has no 'rho' entry")
    raw = np.asarray(doc["rho"], dtype=float)
    if raw.ndim == 2 and raw.shape[1] == 2 and raw.shape[0] != 2:
        flat = raw[:, 0] + 1j * raw[:, 1]
        dim = int(round(np.sqrt(flat.size)))
        mat = flat.reshape(dim, dim)
    elif raw.ndim == 3 and raw.shape[2] == 2:
        mat = raw[..., 0] + 1j * raw[..., 1]
    else:
        mat = raw.astype(complex)
    return DensityMatrix(mat, doc.get("dims"))


def _network(args, cfg: dict):
    path = _opt(args, cfg, "input")
    if path is not None:
        return _load_state(path)
    topo = _opt(args, cfg, "topology")
    a2 = _opt(args, cfg, "alpha_sq")
    d = _opt(args, cfg, "d")
    if topo is None or a2 is None or d is None:
        raise ValueError("give --input or all of --topology, --alpha-sq and --d")
    return build(Topology.parse(topo), float(a2), float(d), _opt(args, cfg, "machine", "shared"))


def _labels(text, default):
    if text is None:
        return default
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def cmd_network(args, cfg) -> None:
    net = _network(args, cfg)
    if not isinstance(net, NetworkState):
        raise ValueError("network build needs --topology, --alpha-sq and --d")
    _emit(json.dumps(net.to_json()) + "\n", args.out)


def cmd_clone_fidelity(args, cfg) -> None:
    M = int(_opt(args, cfg, "M", 2))
    copies = int(_opt(args, cfg, "copies", 2))
    d = _opt(args, cfg, "d")
    a2 = _opt(args, cfg, "state")
    if d is None or a2 is None:
        raise ValueError("clone-fidelity needs --d and --state")
    spec = MachineSpec(M, copies, float(d), _opt(args, cfg, "machine", "shared"))
    if M == 2:
        state = input_qubit(float(a2))
    elif M == 4:
        state = input_pair(float(a2))
    else:
        raise ValueError(f"--state builds qubit (M=2) or pair (M=4) inputs, got M={M}")
    f = clone_fidelity(spec, state, slot=int(_opt(args, cfg, "slot", 0)))
    _emit(f"{f:.12g}\n", args.out)


def cmd_sweep(args, cfg) -> None:
    doc = dict(cfg)
    for name in ("topology", "alpha_count", "d_count", "compute_tmi", "compute_dependence", "compute_finner",
                 "finner_starts", "finner_reduction", "record_timing", "machine"):
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    if args.d_max is not None:
        doc["d_max"] = args.d_max if args.d_max == "auto" else float(args.d_max)
    if args.points is not None:
        doc["alpha_count"], doc["d_count"] = SweepConfig.grid_counts(args.points)
    doc["seed"] = _seed(args, cfg)
    if args.out is not None:
        doc["output"] = args.out
    sc = SweepConfig.from_json(doc)
    if sc.output is None:
        records, _ = run_sweep(sc, workers=args.threads)
        sys.stdout.write(_csv_line(COLUMNS) + "".join(_csv_line(r.row()) for r in records))
    else:
        run_sweep(sc, workers=args.threads)


def cmd_finner(args, cfg) -> None:
    net = _network(args, cfg)
    if not isinstance(net, NetworkState):
        raise ValueError("finner needs a network (with parties), not a bare density matrix")
    opts = SearchOptions(
        starts=int(_opt(args, cfg, "starts", 50)),
        max_iters=int(_opt(args, cfg, "max_iters", 400)),
        seed=_seed(args, cfg),
        workers=args.threads,
        reduction=_opt(args, cfg, "reduction", "lowest"),
    )
    variant = Variant(_opt(args, cfg, "variant", "original"))
    _check_writable(args.out)
    res = search_violation(net, variant, opts)
    mode = "coarse" if variant is Variant.ORIGINAL else "fine"
    table = probabilities(net, res.best_setting, ObserverGrouping(mode, opts.reduction))
    lines = [
        f"variant={variant.value} reduction={opts.reduction.value}",
        f"best_ratio={res.best_ratio:.12g}",
        f"computational_ratio={res.computational_ratio:.12g}",
        "theta=" + ",".join(f"{t:.12g}" for t in res.best_setting.theta),
        "phi=" + ",".join(f"{p:.12g}" for p in res.best_setting.phi),
    ]
    if variant is Variant.MODIFIED and table.num_observers == 6:
        lines.append("note=six-observer bound is an extension of the four-observer form")
    if variant is Variant.ORIGINAL and table.num_observers == 3 and net.topology.value.startswith("bilocal"):
        lines.append(f"bilocality_residual={bilocality_residual(table):.12g}")
    summary = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(summary + table.to_csv())
    else:
        _emit(table.to_csv(), args.out)
        sys.stdout.write(summary)


def _party_parts(net) -> list[list[int]]:
    return [[q - 1 for q in net.parties[p]] for p in ("A", "B", "C")]


def cmd_tmi(args, cfg) -> None:
    net = _network(args, cfg)
    if isinstance(net, NetworkState):
        rho, parts = net.rho, _party_parts(net)
    else:
        if net.num_subsystems != 3:
            raise ValueError("a bare density matrix needs exactly three subsystems for tmi")
        rho, parts = net, [[0], [1], [2]]
    _emit(f"{tmi(rho, parts):.12g}\n", args.out)


def _esq_options(args, cfg) -> EsqOptions:
    return EsqOptions(
        extension_dim=int(_opt(args, cfg, "extension_dim", 4)),
        restarts=int(_opt(args, cfg, "restarts", 16)),
        max_iters=int(_opt(args, cfg, "max_iters", 2000)),
        seed=_seed(args, cfg),
        workers=args.threads,
    )


def cmd_esq(args, cfg) -> None:
    net = _network(args, cfg)
    rho = net.rho if isinstance(net, NetworkState) else net
    n = rho.num_subsystems
    a = _labels(_opt(args, cfg, "side_a"), [1])
    b = _labels(_opt(args, cfg, "side_b"), [i for i in range(1, n + 1) if i not in a])
    for q in a + b:
        if not 1 <= q <= n:
            raise ValueError(f"subsystem label {q} out of range 1..{n}")
    res = squashed_upper(rho, Bipartition([q - 1 for q in a], [q - 1 for q in b]), _esq_options(args, cfg))
    _emit(f"{res.estimate:.12g}\n", args.out)


def cmd_dependence(args, cfg) -> None:
    d = float(_opt(args, cfg, "d", 0.1))
    steps = int(_opt(args, cfg, "alpha_steps", 41))
    opts = _esq_options(args, cfg)
    _check_writable(args.out)
    pts = dependence_curve(d, steps, opts, workers=args.threads, machine=_opt(args, cfg, "machine", "shared"))
    _emit(dependence_csv(pts), args.out)


COMMANDS = {
    "network": cmd_network,
    "clone-fidelity": cmd_clone_fidelity,
    "sweep": cmd_sweep,
    "finner": cmd_finner,
    "tmi": cmd_tmi,
    "esq": cmd_esq,
    "dependence": cmd_dependence,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = _load_config(args.config)
        COMMANDS[args.command](args, cfg)
    except (DomainError, CapacityError) as exc:
        print(f"clonenet: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"clonenet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"clonenet: argument error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
