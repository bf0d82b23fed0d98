"""Command-line interface.

Every command writes its results into an output directory (``--out``, or
``$COREPERIPHERY_OUT/<command>``, or ``./results/<command>``) together with
a ``manifest.json`` recording the arguments, seed, input and output digests,
software version and wall-clock duration. Result files depend only on the
inputs and the seed.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .classic import k_core_decomposition, two_block_partition
from .fit import fit_model
from .graph import Graph, ParseError, read_graph
from .mdl import ESTIMATORS, default_estimator, default_samples, estimate_dl
from .metrics import adjusted_mutual_information, normalized_vi, variation_of_information
from .pipeline import PipelineSettings, full_pipeline
from .sbm import ModelKind, coreness
from .synth import (
    DiscernmentConfig,
    FitSettings,
    LayersConfig,
    PlantedConfig,
    discernment_matrix,
    layered_matrix,
    run_discernment_experiment,
    run_layers_experiment,
    sbm_generate,
)

log = logging.getLogger("coreperiphery")

OUT_ENV = "COREPERIPHERY_OUT"


class InputError(Exception):
    """Invalid user input; reported with exit code 1."""


# ---------------------------------------------------------------- output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Output:
    def __init__(self, directory: Path):
        self.dir = directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            fh.write(text)
        if name not in self.files:
            self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        return self.write(name, dumps(obj))

    def csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self.write(name, buf.getvalue())

    def manifest(self, args, argv, inputs, duration):
        params = {k: v for k, v in vars(args).items() if k not in ("func",)}
        man = {
            "command": args.command,
            "argv": list(argv),
            "params": params,
            "seed": args.seed,
            "inputs": {str(p): _sha256(Path(p)) for p in inputs},
            "outputs": {name: _sha256(self.dir / name) for name in sorted(self.files)},
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "duration_s": round(duration, 3),
        }
        (self.dir / "manifest.json").write_text(dumps(man))


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- inputs


def _load_graph(path: str, fmt: str) -> Graph:
    try:
        return read_graph(path, format=fmt)
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _kind(model: str, layers: Optional[int]) -> ModelKind:
    if model == "layered" and (layers is None or layers < 2):
        raise InputError("layers must be ≥ 2")
    try:
        return ModelKind.parse(model, layers)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _read_partition(path: str, g: Optional[Graph] = None) -> tuple[list, np.ndarray]:
    """Two-column CSV (label, block) with 1-based blocks; returns 0-based blocks."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    if rows and not _is_int(rows[0][1] if len(rows[0]) > 1 else ""):
        rows = rows[1:]
    labels, blocks = [], []
    for k, r in enumerate(rows, 1):
        if len(r) < 2 or not _is_int(r[1]):
            raise InputError(f"{path}: line {k}: expected 'label,block'")
        labels.append(r[0])
        blocks.append(int(r[1]) - 1)
    if not blocks:
        raise InputError(f"{path}: empty partition")
    blocks = np.asarray(blocks, dtype=np.int64)
    if blocks.min() < 0:
        raise InputError(f"{path}: blocks are numbered from 1")
    if g is not None:
        index = {lab: i for i, lab in enumerate(g.labels)}
        theta = np.full(g.n_nodes, -1, dtype=np.int64)
        for lab, b in zip(labels, blocks):
            if lab not in index:
                raise InputError(f"{path}: unknown node label {lab!r}")
            theta[index[lab]] = b
        if (theta < 0).any():
            raise InputError(f"{path}: {(theta < 0).sum()} nodes have no block")
        return list(g.labels), theta
    return labels, blocks


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def _partition_rows(labels, theta):
    return [(lab, int(b) + 1) for lab, b in zip(labels, theta)]


# ---------------------------------------------------------------- commands


def cmd_infer(args, out: Output):
    g = _load_graph(args.graph, args.format)
    kind = _kind(args.model, args.layers)
    fit = fit_model(g, kind, args.chains, args.gibbs, args.mcmc_per_node * g.n_nodes, args.samples,
                    [args.seed], estimator=args.estimator, proposal=args.proposal, eps=args.eps)
    ch = fit.chain
    out.json("infer.json", {
        "model": kind.name,
        "layers": kind.n_blocks,
        "seed": args.seed,
        "labels": list(g.labels),
        "map_partition": fit.partition + 1,
        "partition_source": fit.partition_source,
        "marginals": ch.marginals,
        "coreness": ch.coreness,
        "acceptance_rate": ch.acceptance_rate,
        "log_posterior_trace": ch.log_posterior_trace,
        "densities": ch.p_final,
        "dl": fit.dl.to_dict(),
        "chain_dl_bits": fit.restart_dls,
        "best_chain": fit.best_restart,
    })
    out.csv("partition.csv", ["label", "block"], _partition_rows(g.labels, fit.partition))
    out.csv("coreness.csv", ["label", "coreness"], [(lab, _fmt(c)) for lab, c in zip(g.labels, ch.coreness)])
    return [args.graph]


def cmd_mdl(args, out: Output):
    g = _load_graph(args.graph, args.format)
    _, theta = _read_partition(args.partition, g)
    layers = args.layers
    if args.model == "layered" and layers is None:
        layers = int(theta.max()) + 1
    kind = _kind(args.model, layers)
    if theta.max() >= kind.n_blocks:
        raise InputError(f"partition uses {theta.max() + 1} blocks; model has {kind.n_blocks}")
    if np.bincount(theta, minlength=kind.n_blocks).min() == 0:
        raise InputError("partition leaves a block empty")
    n = default_samples(kind) if args.samples is None else args.samples
    est = default_estimator(kind) if args.estimator is None else args.estimator
    dl = estimate_dl(g, theta, kind, n, rng=args.seed, estimator=est, workers=args.threads)
    res = dl.to_dict()
    res.update({"samples": n, "seed": args.seed, "model": kind.name, "layers": kind.n_blocks})
    out.json("mdl.json", res)
    return [args.graph, args.partition]


def cmd_compare(args, out: Output):
    l1, p1 = _read_partition(args.partition1)
    l2, p2 = _read_partition(args.partition2)
    if sorted(l1) != sorted(l2):
        raise InputError("partitions cover different node sets")
    order = {lab: i for i, lab in enumerate(l2)}
    p2 = p2[[order[lab] for lab in l1]]
    res = {
        "vi_bits": variation_of_information(p1, p2),
        "nvi": normalized_vi(p1, p2) if len(l1) >= 2 else 0.0,
        "ami": adjusted_mutual_information(p1, p2),
        "n_nodes": len(l1),
    }
    out.json("compare.json", res)
    print(dumps(res), end="")
    return [args.partition1, args.partition2]


def cmd_kcores(args, out: Output):
    g = _load_graph(args.graph, args.format)
    cores, shells = k_core_decomposition(g)
    rows = [(lab, int(b) + 1, int(c)) for lab, b, c in zip(g.labels, shells.blocks, cores)]
    out.csv("kcores.csv", ["label", "block", "core_number"], rows)
    return [args.graph]


def cmd_twoblock(args, out: Output):
    g = _load_graph(args.graph, args.format)
    part, z = two_block_partition(g, return_objective=True)
    out.csv("twoblock.csv", ["label", "block"], _partition_rows(g.labels, part.blocks))
    out.json("twoblock.json", {"objective": int(z), "core_size": int((part.blocks == 0).sum())})
    return [args.graph]


def cmd_coreness(args, out: Output):
    try:
        data = json.loads(Path(args.infer_json).read_text())
        marg = np.asarray(data["marginals"], dtype=float)
        labels = data["labels"]
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"{args.infer_json}: not an infer result ({exc})") from exc
    if marg.ndim != 2 or marg.shape[0] != len(labels):
        raise InputError(f"{args.infer_json}: malformed marginals")
    c = coreness(marg)
    out.csv("coreness.csv", ["label", "coreness"], [(lab, _fmt(x)) for lab, x in zip(labels, c)])
    return [args.infer_json]


# ---------------------------------------------------------------- synth


def _read_config(path: Optional[str], pairs) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = ""
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from exc
    cfg = dict(cp["config"])
    for item in pairs or []:
        if "=" not in item:
            raise InputError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip().lower().replace("-", "_")] = v.strip()
    return cfg


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _ints(s: str) -> tuple:
    out = []
    for part in s.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def _fit_settings(cfg: dict, args, base: FitSettings) -> FitSettings:
    fs = FitSettings(**vars(base))
    fs.n_gibbs = int(cfg.pop("gibbs", args.gibbs or fs.n_gibbs))
    fs.mcmc_per_node = int(cfg.pop("mcmc_per_node", args.mcmc_per_node or fs.mcmc_per_node))
    fs.restarts = int(cfg.pop("restarts", args.restarts or fs.restarts))
    fs.n_samples = int(float(cfg.pop("samples", args.samples or fs.n_samples)))
    fs.estimator = cfg.pop("estimator", args.estimator or fs.estimator)
    fs.proposal = cfg.pop("proposal", fs.proposal)
    return fs


def _check_empty(cfg: dict):
    if cfg:
        raise InputError(f"unknown config keys: {', '.join(sorted(cfg))}")


def _planted_from_config(cfg: dict) -> PlantedConfig:
    kind = cfg.pop("kind", "matrix")
    if kind == "discernment":
        n = int(cfg.pop("n", 1500))
        dc = DiscernmentConfig(n_nodes=n, mean_degree=float(cfg["mean_degree"]) if "mean_degree" in cfg else None)
        cfg.pop("mean_degree", None)
        p = float(cfg.pop("p", dc.base_density))
        mat = discernment_matrix(p, float(cfg.pop("gamma")), float(cfg.pop("delta")))
        return PlantedConfig((n // 3, n // 3, n - 2 * (n // 3)), mat)
    if kind == "layered":
        sizes = _ints(cfg.pop("sizes"))
        dens = _floats(cfg.pop("densities"))
        return PlantedConfig(sizes, layered_matrix(dens))
    if kind == "merged":
        lc = LayersConfig(n_nodes=int(cfg.pop("n", 1200)))
        return lc.planted_config(int(cfg.pop("planted_layers")))
    if kind == "matrix":
        sizes = _ints(cfg.pop("sizes"))
        rows = [_floats(r) for r in cfg.pop("matrix").split(";")]
        return PlantedConfig(sizes, np.array(rows))
    raise InputError(f"unknown generator kind {kind!r}")


def cmd_synth(args, out: Output):
    cfg = _read_config(args.config, args.set)
    inputs = [args.config] if args.config else []
    try:
        if args.action == "generate":
            planted = _planted_from_config(cfg)
            _check_empty(cfg)
            g, theta = sbm_generate(planted, args.seed)
            lines = [f"# sbm n={g.n_nodes} m={g.n_edges} seed={args.seed}"]
            lines += [f"{i} {j}" for i, j in g.edges]
            out.write("graph.txt", "\n".join(lines) + "\n")
            out.csv("planted.csv", ["label", "block"], [(str(i), int(b) + 1) for i, b in enumerate(theta)])
        elif args.action == "discernment":
            dc = DiscernmentConfig()
            dc.n_nodes = int(cfg.pop("n", dc.n_nodes))
            if "mean_degree" in cfg:
                dc.mean_degree = float(cfg.pop("mean_degree"))
            dc.gammas = _floats(cfg.pop("gammas", ",".join(map(str, dc.gammas))))
            dc.deltas = _floats(cfg.pop("deltas", ",".join(map(str, dc.deltas))))
            dc.n_networks = int(cfg.pop("reps", dc.n_networks))
            dc.layers = int(cfg.pop("layers", dc.layers))
            dc.fit = _fit_settings(cfg, args, dc.fit)
            _check_empty(cfg)
            records = run_discernment_experiment(dc, args.seed, threads=args.threads)
            cols = ["gamma", "delta", "rep", "n_edges", "dl_hub_spoke_bits", "dl_layered_bits",
                    "dl_l_minus_h_per_edge"]
            out.csv("discernment.csv", cols + ["seed"],
                    [[r[c] if not isinstance(r[c], float) else _fmt(r[c]) for c in cols]
                     + [" ".join(map(str, r["seed"]))] for r in records])
            cells = {}
            for r in records:
                cells.setdefault((r["gamma"], r["delta"]), []).append(r["dl_l_minus_h_per_edge"])
            out.csv("discernment_grid.csv", ["gamma", "delta", "mean_dl_l_minus_h_per_edge", "n"],
                    [(g_, d_, _fmt(np.mean(v)), len(v)) for (g_, d_), v in cells.items()])
        elif args.action == "layers":
            lc = LayersConfig()
            lc.n_nodes = int(cfg.pop("n", lc.n_nodes))
            lc.planted_layers = _ints(cfg.pop("planted_layers", "2-6"))
            lc.fitted_layers = _ints(cfg.pop("fitted_layers", "2-6"))
            lc.n_networks = int(cfg.pop("reps", lc.n_networks))
            if "p_inner" in cfg:
                lc.p_inner = float(cfg.pop("p_inner"))
            if "p_outer" in cfg:
                lc.p_outer = float(cfg.pop("p_outer"))
            lc.fit = _fit_settings(cfg, args, lc.fit)
            _check_empty(cfg)
            res = run_layers_experiment(lc, args.seed, threads=args.threads)
            out.csv("layers.csv", ["planted_layers", "fitted_layers", "mean_dl_per_edge", "is_argmin"],
                    [(L, n, _fmt(v), int(res["argmin"][L] == n))
                     for L, row in res["mean_dl_per_edge"].items() for n, v in row.items()])
            out.csv("layers_networks.csv", ["planted_layers", "network", "n_edges", "fitted_layers", "dl_bits"],
                    [(r["planted_layers"], r["network"], r["n_edges"], n, _fmt(v))
                     for r in res["records"] for n, v in r["dl_bits"].items()])
            out.json("layers.json", {"argmin": res["argmin"],
                                     "per_network_best": [[r["planted_layers"], r["network"], r["best_layers"]]
                                                          for r in res["records"]]})
    except KeyError as exc:
        raise InputError(f"missing config key {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return inputs


def cmd_experiment(args, out: Output):
    g = _load_graph(args.graph, args.format)
    layers = _ints(args.layer_range)
    if not layers or min(layers) < 2:
        raise InputError("layers must be ≥ 2")
    st = PipelineSettings(layer_range=layers, restarts=args.restarts, n_gibbs=args.gibbs,
                          mcmc_per_node=args.mcmc_per_node, n_samples=args.samples,
                          estimator=args.estimator, proposal=args.proposal)
    rep = full_pipeline(g, st, seed=args.seed, threads=args.threads)
    parts = rep.pop("_partitions")
    cor = rep.pop("_coreness")
    cores = rep.pop("_core_numbers")
    out.json("report.json", rep)
    names = list(parts)
    out.csv("partitions.csv", ["label"] + names,
            [[lab] + [int(parts[k][i]) + 1 for k in names] for i, lab in enumerate(g.labels)])
    out.csv("coreness.csv", ["label", "hub_spoke", "layered", "core_number"],
            [(lab, _fmt(cor["hub_spoke"][i]), _fmt(cor["layered"][i]), int(cores[i]))
             for i, lab in enumerate(g.labels)])
    print(f"verdict: {rep['verdict']} (hub-and-spoke minus layered {rep['difference_bits']:.1f} bits, "
          f"best layered l={rep['best_layers']})")
    return [args.graph]


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or results/<command>)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("-v", "--verbose", action="store_true")

    graph_in = argparse.ArgumentParser(add_help=False)
    graph_in.add_argument("graph", help="edge list file")
    graph_in.add_argument("--format", choices=("plain", "konect-tsv"), default="plain")

    mcmc = argparse.ArgumentParser(add_help=False)
    mcmc.add_argument("--gibbs", type=int, default=100, help="Gibbs iterations")
    mcmc.add_argument("--mcmc-per-node", type=int, default=10, help="label proposals per node per Gibbs iteration")
    mcmc.add_argument("--proposal", choices=("uniform", "neighborhood"), default="uniform")
    mcmc.add_argument("--eps", type=float, default=0.1, help="neighborhood proposal smoothing")
    mcmc.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples for the description length")
    mcmc.add_argument("--estimator", choices=ESTIMATORS, default=None)

    p = argparse.ArgumentParser(prog="coreperiphery", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("infer", parents=[common, graph_in, mcmc], help="fit one block model")
    s.add_argument("--model", choices=("hub-spoke", "layered"), required=True)
    s.add_argument("--layers", type=int, default=None)
    s.add_argument("--chains", type=int, default=1, help="independent chains; the best by MDL is kept")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("mdl", parents=[common, graph_in], help="description length of a partition")
    s.add_argument("--partition", required=True, help="CSV label,block (blocks from 1)")
    s.add_argument("--model", choices=("hub-spoke", "layered"), required=True)
    s.add_argument("--layers", type=int, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--estimator", choices=ESTIMATORS, default=None)
    s.set_defaults(func=cmd_mdl)

    s = sub.add_parser("compare", parents=[common], help="VI, NVI and AMI between two partitions")
    s.add_argument("partition1")
    s.add_argument("partition2")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("kcores", parents=[common, graph_in], help="k-core decomposition")
    s.set_defaults(func=cmd_kcores)

    s = sub.add_parser("twoblock", parents=[common, graph_in], help="two-block core-periphery partition")
    s.set_defaults(func=cmd_twoblock)

    s = sub.add_parser("coreness", parents=[common], help="coreness from an infer result")
    s.add_argument("infer_json")
    s.set_defaults(func=cmd_coreness)

    s = sub.add_parser("synth", parents=[common], help="synthetic networks and experiments")
    s.add_argument("action", choices=("generate", "discernment", "layers"))
    s.add_argument("--config", help="key = value file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.add_argument("--gibbs", type=int, default=None)
    s.add_argument("--mcmc-per-node", type=int, default=None)
    s.add_argument("--restarts", type=int, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--estimator", choices=ESTIMATORS, default=None)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("experiment", parents=[common, graph_in, mcmc], help="full typology of one network")
    s.add_argument("--layer-range", default="2-6")
    s.add_argument("--restarts", type=int, default=3)
    s.set_defaults(func=cmd_experiment, estimator="quadrature")
    return p


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUT_ENV)
    return Path(base or "results") / args.command


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        out = Output(_out_dir(args))
        inputs = args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.manifest(args, argv, inputs, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
