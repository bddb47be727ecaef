"""Command line entry points.

Exit codes: 0 on success, 2 for configuration problems (bad flags, missing
or invalid config files, bad kernel parameters), 3 for data and runtime
failures (malformed datasets, corrupt checkpoints, divergence).  The
DIFFGRAPH_SEED environment variable overrides the configured seed wherever
one is used.  All outputs are deterministic functions of the configuration,
byte for byte, regardless of --workers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .augment import AugmentConfig
from .data import (
    community_diffusion_demo,
    generate_sbm_benchmark,
    load_checkpoint,
    load_dataset,
    load_matrix_csv,
    save_checkpoint,
    save_dataset,
    save_matrix_csv,
)
from .diffusion import DiffusionConfig, build_kernel
from .encoder import EncoderConfig
from .errors import ConfigError, DataError, DiffgraphError
from .evaluation import embed_dataset, linear_probe
from .gcl import GclConfig, train_gcl
from .gmae import GmaeConfig, train_gmae
from .graphs import Graph, Hypergraph
from .readout import READOUT_KINDS, ReadoutConfig
from .sparse import SparseMatrix

_KIND_ALIASES = {"rw": "random_walk"}
_CLI_KINDS = ("rw", "random_walk", "ppr", "heat")


# -- config schema ---------------------------------------------------------------

_REQUIRED = object()


@dataclass(frozen=True)
class _Field:
    kind: str  # "int" | "number" | "bool" | "str" | "number_list" | "dict"
    default: object = None
    schema: dict | None = None
    nullable: bool = False


def _check_scalar(value, field: _Field, path: str):
    if field.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if field.kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if field.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
        return value
    if field.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if field.kind == "number_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of numbers")
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}[{i}]: expected a number, got {v!r}")
            out.append(float(v))
        return out
    raise ConfigError(f"{path}: unhandled field kind {field.kind!r}")


def validate_config(payload, schema: dict, path: str = "config") -> dict:
    """Recursive schema check: types enforced, unknown keys rejected."""
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(payload) - set(schema)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    result = {}
    for key, field in schema.items():
        where = f"{path}.{key}"
        if key not in payload:
            if field.default is _REQUIRED:
                raise ConfigError(f"{where}: required key is missing")
            if field.kind == "dict" and not field.nullable:
                result[key] = validate_config({}, field.schema, where)
            else:
                result[key] = field.default
            continue
        value = payload[key]
        if value is None:
            if not field.nullable:
                raise ConfigError(f"{where}: may not be null")
            result[key] = None
        elif field.kind == "dict":
            result[key] = validate_config(value, field.schema, where)
        else:
            result[key] = _check_scalar(value, field, where)
    return result


def _diffusion_schema() -> dict:
    d = DiffusionConfig()
    return {
        "kind": _Field("str", d.kind),
        "lam": _Field("number", d.lam),
        "alpha": _Field("number", d.alpha),
        "time": _Field("number", d.time),
        "order": _Field("int", d.order),
        "series_weights": _Field("number_list", None, nullable=True),
        "sparsify_epsilon": _Field("number", d.sparsify_epsilon),
        "sparsify_top_k": _Field("int", None, nullable=True),
    }


def _encoder_schema() -> dict:
    e = EncoderConfig(feature_dim=1)
    return {
        "feature_dim": _Field("int", None, nullable=True),
        "hidden_dim": _Field("int", e.hidden_dim),
        "out_dim": _Field("int", e.out_dim),
        "layers": _Field("int", e.layers),
        "activation": _Field("str", e.activation),
        "structure_kind": _Field("str", None, nullable=True),
    }


def _gcl_schema() -> dict:
    g, a = GclConfig(), AugmentConfig()
    return {
        "seed": _Field("int", 0),
        "dataset": _Field("str", _REQUIRED),
        "output_dir": _Field("str", _REQUIRED),
        "encoder": _Field("dict", schema=_encoder_schema()),
        "gcl": _Field("dict", schema={
            "tau": _Field("number", g.tau),
            "lr": _Field("number", g.lr),
            "epochs": _Field("int", g.epochs),
            "batch_size": _Field("int", g.batch_size),
        }),
        "diffusion": _Field("dict", schema=_diffusion_schema()),
        "augment": _Field("dict", schema={
            "strategy": _Field("str", a.strategy),
            "p_min": _Field("number", a.p_min),
            "p_max": _Field("number", a.p_max),
            "mask_ratio": _Field("number", a.mask_ratio),
        }),
        "readout": _Field("dict", schema={
            "kind": _Field("str", "mean"),
            "diffusion": _Field("dict", None, schema=_diffusion_schema(), nullable=True),
        }),
    }


def _gmae_schema() -> dict:
    m = GmaeConfig()
    return {
        "seed": _Field("int", 0),
        "dataset": _Field("str", _REQUIRED),
        "output_dir": _Field("str", _REQUIRED),
        "encoder": _Field("dict", schema=_encoder_schema()),
        "gmae": _Field("dict", schema={
            "mask_ratio": _Field("number", m.mask_ratio),
            "structure_loss_weight": _Field("number", m.structure_loss_weight),
            "structure_reconstruction": _Field("bool", m.structure_reconstruction),
            "negative_ratio": _Field("number", m.negative_ratio),
            "epochs": _Field("int", m.epochs),
            "lr": _Field("number", m.lr),
            "strategy": _Field("str", m.strategy),
        }),
        "diffusion": _Field("dict", schema=_diffusion_schema()),
    }


def _load_config(path: str, schema: dict) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return validate_config(payload, schema)


def _resolve_seed(seed: int) -> int:
    raw = os.environ.get("DIFFGRAPH_SEED")
    if raw is None:
        return seed
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"DIFFGRAPH_SEED must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ConfigError(f"DIFFGRAPH_SEED must be non-negative, got {value}")
    return value


# -- config assembly -------------------------------------------------------------


def _diffusion_config(section: dict) -> DiffusionConfig:
    kind = _KIND_ALIASES.get(section["kind"], section["kind"])
    weights = section["series_weights"]
    config = DiffusionConfig(
        kind=kind,
        lam=section["lam"],
        alpha=section["alpha"],
        time=section["time"],
        order=section["order"],
        series_weights=None if weights is None else tuple(weights),
        sparsify_epsilon=section["sparsify_epsilon"],
        sparsify_top_k=section["sparsify_top_k"],
    )
    config.validate()
    return config


def _encoder_config(section: dict, instances: list) -> EncoderConfig:
    if not instances:
        raise DataError("dataset has no instances")
    actual = instances[0].features.shape[1]
    feature_dim = section["feature_dim"]
    if feature_dim is None:
        feature_dim = actual
    elif feature_dim != actual:
        raise DataError(
            f"config feature_dim {feature_dim} does not match dataset feature dim {actual}"
        )
    kind = section["structure_kind"]
    if kind is None:
        kind = "hypergraph" if isinstance(instances[0], Hypergraph) else "graph"
    config = EncoderConfig(
        feature_dim=feature_dim,
        hidden_dim=section["hidden_dim"],
        out_dim=section["out_dim"],
        layers=section["layers"],
        activation=section["activation"],
        structure_kind=kind,
    )
    config.validate()
    return config


def _readout_config(section: dict, fallback: DiffusionConfig) -> ReadoutConfig:
    kind = section["kind"]
    sub = section["diffusion"]
    if kind == "diffusion":
        diffusion = fallback if sub is None else _diffusion_config(sub)
        config = ReadoutConfig(kind=kind, diffusion=diffusion)
    else:
        if sub is not None:
            raise ConfigError("config.readout.diffusion only applies to the diffusion readout")
        config = ReadoutConfig(kind=kind)
    config.validate()
    return config


# -- output writers --------------------------------------------------------------


def _write_telemetry(path: str, rows: list, columns: tuple) -> None:
    lines = [",".join(columns)]
    for row in rows:
        cells = [str(int(row[columns[0]]))]
        cells += [repr(float(row[c])) for c in columns[1:]]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_training_outputs(out_dir: str, store, telemetry: list, columns: tuple) -> tuple:
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "checkpoint.json")
    tele = os.path.join(out_dir, "telemetry.csv")
    save_checkpoint(ckpt, store)
    _write_telemetry(tele, telemetry, columns)
    return ckpt, tele


# -- subcommands -----------------------------------------------------------------


def cmd_pretrain_gcl(args) -> int:
    config = _load_config(args.config, _gcl_schema())
    seed = _resolve_seed(config["seed"])
    dataset = load_dataset(config["dataset"])
    encoder_config = _encoder_config(config["encoder"], dataset.instances)
    diffusion = _diffusion_config(config["diffusion"])
    augment = AugmentConfig(**config["augment"])
    readout = _readout_config(config["readout"], diffusion)
    gcl_config = GclConfig(
        tau=config["gcl"]["tau"],
        lr=config["gcl"]["lr"],
        epochs=config["gcl"]["epochs"],
        batch_size=config["gcl"]["batch_size"],
        diffusion=diffusion,
        augment=augment,
        readout=readout,
    )
    store, telemetry = train_gcl(
        dataset.instances, encoder_config, gcl_config, seed=seed, workers=args.workers
    )
    ckpt, tele = _write_training_outputs(
        config["output_dir"], store, telemetry, ("epoch", "loss", "pos_align", "neg_align")
    )
    final = telemetry[-1]["loss"] if telemetry else float("nan")
    print(f"wrote {ckpt} and {tele} ({len(telemetry)} epochs, final loss {final:.6f})")
    return 0


def cmd_pretrain_gmae(args) -> int:
    config = _load_config(args.config, _gmae_schema())
    seed = _resolve_seed(config["seed"])
    dataset = load_dataset(config["dataset"])
    encoder_config = _encoder_config(config["encoder"], dataset.instances)
    section = config["gmae"]
    gmae_config = GmaeConfig(
        mask_ratio=section["mask_ratio"],
        structure_loss_weight=section["structure_loss_weight"],
        structure_reconstruction=section["structure_reconstruction"],
        negative_ratio=section["negative_ratio"],
        epochs=section["epochs"],
        lr=section["lr"],
        strategy=section["strategy"],
        diffusion=_diffusion_config(config["diffusion"]),
    )
    store, telemetry = train_gmae(
        dataset.instances, encoder_config, gmae_config, seed=seed, workers=args.workers
    )
    ckpt, tele = _write_training_outputs(
        config["output_dir"], store, telemetry,
        ("epoch", "total_loss", "node_loss", "struct_loss"),
    )
    final = telemetry[-1]["total_loss"] if telemetry else float("nan")
    print(f"wrote {ckpt} and {tele} ({len(telemetry)} epochs, final loss {final:.6f})")
    return 0


def cmd_diffuse(args) -> int:
    matrix = load_matrix_csv(args.input)
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise DataError(f"adjacency must be square, got {matrix.shape}")
    if np.max(np.abs(matrix - matrix.T)) > 1e-9:
        raise DataError("input matrix must be symmetric within 1e-9")
    sym = 0.5 * (matrix + matrix.T)
    np.fill_diagonal(sym, 0.0)  # self-loops are implicit in the transition
    graph = Graph(SparseMatrix.from_dense(sym), np.zeros((n, 1)))
    config = DiffusionConfig(
        kind=_KIND_ALIASES.get(args.kind, args.kind),
        lam=args.lam,
        alpha=args.alpha,
        time=args.time,
        order=args.order,
        sparsify_epsilon=args.epsilon,
        sparsify_top_k=args.top_k,
    )
    config.validate()
    kernel = build_kernel(graph, config)
    save_matrix_csv(
        args.output, kernel.matrix.to_dense(),
        header=f"{config.kind} kernel, order {config.order}",
    )
    print(f"wrote {args.output}")
    return 0


def cmd_eval(args) -> int:
    seed = _resolve_seed(args.seed)
    store = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    if dataset.labels is None:
        raise DataError(f"dataset {args.dataset} has no labels to probe")
    diffusion = None
    if args.readout == "diffusion":
        diffusion = DiffusionConfig(
            kind=_KIND_ALIASES.get(args.diffusion_kind, args.diffusion_kind),
            lam=args.lam, alpha=args.alpha, time=args.time, order=args.order,
        )
        diffusion.validate()
    readout = ReadoutConfig(kind=args.readout, diffusion=diffusion)
    readout.validate()
    embeddings = embed_dataset(store, dataset.instances, readout, workers=args.workers)
    result = linear_probe(
        embeddings, dataset.labels,
        split_fraction=args.split_fraction,
        seed=seed, n_seeds=args.seeds, epochs=args.epochs, lr=args.lr,
    )
    payload = result.to_dict()
    payload["config"] = {
        "checkpoint": args.checkpoint,
        "dataset": args.dataset,
        "readout": args.readout,
        "readout_diffusion": None if diffusion is None else asdict(diffusion),
        "split_fraction": args.split_fraction,
        "n_seeds": args.seeds,
        "seed": seed,
        "epochs": args.epochs,
        "lr": args.lr,
        "workers": args.workers,
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(
        f"wrote {args.output} (accuracy {result.accuracy.mean:.4f}"
        f" +- {result.accuracy.std:.4f}, auc {result.auc.mean:.4f})"
    )
    return 0


def cmd_demo_community(args) -> int:
    summary = community_diffusion_demo(args.out_dir, topology=args.topology, order=args.order)
    for kind, stats in summary["kernels"].items():
        print(
            f"{kind}: disconnected off-block max = {stats['intra_offblock_max']!r}"
            f" (exactly zero), bridged off-block min/max ="
            f" {stats['cross_offblock_min']!r}/{stats['cross_offblock_max']!r} (positive)"
        )
    print(
        f"heat min off-block {summary['heat_min_offblock']!r} >="
        f" ppr min off-block {summary['ppr_min_offblock']!r}:"
        f" {summary['heat_at_least_ppr']}"
    )
    return 0


def cmd_gen_sbm(args) -> int:
    seed = _resolve_seed(args.seed)
    dataset = generate_sbm_benchmark(
        args.n_graphs, args.n_nodes, tuple(args.communities),
        args.p_in, args.p_out, args.feature_dim, seed,
        hypergraphs=args.hypergraphs,
    )
    save_dataset(args.output, dataset)
    print(f"wrote {args.output} ({len(dataset)} instances)")
    return 0


# -- parser ----------------------------------------------------------------------


def _add_kernel_flags(parser, kind_flag: str, default_kind: str | None) -> None:
    parser.add_argument(
        kind_flag, dest=kind_flag.strip("-").replace("-", "_"),
        choices=_CLI_KINDS, default=default_kind,
        required=default_kind is None,
    )
    parser.add_argument("--lambda", dest="lam", type=float, default=DiffusionConfig().lam,
                        help="random-walk decay")
    parser.add_argument("--alpha", type=float, default=DiffusionConfig().alpha,
                        help="ppr restart probability")
    parser.add_argument("--time", type=float, default=DiffusionConfig().time,
                        help="heat diffusion time")
    parser.add_argument("--order", type=int, default=DiffusionConfig().order,
                        help="series truncation order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffgraph",
        description="Diffusion-guided self-supervised pretraining on graphs and hypergraphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("pretrain-gcl", help="contrastive pretraining from a JSON config")
    p.add_argument("config", help="path to a JSON config file")
    p.add_argument("--workers", type=int, default=1, help="threads for per-instance work")
    p.set_defaults(func=cmd_pretrain_gcl)

    p = sub.add_parser("pretrain-gmae", help="masked-autoencoder pretraining from a JSON config")
    p.add_argument("config", help="path to a JSON config file")
    p.add_argument("--workers", type=int, default=1, help="threads for per-instance work")
    p.set_defaults(func=cmd_pretrain_gmae)

    p = sub.add_parser("diffuse", help="write the diffusion kernel of an adjacency CSV")
    p.add_argument("input", help="adjacency matrix CSV (diagonal is zeroed)")
    p.add_argument("--output", required=True, help="output CSV path")
    _add_kernel_flags(p, "--kind", default_kind=None)
    p.add_argument("--epsilon", type=float, default=0.0, help="drop kernel entries below this")
    p.add_argument("--top-k", dest="top_k", type=int, default=None,
                   help="keep only the k largest entries per row")
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("eval", help="linear-probe a checkpoint on a labeled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", required=True, help="results JSON path")
    p.add_argument("--readout", choices=READOUT_KINDS, default="mean")
    p.add_argument("--split-fraction", dest="split_fraction", type=float, default=0.8)
    p.add_argument("--seeds", type=int, default=5, help="number of probe seeds")
    p.add_argument("--seed", type=int, default=0, help="base seed for the probe streams")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--workers", type=int, default=1)
    _add_kernel_flags(p, "--diffusion-kind", default_kind="ppr")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo-community", help="two-community diffusion demo CSVs")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--topology", choices=("clique", "path"), default="clique")
    p.add_argument("--order", type=int, default=4)
    p.set_defaults(func=cmd_demo_community)

    p = sub.add_parser("gen-sbm", help="generate a block-model classification dataset")
    p.add_argument("--output", required=True, help="dataset JSON path")
    p.add_argument("--n-graphs", dest="n_graphs", type=int, default=200)
    p.add_argument("--n-nodes", dest="n_nodes", type=int, default=20)
    p.add_argument("--communities", type=int, nargs="+", default=[2, 4],
                   help="community counts; instance i gets class i mod len")
    p.add_argument("--p-in", dest="p_in", type=float, default=0.6)
    p.add_argument("--p-out", dest="p_out", type=float, default=0.15)
    p.add_argument("--feature-dim", dest="feature_dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hypergraphs", action="store_true",
                   help="emit star-expansion hypergraphs instead of graphs")
    p.set_defaults(func=cmd_gen_sbm)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DiffgraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
