"""Synthetic generators, connectome ingestion, and every file format.

Formats are deliberately plain: matrices as CSV with shortest round-trip
decimals, datasets and checkpoints as JSON.  Loaders reject malformed input
with the offending line or key named; every generator is deterministic in
(parameters, seed).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionConfig, build_kernel
from .encoder import ParameterStore
from .errors import ConfigError, DataError
from .graphs import (
    Graph,
    Hypergraph,
    Structure,
    edge_list,
    graph_from_edges,
    hyperedge_members,
    hypergraph_from_memberships,
)
from .rng import stream_rng
from .sparse import SparseMatrix

DATASET_FORMAT_VERSION = 1

_DEMO_KINDS = ("random_walk", "ppr", "heat")


@dataclass(frozen=True)
class LabeledDataset:
    instances: list
    names: list
    labels: list | None = None

    def __post_init__(self):
        if len(self.names) != len(self.instances):
            raise DataError("names and instances must align")
        if self.labels is not None:
            if len(self.labels) != len(self.instances):
                raise DataError("labels and instances must align")
            for label in self.labels:
                if not isinstance(label, (int, np.integer)) or isinstance(label, bool) or label < 0:
                    raise DataError(f"labels must be non-negative integers, got {label!r}")

    def __len__(self) -> int:
        return len(self.instances)


# -- synthetic generation ------------------------------------------------------


def community_assignments(n_nodes: int, n_communities: int) -> np.ndarray:
    """Contiguous near-equal blocks: the first n % c blocks get one extra node."""
    base = n_nodes // n_communities
    sizes = np.full(n_communities, base, dtype=np.int64)
    sizes[: n_nodes % n_communities] += 1
    return np.repeat(np.arange(n_communities), sizes)


def generate_sbm(
    n_nodes: int,
    n_communities: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
) -> Graph:
    """Stochastic block model draw with community-revealing noisy features.

    Upper-triangle Bernoulli edges (p_in within a block, p_out across),
    then features = one-hot community id padded to feature_dim plus
    N(0, 0.1^2) noise.  Edge draws happen before feature noise on one
    stream, so the structure is stable under feature_dim changes.
    """
    if n_nodes < 1 or n_communities < 1:
        raise ConfigError("n_nodes and n_communities must be >= 1")
    if n_communities > n_nodes:
        raise ConfigError(f"cannot split {n_nodes} nodes into {n_communities} communities")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ConfigError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_dim < n_communities:
        raise ConfigError(
            f"feature_dim {feature_dim} cannot one-hot encode {n_communities} communities"
        )
    rng = stream_rng(seed, "sbm")
    block = community_assignments(n_nodes, n_communities)
    prob = np.where(block[:, None] == block[None, :], p_in, p_out)
    draws = rng.random((n_nodes, n_nodes))
    rows, cols = np.nonzero(np.triu(draws < prob, 1))
    one_hot = np.zeros((n_nodes, feature_dim))
    one_hot[np.arange(n_nodes), block] = 1.0
    features = one_hot + rng.normal(0.0, 0.1, size=(n_nodes, feature_dim))
    if rows.size == 0:
        return Graph(SparseMatrix.zeros(n_nodes, n_nodes), features)
    return graph_from_edges(n_nodes, np.stack([rows, cols], 1), features=features)


def generate_sbm_benchmark(
    n_graphs: int,
    n_nodes: int,
    communities: tuple[int, ...],
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
    hypergraphs: bool = False,
) -> LabeledDataset:
    """Classification benchmark whose classes differ by community count.

    Instance i belongs to class i mod len(communities) and is drawn with an
    instance-specific seed, so the corpus is reproducible element-wise.
    """
    if n_graphs < 1:
        raise ConfigError("n_graphs must be >= 1")
    if not communities:
        raise ConfigError("need at least one community count")
    instances, names, labels = [], [], []
    for i in range(n_graphs):
        label = i % len(communities)
        child_seed = int(stream_rng(seed, "bench", i).integers(1 << 62))
        graph = generate_sbm(
            n_nodes, communities[label], p_in, p_out, feature_dim, seed=child_seed
        )
        instances.append(star_expansion(graph) if hypergraphs else graph)
        names.append(f"sbm_{i:04d}")
        labels.append(label)
    return LabeledDataset(instances=instances, names=names, labels=labels)


def star_expansion(graph: Graph) -> Hypergraph:
    """One hyperedge per node: the node plus its neighbors; M = N, W = Id."""
    adj = graph.adjacency
    members = []
    for i in range(graph.n_nodes):
        neighbors = adj.col_indices[adj.row_offsets[i]:adj.row_offsets[i + 1]]
        members.append(np.concatenate([[i], neighbors]))
    return hypergraph_from_memberships(
        graph.n_nodes, members, np.ones(graph.n_nodes), graph.features
    )


# -- connectome ingestion --------------------------------------------------------


def _check_connectivity_matrix(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"connectivity matrix must be square, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DataError("connectivity matrix must be finite")
    if np.max(np.abs(c - c.T)) > 1e-9:
        raise DataError("connectivity matrix must be symmetric within 1e-9")
    return 0.5 * (c + c.T)


def _profile_features(c: np.ndarray) -> np.ndarray:
    features = c.copy()
    np.fill_diagonal(features, 0.0)
    return features


def connectome_from_matrix(
    c: np.ndarray, threshold: float | None = None, top_k: int | None = None
) -> Graph:
    """Graph from a symmetric connectivity matrix.

    Keeps off-diagonal entries with |c_ij| >= threshold, or each row's top_k
    largest |c_ij| (symmetrized: an edge survives if either endpoint picks
    it).  Edge weight is |c_ij|; node features are the node's connectivity
    profile with the diagonal zeroed.
    """
    if (threshold is None) == (top_k is None):
        raise ConfigError("pass exactly one of threshold or top_k")
    c = _check_connectivity_matrix(c)
    n = c.shape[0]
    strength = np.abs(c)
    np.fill_diagonal(strength, 0.0)
    if threshold is not None:
        if threshold < 0:
            raise ConfigError(f"threshold must be >= 0, got {threshold}")
        keep = strength >= threshold
    else:
        if not isinstance(top_k, (int, np.integer)) or not (1 <= top_k < n):
            raise ConfigError(f"top_k must satisfy 1 <= k < {n}, got {top_k}")
        keep = np.zeros((n, n), dtype=bool)
        for i in range(n):
            picked = _largest_neighbors(strength[i], i, int(top_k))
            keep[i, picked] = True
        keep = keep | keep.T
    keep &= strength > 0.0
    rows, cols = np.nonzero(np.triu(keep, 1))
    features = _profile_features(c)
    if rows.size == 0:
        return Graph(SparseMatrix.zeros(n, n), features)
    return graph_from_edges(n, np.stack([rows, cols], 1), strength[rows, cols], features)


def _largest_neighbors(row_strength: np.ndarray, node: int, k: int) -> np.ndarray:
    # ties resolved toward the lower index via stable sort on (-strength, j)
    order = np.lexsort((np.arange(row_strength.size), -row_strength))
    order = order[order != node]
    return order[:k]


def hypergraph_from_knn(c: np.ndarray, k: int) -> Hypergraph:
    """One hyperedge per node: the node plus its k strongest neighbors."""
    c = _check_connectivity_matrix(c)
    n = c.shape[0]
    if not isinstance(k, (int, np.integer)) or not (1 <= k < n):
        raise ConfigError(f"k must satisfy 1 <= k < {n}, got {k}")
    strength = np.abs(c)
    np.fill_diagonal(strength, 0.0)
    members = []
    for i in range(n):
        picked = _largest_neighbors(strength[i], i, int(k))
        members.append(np.sort(np.concatenate([[i], picked])))
    return hypergraph_from_memberships(n, members, np.ones(n), _profile_features(c))


# -- matrix CSV ------------------------------------------------------------------


def save_matrix_csv(path: str, matrix: np.ndarray, header: str | None = None) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"matrix must be 2-d, got shape {matrix.shape}")
    lines = []
    if header is not None:
        lines.append(f"# {header}")
    for row in matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix_csv(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read matrix file {path}: {exc}") from exc
    lines = raw.splitlines()
    start = 0
    if lines and lines[0].startswith("#"):
        start = 1
    rows = []
    width = None
    for lineno in range(start, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno + 1}: not a number: {exc}") from exc
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataError(
                f"{path}:{lineno + 1}: row has {len(values)} columns, expected {width}"
            )
        rows.append(values)
    if not rows:
        raise DataError(f"{path}: no matrix rows found")
    return np.array(rows, dtype=np.float64)


# -- dataset JSON ----------------------------------------------------------------


def _instance_to_dict(name: str, structure: Structure) -> dict:
    if isinstance(structure, Graph):
        rows, cols, weights = edge_list(structure)
        return {
            "name": name,
            "kind": "graph",
            "n": structure.n_nodes,
            "edges": [[int(i), int(j)] for i, j in zip(rows, cols)],
            "weights": [float(w) for w in weights],
            "features": structure.features.tolist(),
        }
    return {
        "name": name,
        "kind": "hypergraph",
        "n": structure.n_nodes,
        "incidence": [[int(i) for i in e] for e in hyperedge_members(structure)],
        "weights": [float(w) for w in structure.hyperedge_weights],
        "features": structure.features.tolist(),
    }


def save_dataset(path: str, dataset: LabeledDataset) -> None:
    payload = {
        "format_version": DATASET_FORMAT_VERSION,
        "instances": [
            _instance_to_dict(name, inst)
            for name, inst in zip(dataset.names, dataset.instances)
        ],
        "labels": None if dataset.labels is None else [int(x) for x in dataset.labels],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _instance_from_dict(entry: dict, idx: int):
    where = f"instances[{idx}]"
    if not isinstance(entry, dict):
        raise DataError(f"{where}: instance must be a mapping")
    kind = entry.get("kind")
    if kind not in ("graph", "hypergraph"):
        raise DataError(f"{where}: unknown kind {kind!r}")
    struct_key = "edges" if kind == "graph" else "incidence"
    required = {"name", "kind", "n", struct_key, "weights", "features"}
    unknown = set(entry) - required
    if unknown:
        raise DataError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(entry)
    if missing:
        raise DataError(f"{where}: missing keys {sorted(missing)}")
    n = entry["n"]
    if not isinstance(n, int) or n < 1:
        raise DataError(f"{where}: n must be a positive integer, got {n!r}")
    features = np.asarray(entry["features"], dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n:
        raise DataError(f"{where}: features must be an {n}-row matrix")
    weights = np.asarray(entry["weights"], dtype=np.float64)
    try:
        if kind == "graph":
            edges = np.asarray(entry["edges"], dtype=np.int64).reshape(-1, 2)
            if weights.shape != (edges.shape[0],):
                raise DataError(f"{where}: need one weight per edge")
            structure = graph_from_edges(n, edges, weights, features)
        else:
            memberships = entry["incidence"]
            if not isinstance(memberships, list):
                raise DataError(f"{where}: incidence must be a list of node lists")
            if weights.shape != (len(memberships),):
                raise DataError(f"{where}: need one weight per hyperedge")
            structure = hypergraph_from_memberships(n, memberships, weights, features)
    except DataError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise DataError(f"{where}: {exc}") from exc
    name = entry["name"]
    if not isinstance(name, str):
        raise DataError(f"{where}: name must be a string")
    return name, structure


def load_dataset(path: str) -> LabeledDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: dataset must be a JSON object")
    required = {"format_version", "instances", "labels"}
    unknown = set(payload) - required
    if unknown:
        raise DataError(f"{path}: unknown keys {sorted(unknown)}")
    if payload.get("format_version") != DATASET_FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported format_version {payload.get('format_version')!r}"
        )
    entries = payload.get("instances")
    if not isinstance(entries, list):
        raise DataError(f"{path}: instances must be a list")
    names, instances = [], []
    for idx, entry in enumerate(entries):
        name, structure = _instance_from_dict(entry, idx)
        names.append(name)
        instances.append(structure)
    labels = payload.get("labels")
    if labels is not None and (
        not isinstance(labels, list) or len(labels) != len(instances)
    ):
        raise DataError(f"{path}: labels must be null or one integer per instance")
    return LabeledDataset(instances=instances, names=names, labels=labels)


# -- checkpoint JSON -------------------------------------------------------------


def save_checkpoint(path: str, store: ParameterStore) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(store.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path: str) -> ParameterStore:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return ParameterStore.from_dict(payload)


# -- community diffusion demo ----------------------------------------------------


def community_demo_structures(topology: str = "clique") -> tuple[Graph, Graph]:
    """Two 4-node communities, disconnected and with one bridge (3, 4)."""
    if topology == "clique":
        block = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    elif topology == "path":
        block = [(0, 1), (1, 2), (2, 3)]
    else:
        raise ConfigError(f"unknown demo topology {topology!r}")
    edges = block + [(i + 4, j + 4) for i, j in block]
    features = np.zeros((8, 1))
    disconnected = graph_from_edges(8, edges, features=features)
    bridged = graph_from_edges(8, edges + [(3, 4)], features=features)
    return disconnected, bridged


def _demo_config(kind: str, order: int) -> DiffusionConfig:
    return DiffusionConfig(kind=kind, order=order)


def community_diffusion_demo(out_dir: str, topology: str = "clique", order: int = 4) -> dict:
    """Write per-kernel adjacency/intra/cross CSVs and return block-mass stats.

    The disconnected stage must show exactly zero inter-block mass, the
    bridged stage strictly positive mass; both are verified here.  The
    heat-vs-PPR minimum off-block comparison is reported, not enforced.
    """
    disconnected, bridged = community_demo_structures(topology)
    os.makedirs(out_dir, exist_ok=True)
    off_block = np.zeros((8, 8), dtype=bool)
    off_block[:4, 4:] = True
    off_block[4:, :4] = True
    summary: dict = {"topology": topology, "order": order, "kernels": {}}
    for kind in _DEMO_KINDS:
        config = _demo_config(kind, order)
        intra = build_kernel(disconnected, config).matrix.to_dense()
        cross = build_kernel(bridged, config).matrix.to_dense()
        save_matrix_csv(
            os.path.join(out_dir, f"{kind}_adjacency.csv"),
            disconnected.adjacency.to_dense(),
            header=f"{kind} demo adjacency ({topology})",
        )
        save_matrix_csv(
            os.path.join(out_dir, f"{kind}_intra.csv"), intra,
            header=f"{kind} kernel, disconnected communities",
        )
        save_matrix_csv(
            os.path.join(out_dir, f"{kind}_cross.csv"), cross,
            header=f"{kind} kernel, single bridge added",
        )
        intra_max = float(np.max(np.abs(intra[off_block])))
        cross_max = float(np.max(cross[off_block]))
        cross_min = float(np.min(cross[off_block]))
        if intra_max != 0.0:
            raise DataError(f"{kind}: disconnected blocks leaked mass {intra_max}")
        if cross_max <= 0.0:
            raise DataError(f"{kind}: bridge produced no inter-block mass")
        summary["kernels"][kind] = {
            "intra_offblock_max": intra_max,
            "cross_offblock_max": cross_max,
            "cross_offblock_min": cross_min,
        }
    summary["heat_min_offblock"] = summary["kernels"]["heat"]["cross_offblock_min"]
    summary["ppr_min_offblock"] = summary["kernels"]["ppr"]["cross_offblock_min"]
    summary["heat_at_least_ppr"] = bool(
        summary["heat_min_offblock"] >= summary["ppr_min_offblock"]
    )
    return summary
