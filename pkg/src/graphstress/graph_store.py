"""In-memory graph data model, dataset manifests, ingestion and validation.

Three dataset kinds share one manifest format (a JSON key/value document):

* ``node_graph``      one CSR graph with optional features/labels/meta/split
* ``triples``         an (entity, relation, entity) triple store
* ``graph_collection`` many small graphs with per-graph label rows

On-disk layout (all paths relative to the manifest's directory):

* edge file      text, one arc per line ``u<TAB>v``
* feature file   binary, 16-byte header (magic ``GSFH``, u32 rows, u32 cols,
                 u32 reserved, little-endian) then row-major little-endian
                 float32
* label/split/meta files   text, one record per line ``node_id<TAB>value``
  (the meta file carries two value columns, year and sensitive_attr, with
  ``-`` for absent)
* triple file    text, one triple per line ``head<TAB>relation<TAB>tail``
* collection     ``graph_file`` lines ``graph_id<TAB>u<TAB>v`` (local node
  ids), ``graph_size_file`` lines ``graph_id<TAB>num_nodes``,
  ``graph_label_file`` lines ``graph_id<TAB>y0<TAB>y1...`` (``-`` = missing
  task label), ``scaffold_file`` lines ``graph_id<TAB>scaffold_id``

Datasets are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import AsymmetricGraph, BadId, DirectedGraph, LengthMismatch, MissingFile, NonFiniteFeature

_FEATURE_MAGIC = b"GSFH"


class Role(IntEnum):
    TRAIN = 0
    VAL = 1
    TEST = 2
    OOD_VAL = 3
    OOD_TEST = 4
    EXCLUDED = 5


ROLE_NAMES = {
    Role.TRAIN: "train",
    Role.VAL: "val",
    Role.TEST: "test",
    Role.OOD_VAL: "ood_val",
    Role.OOD_TEST: "ood_test",
    Role.EXCLUDED: "excluded",
}
ROLE_BY_NAME = {v: k for k, v in ROLE_NAMES.items()}


@dataclass
class SplitAssignment:
    """Per-unit role labels; roles partition the unit set."""

    roles: np.ndarray  # int8, one Role per unit

    @property
    def num_units(self) -> int:
        return len(self.roles)

    def units(self, role: Role) -> np.ndarray:
        return np.flatnonzero(self.roles == int(role)).astype(np.int64)

    def counts(self) -> dict[str, int]:
        return {ROLE_NAMES[r]: int(np.sum(self.roles == int(r))) for r in Role}

    @classmethod
    def all_excluded(cls, n: int) -> "SplitAssignment":
        return cls(np.full(n, int(Role.EXCLUDED), dtype=np.int8))


@dataclass
class NodeMeta:
    """Optional per-node records; -1 marks an absent value."""

    year: np.ndarray | None = None           # int64, -1 = missing
    sensitive_attr: np.ndarray | None = None  # int8 in {0,1}, -1 = missing


@dataclass
class Graph:
    """Compressed-sparse-row graph with sorted, deduplicated neighbor lists."""

    num_nodes: int
    offsets: np.ndarray    # int64, len num_nodes + 1
    neighbors: np.ndarray  # int64, len offsets[-1]
    undirected: bool = True
    features: np.ndarray | None = None  # float32 (num_nodes, dim)
    labels: np.ndarray | None = None    # int64; value == num_classes means unlabeled
    num_classes: int = 0
    meta: NodeMeta = field(default_factory=NodeMeta)

    @property
    def num_arcs(self) -> int:
        return int(self.offsets[-1])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, node: int) -> np.ndarray:
        return self.neighbors[self.offsets[node]:self.offsets[node + 1]]

    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        """All arcs as (src, dst) arrays in CSR order."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        return src, self.neighbors

    def labeled_nodes(self) -> np.ndarray:
        if self.labels is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.labels != self.num_classes).astype(np.int64)

    @classmethod
    def from_arcs(cls, num_nodes, src, dst, *, undirected=True, symmetrize=False, **kwargs) -> "Graph":
        """Build a validated CSR graph from an arc list.

        Sorts and deduplicates neighbor lists; with ``symmetrize`` the reverse
        of every arc is added before deduplication.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if len(src) != len(dst):
            raise LengthMismatch(f"src/dst arc arrays differ: {len(src)} vs {len(dst)}")
        if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= num_nodes or dst.max() >= num_nodes):
            bad = src[(src < 0) | (src >= num_nodes)]
            bad = bad[0] if len(bad) else dst[(dst < 0) | (dst >= num_nodes)][0]
            raise BadId(f"arc endpoint {bad} out of range for {num_nodes} nodes")
        if symmetrize:
            loop = src == dst
            src, dst = (np.concatenate([src, dst[~loop]]), np.concatenate([dst, src[~loop]]))
        # sort by (src, dst) and drop duplicate arcs
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if len(src):
            keep = np.ones(len(src), dtype=bool)
            keep[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
            src, dst = src[keep], dst[keep]
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(offsets, src + 1, 1)
        np.cumsum(offsets, out=offsets)
        g = cls(num_nodes=num_nodes, offsets=offsets, neighbors=dst, undirected=undirected, **kwargs)
        validate_graph(g)
        return g


def validate_graph(g: Graph) -> None:
    """Check every structural invariant; raises on the first violation."""
    if len(g.offsets) != g.num_nodes + 1:
        raise LengthMismatch("offsets length must be num_nodes + 1")
    if g.offsets[0] != 0 or np.any(np.diff(g.offsets) < 0):
        raise LengthMismatch("offsets must start at 0 and be nondecreasing")
    if g.offsets[-1] != len(g.neighbors):
        raise LengthMismatch("offsets[-1] must equal len(neighbors)")
    if len(g.neighbors) and (g.neighbors.min() < 0 or g.neighbors.max() >= g.num_nodes):
        raise BadId(f"neighbor id out of range for {g.num_nodes} nodes")
    src, dst = g.arcs()
    # per-node neighbor lists sorted ascending with no duplicates
    same_row = src[1:] == src[:-1]
    if np.any(same_row & (dst[1:] <= dst[:-1])):
        raise LengthMismatch("neighbor lists must be sorted ascending without duplicates")
    if g.undirected:
        check_symmetry(g, src=src, dst=dst)
    if g.features is not None:
        if g.features.shape[0] != g.num_nodes:
            raise LengthMismatch("feature rows must equal num_nodes")
        if not np.all(np.isfinite(g.features)):
            raise NonFiniteFeature("features contain NaN or Inf")
    if g.labels is not None and len(g.labels) != g.num_nodes:
        raise LengthMismatch("label array length must equal num_nodes")
    for name in ("year", "sensitive_attr"):
        arr = getattr(g.meta, name)
        if arr is not None and len(arr) != g.num_nodes:
            raise LengthMismatch(f"meta {name} length must equal num_nodes")


def check_symmetry(g: Graph, src=None, dst=None) -> None:
    """Verify the undirected invariant: reverse of every non-loop arc present."""
    if src is None:
        src, dst = g.arcs()
    non_loop = src != dst
    fwd = src[non_loop] * g.num_nodes + dst[non_loop]
    rev = dst[non_loop] * g.num_nodes + src[non_loop]
    fwd.sort()
    rev.sort()
    if not np.array_equal(fwd, rev):
        missing = np.setdiff1d(fwd, rev, assume_unique=False)
        key = int(missing[0]) if len(missing) else int(np.setdiff1d(rev, fwd)[0])
        u, v = divmod(key, g.num_nodes)
        raise AsymmetricGraph(f"arc ({v},{u}) has no reverse ({u},{v})")


@dataclass
class CanonicalEdges:
    """Undirected edges once each as (min,max) rows; self-loops kept apart."""

    edges: np.ndarray       # (m, 2) int64, u < v, lexicographically sorted
    self_loops: np.ndarray  # (s,) int64 node ids with a self-loop

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def canonical_undirected_edges(g: Graph) -> CanonicalEdges:
    """Collapse a symmetric arc set to one row per undirected edge.

    Neighbor lists are sorted, so taking arcs with src < dst in CSR order
    yields the canonical list already sorted by (u, v).
    """
    if not g.undirected:
        raise DirectedGraph("canonical edge listing requires an undirected graph")
    src, dst = g.arcs()
    fwd = src < dst
    edges = np.stack([src[fwd], dst[fwd]], axis=1)
    self_loops = src[src == dst]
    return CanonicalEdges(edges=edges, self_loops=self_loops)


def expand_canonical(num_nodes: int, edges: np.ndarray, self_loops: np.ndarray, **kwargs) -> Graph:
    """Inverse of canonical_undirected_edges: rebuild the symmetric arc set."""
    src = np.concatenate([edges[:, 0], edges[:, 1], self_loops])
    dst = np.concatenate([edges[:, 1], edges[:, 0], self_loops])
    return Graph.from_arcs(num_nodes, src, dst, undirected=True, **kwargs)


@dataclass
class TripleStore:
    """Knowledge-graph triples (head, relation, tail)."""

    num_entities: int
    num_relations: int
    triples: np.ndarray  # (m, 3) int64

    def validate(self) -> None:
        t = self.triples
        if t.ndim != 2 or t.shape[1] != 3:
            raise LengthMismatch("triples must be an (m, 3) array")
        if len(t):
            if t[:, 0].min() < 0 or t[:, 0].max() >= self.num_entities:
                raise BadId("head entity id out of range")
            if t[:, 2].min() < 0 or t[:, 2].max() >= self.num_entities:
                raise BadId("tail entity id out of range")
            if t[:, 1].min() < 0 or t[:, 1].max() >= self.num_relations:
                raise BadId("relation id out of range")
            keys = (t[:, 0] * self.num_relations + t[:, 1]) * self.num_entities + t[:, 2]
            if len(np.unique(keys)) != len(keys):
                raise LengthMismatch("duplicate triples")


@dataclass
class GraphCollection:
    """Many small graphs (molecules) with per-graph label rows."""

    graphs: list[Graph]
    labels: np.ndarray               # (num_graphs, num_tasks) int8, -1 = missing
    scaffold_ids: np.ndarray | None = None  # (num_graphs,) int64

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    def validate(self) -> None:
        if len(self.labels) != self.num_graphs:
            raise LengthMismatch("label rows must equal number of graphs")
        if self.scaffold_ids is not None and len(self.scaffold_ids) != self.num_graphs:
            raise LengthMismatch("scaffold ids must cover every graph")


@dataclass
class Dataset:
    """One loaded dataset: exactly one of graph/store/collection is set."""

    kind: str
    name: str
    graph: Graph | None = None
    store: TripleStore | None = None
    collection: GraphCollection | None = None
    split: SplitAssignment | None = None


# ---------------------------------------------------------------------------
# file readers / writers
# ---------------------------------------------------------------------------

def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingFile(str(path))
    return path


def read_edge_file(path: Path) -> tuple[np.ndarray, np.ndarray]:
    _require(path)
    data = np.loadtxt(path, dtype=np.int64, delimiter="\t", ndmin=2) if path.stat().st_size else np.empty((0, 2), np.int64)
    if data.size and data.shape[1] != 2:
        raise LengthMismatch(f"{path}: expected two tab-separated columns")
    return data[:, 0].copy(), data[:, 1].copy()


def write_edge_file(path: Path, src: np.ndarray, dst: np.ndarray) -> None:
    with open(path, "w") as f:
        for u, v in zip(src.tolist(), dst.tolist()):
            f.write(f"{u}\t{v}\n")


def read_feature_file(path: Path) -> np.ndarray:
    _require(path)
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16 or header[:4] != _FEATURE_MAGIC:
            raise LengthMismatch(f"{path}: bad feature-file header")
        rows, cols, _reserved = struct.unpack("<III", header[4:])
        data = np.fromfile(f, dtype="<f4", count=rows * cols)
    if len(data) != rows * cols:
        raise LengthMismatch(f"{path}: payload shorter than declared {rows}x{cols}")
    return data.reshape(rows, cols)


def write_feature_file(path: Path, features: np.ndarray) -> None:
    features = np.ascontiguousarray(features, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_FEATURE_MAGIC)
        f.write(struct.pack("<III", features.shape[0], features.shape[1], 0))
        features.tofile(f)


def _read_records(path: Path):
    _require(path)
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line:
                yield line.split("\t")


def read_label_file(path: Path, num_nodes: int, num_classes: int) -> np.ndarray:
    labels = np.full(num_nodes, num_classes, dtype=np.int64)  # sentinel = unlabeled
    for rec in _read_records(path):
        node, value = int(rec[0]), int(rec[1])
        if not 0 <= node < num_nodes:
            raise BadId(f"{path}: node id {node} out of range")
        if not 0 <= value < num_classes:
            raise BadId(f"{path}: label {value} out of range for {num_classes} classes")
        labels[node] = value
    return labels


def write_label_file(path: Path, labels: np.ndarray, num_classes: int) -> None:
    with open(path, "w") as f:
        for node in np.flatnonzero(labels != num_classes).tolist():
            f.write(f"{node}\t{labels[node]}\n")


def read_split_file(path: Path, num_units: int) -> SplitAssignment:
    roles = np.full(num_units, int(Role.EXCLUDED), dtype=np.int8)
    for rec in _read_records(path):
        unit, name = int(rec[0]), rec[1]
        if not 0 <= unit < num_units:
            raise BadId(f"{path}: unit id {unit} out of range")
        if name not in ROLE_BY_NAME:
            raise BadId(f"{path}: unknown role {name!r}")
        roles[unit] = int(ROLE_BY_NAME[name])
    return SplitAssignment(roles)


def write_split_file(path: Path, split: SplitAssignment) -> None:
    with open(path, "w") as f:
        for unit, role in enumerate(split.roles.tolist()):
            f.write(f"{unit}\t{ROLE_NAMES[Role(role)]}\n")


def read_meta_file(path: Path, num_nodes: int) -> NodeMeta:
    year = np.full(num_nodes, -1, dtype=np.int64)
    sens = np.full(num_nodes, -1, dtype=np.int8)
    for rec in _read_records(path):
        node = int(rec[0])
        if not 0 <= node < num_nodes:
            raise BadId(f"{path}: node id {node} out of range")
        if len(rec) > 1 and rec[1] != "-":
            year[node] = int(rec[1])
        if len(rec) > 2 and rec[2] != "-":
            sens[node] = int(rec[2])
    return NodeMeta(
        year=year if np.any(year >= 0) else None,
        sensitive_attr=sens if np.any(sens >= 0) else None,
    )


def write_meta_file(path: Path, meta: NodeMeta, num_nodes: int) -> None:
    with open(path, "w") as f:
        for node in range(num_nodes):
            y = meta.year[node] if meta.year is not None else -1
            s = meta.sensitive_attr[node] if meta.sensitive_attr is not None else -1
            if y >= 0 or s >= 0:
                f.write(f"{node}\t{y if y >= 0 else '-'}\t{s if s >= 0 else '-'}\n")


def read_triple_file(path: Path) -> np.ndarray:
    _require(path)
    data = np.loadtxt(path, dtype=np.int64, delimiter="\t", ndmin=2) if path.stat().st_size else np.empty((0, 3), np.int64)
    if data.size and data.shape[1] != 3:
        raise LengthMismatch(f"{path}: expected three tab-separated columns")
    return data


def write_triple_file(path: Path, triples: np.ndarray) -> None:
    with open(path, "w") as f:
        for h, r, t in triples.tolist():
            f.write(f"{h}\t{r}\t{t}\n")


# ---------------------------------------------------------------------------
# manifest loading / saving
# ---------------------------------------------------------------------------

def load_dataset(manifest_path) -> Dataset:
    """Load and fully validate a dataset declared by a manifest file."""
    manifest_path = Path(manifest_path)
    _require(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise LengthMismatch(f"{manifest_path}: manifest does not parse: {e}") from e
    base = manifest_path.parent
    kind = manifest.get("kind")
    name = manifest.get("name", manifest_path.stem)

    if kind == "node_graph":
        num_nodes = int(manifest["num_nodes"])
        src, dst = read_edge_file(base / manifest["edge_file"])
        features = None
        if manifest.get("feature_file"):
            features = read_feature_file(base / manifest["feature_file"])
            if features.shape[0] != num_nodes:
                raise LengthMismatch("feature rows do not match num_nodes")
            declared = manifest.get("feature_dim")
            if declared is not None and features.shape[1] != int(declared):
                raise LengthMismatch("feature_dim does not match feature file")
        labels = None
        num_classes = int(manifest.get("num_classes", 0))
        if manifest.get("label_file"):
            labels = read_label_file(base / manifest["label_file"], num_nodes, num_classes)
        meta = NodeMeta()
        if manifest.get("meta_file"):
            meta = read_meta_file(base / manifest["meta_file"], num_nodes)
        graph = Graph.from_arcs(
            num_nodes, src, dst,
            undirected=bool(manifest.get("undirected", True)),
            features=features, labels=labels, num_classes=num_classes, meta=meta,
        )
        split = None
        if manifest.get("split_file"):
            split = read_split_file(base / manifest["split_file"], num_nodes)
        return Dataset(kind=kind, name=name, graph=graph, split=split)

    if kind == "triples":
        store = TripleStore(
            num_entities=int(manifest["num_entities"]),
            num_relations=int(manifest["num_relations"]),
            triples=read_triple_file(base / manifest["triple_file"]),
        )
        store.validate()
        return Dataset(kind=kind, name=name, store=store)

    if kind == "graph_collection":
        return _load_collection(manifest, base, name)

    raise LengthMismatch(f"{manifest_path}: unknown dataset kind {kind!r}")


def _load_collection(manifest: dict, base: Path, name: str) -> Dataset:
    num_graphs = int(manifest["num_graphs"])
    num_tasks = int(manifest.get("num_tasks", 1))
    sizes = np.zeros(num_graphs, dtype=np.int64)
    for rec in _read_records(base / manifest["graph_size_file"]):
        gid = int(rec[0])
        if not 0 <= gid < num_graphs:
            raise BadId(f"graph id {gid} out of range")
        sizes[gid] = int(rec[1])
    per_graph_src: list[list[int]] = [[] for _ in range(num_graphs)]
    per_graph_dst: list[list[int]] = [[] for _ in range(num_graphs)]
    for rec in _read_records(base / manifest["graph_file"]):
        gid, u, v = int(rec[0]), int(rec[1]), int(rec[2])
        if not 0 <= gid < num_graphs:
            raise BadId(f"graph id {gid} out of range")
        per_graph_src[gid].append(u)
        per_graph_dst[gid].append(v)
    undirected = bool(manifest.get("undirected", True))
    graphs = [
        Graph.from_arcs(int(sizes[g]), per_graph_src[g], per_graph_dst[g], undirected=undirected)
        for g in range(num_graphs)
    ]
    labels = np.full((num_graphs, num_tasks), -1, dtype=np.int8)
    for rec in _read_records(base / manifest["graph_label_file"]):
        gid = int(rec[0])
        values = rec[1:]
        if len(values) != num_tasks:
            raise LengthMismatch(f"graph {gid}: expected {num_tasks} task labels")
        labels[gid] = [-1 if v == "-" else int(v) for v in values]
    scaffold_ids = None
    if manifest.get("scaffold_file"):
        scaffold_ids = np.full(num_graphs, -1, dtype=np.int64)
        for rec in _read_records(base / manifest["scaffold_file"]):
            scaffold_ids[int(rec[0])] = int(rec[1])
        if np.any(scaffold_ids < 0):
            raise LengthMismatch("scaffold ids must cover every graph")
    collection = GraphCollection(graphs=graphs, labels=labels, scaffold_ids=scaffold_ids)
    collection.validate()
    split = None
    if manifest.get("split_file"):
        split = read_split_file(base / manifest["split_file"], num_graphs)
    return Dataset(kind="graph_collection", name=name, collection=collection, split=split)


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write a dataset back to disk in the manifest format; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"kind": dataset.kind, "name": dataset.name}

    if dataset.kind == "node_graph":
        g = dataset.graph
        manifest["num_nodes"] = g.num_nodes
        manifest["undirected"] = g.undirected
        manifest["edge_file"] = "edges.tsv"
        src, dst = g.arcs()
        write_edge_file(out / "edges.tsv", src, dst)
        if g.features is not None:
            manifest["feature_file"] = "features.gsf"
            manifest["feature_dim"] = int(g.features.shape[1])
            write_feature_file(out / "features.gsf", g.features)
        if g.labels is not None:
            manifest["label_file"] = "labels.tsv"
            manifest["num_classes"] = g.num_classes
            write_label_file(out / "labels.tsv", g.labels, g.num_classes)
        if g.meta.year is not None or g.meta.sensitive_attr is not None:
            manifest["meta_file"] = "meta.tsv"
            write_meta_file(out / "meta.tsv", g.meta, g.num_nodes)
    elif dataset.kind == "triples":
        manifest["num_entities"] = dataset.store.num_entities
        manifest["num_relations"] = dataset.store.num_relations
        manifest["triple_file"] = "triples.tsv"
        write_triple_file(out / "triples.tsv", dataset.store.triples)
    elif dataset.kind == "graph_collection":
        coll = dataset.collection
        manifest["num_graphs"] = coll.num_graphs
        manifest["num_tasks"] = int(coll.labels.shape[1])
        manifest["undirected"] = all(g.undirected for g in coll.graphs)
        manifest["graph_size_file"] = "graph_sizes.tsv"
        manifest["graph_file"] = "graph_edges.tsv"
        manifest["graph_label_file"] = "graph_labels.tsv"
        with open(out / "graph_sizes.tsv", "w") as f:
            for gid, g in enumerate(coll.graphs):
                f.write(f"{gid}\t{g.num_nodes}\n")
        with open(out / "graph_edges.tsv", "w") as f:
            for gid, g in enumerate(coll.graphs):
                src, dst = g.arcs()
                for u, v in zip(src.tolist(), dst.tolist()):
                    f.write(f"{gid}\t{u}\t{v}\n")
        with open(out / "graph_labels.tsv", "w") as f:
            for gid in range(coll.num_graphs):
                row = "\t".join("-" if y < 0 else str(int(y)) for y in coll.labels[gid])
                f.write(f"{gid}\t{row}\n")
        if coll.scaffold_ids is not None:
            manifest["scaffold_file"] = "scaffolds.tsv"
            with open(out / "scaffolds.tsv", "w") as f:
                for gid, sid in enumerate(coll.scaffold_ids.tolist()):
                    f.write(f"{gid}\t{sid}\n")
    else:
        raise LengthMismatch(f"unknown dataset kind {dataset.kind!r}")

    if dataset.split is not None:
        manifest["split_file"] = "split.tsv"
        write_split_file(out / "split.tsv", dataset.split)

    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def compute_degrees(graph: Graph) -> np.ndarray:
    """Per-node arc count; a self-loop contributes 1."""
    return graph.degrees()
