"""Attribution-fidelity protocol.

The toolkit never computes gradients itself. The exchange with the external
model is a batch file round trip:

1. ``emit``: from a saliency file (per-node or per-atom scores), build one
   ablation manifest per evaluation target. A manifest fixes the K-hop
   subgraph and, for every (ranking, sparsity) condition, the exact masked
   unit set and its complement.
2. The external model re-scores each masked condition and writes one
   predicted-class probability per (target, condition).
3. ``score``: combine those probabilities into Fid+/Fid- and the bounded
   characterization score, then lift against the random-ranking baseline.

Two mask-unit kinds exist: edges (node-level tasks) and atoms (molecule
tasks; removing an atom also drops its incident bonds and pool entry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .determinism import StreamKey, permutation
from .errors import (
    BadProbability,
    EmptyMolecule,
    EmptySubgraph,
    LengthMismatch,
    MissingFile,
    MissingNodeScore,
    SeedCountMismatch,
)
from .graph_store import Graph
from .report import MetricCell

K_PERCENT_LEVELS = (5, 10, 20, 50)
ATOM_K_PERCENT = 20
RANKINGS = ("saliency", "random")


@dataclass
class SaliencyTable:
    """Nonnegative per-unit attribution scores from an external model."""

    kind: str  # node_grad_norm | edge_score | atom_score
    unit_ids: np.ndarray
    scores: np.ndarray
    _order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.unit_ids = np.asarray(self.unit_ids, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.unit_ids) != len(self.scores):
            raise LengthMismatch("one score per unit id required")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise BadProbability("saliency scores must be finite and nonnegative")
        self._order = np.argsort(self.unit_ids, kind="stable")

    def scores_for(self, units: np.ndarray) -> np.ndarray:
        units = np.asarray(units, dtype=np.int64)
        sorted_ids = self.unit_ids[self._order]
        pos = np.searchsorted(sorted_ids, units)
        bad = (pos >= len(sorted_ids)) | (sorted_ids[np.minimum(pos, len(sorted_ids) - 1)] != units)
        if np.any(bad):
            raise MissingNodeScore(f"no saliency score for unit {int(units[np.flatnonzero(bad)[0]])}")
        return self.scores[self._order[pos]]


@dataclass
class Subgraph:
    """K-hop receptive field: sorted node set and induced canonical edges."""

    center: int
    nodes: np.ndarray  # sorted int64
    edges: np.ndarray  # (m, 2) int64, u < v, canonical order


def khop_subgraph(graph: Graph, center: int, hops: int = 2) -> Subgraph:
    """Nodes within `hops` undirected hops of center, plus induced edges.

    Induced edges are listed canonically (u < v); self-loops never enter the
    maskable edge set.
    """
    visited = {int(center)}
    frontier = [int(center)]
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for v in graph.neighbors_of(u).tolist():
                if v not in visited:
                    visited.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    nodes = np.array(sorted(visited), dtype=np.int64)
    in_sub = np.zeros(graph.num_nodes, dtype=bool)
    in_sub[nodes] = True
    edge_rows = []
    for u in nodes.tolist():
        nbrs = graph.neighbors_of(u)
        keep = (nbrs > u) & in_sub[nbrs]
        for v in nbrs[keep].tolist():
            edge_rows.append((u, v))
    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)
    return Subgraph(center=int(center), nodes=nodes, edges=edges)


def edge_saliency_from_node_grads(node_scores: SaliencyTable, edges: np.ndarray) -> np.ndarray:
    """Edge score = endpoint score sum."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return np.empty(0, dtype=np.float64)
    return node_scores.scores_for(edges[:, 0]) + node_scores.scores_for(edges[:, 1])


def mask_count(k_percent: float, m: int) -> int:
    """Units to mask at sparsity k%: ceil with a floor of one."""
    return max(1, math.ceil(k_percent * m / 100.0))


def rank_and_mask(edge_scores: np.ndarray, k_percent: float, key: StreamKey,
                  ranking: str) -> tuple[np.ndarray, np.ndarray]:
    """Split unit indices into (masked, complement) under one ranking.

    saliency: descending score, canonical order breaking ties. random: one
    deterministic shuffle per key; every sparsity level takes a prefix of the
    same shuffle, so masked sets nest across k.
    """
    edge_scores = np.asarray(edge_scores, dtype=np.float64)
    m = len(edge_scores)
    if m == 0:
        raise EmptySubgraph("no maskable units in subgraph")
    if ranking == "saliency":
        order = np.lexsort((np.arange(m), -edge_scores))
    elif ranking == "random":
        order = permutation(key, m)
    else:
        raise LengthMismatch(f"unknown ranking {ranking!r}")
    k = mask_count(k_percent, m)
    return np.sort(order[:k]), np.sort(order[k:])


@dataclass(frozen=True)
class FidelityRecord:
    """Raw and combined fidelity for one (target, condition) pair."""

    p0: float
    p_plus: float
    p_minus: float
    fid_plus: float   # p0 - p_plus, raw (may be negative)
    fid_minus: float  # p0 - p_minus, raw
    char: float       # bounded combination in [0, 1]


def fidelity(p0: float, p_plus: float, p_minus: float, epsilon: float = 1e-8) -> FidelityRecord:
    """Combine masked-probability drops into the bounded characterization score.

    char = 2ab / (a + b + epsilon) with a = clamp(Fid+, 0, 1) and
    b = clamp(1 - Fid-, 0, 1). Raw Fid values are kept unclamped.
    """
    for name, p in (("p0", p0), ("p_plus", p_plus), ("p_minus", p_minus)):
        if not (0.0 <= p <= 1.0):
            raise BadProbability(f"{name}={p} outside [0, 1]")
    fid_plus = p0 - p_plus
    fid_minus = p0 - p_minus
    a = min(1.0, max(0.0, fid_plus))
    b = min(1.0, max(0.0, 1.0 - fid_minus))
    char = 2.0 * a * b / (a + b + epsilon)
    return FidelityRecord(p0=p0, p_plus=p_plus, p_minus=p_minus,
                          fid_plus=fid_plus, fid_minus=fid_minus, char=char)


def char_lift(char_sal: MetricCell, char_rand: MetricCell) -> MetricCell:
    """Saliency-over-random lift with error propagation sqrt(s1^2 + s2^2)."""
    if char_sal.undefined or char_rand.undefined:
        return MetricCell.undef(max(char_sal.n, char_rand.n))
    if char_sal.n != char_rand.n:
        raise SeedCountMismatch(
            f"lift needs equal seed counts, got {char_sal.n} vs {char_rand.n}")
    return MetricCell(
        mean=char_sal.mean - char_rand.mean,
        std=math.sqrt(char_sal.std ** 2 + char_rand.std ** 2),
        n=char_sal.n,
    )


@dataclass
class TargetManifest:
    """Everything an external model needs to re-score one target.

    For ``unit_kind == "edge"`` conditions map to indices into ``edges``; for
    ``unit_kind == "atom"`` they map to atom ids, and masking an atom also
    removes its incident bonds and pool entry.
    """

    target: int
    unit_kind: str               # edge | atom
    nodes: np.ndarray
    edges: np.ndarray            # (m, 2) canonical; for atoms: the molecule's bonds
    conditions: dict[str, np.ndarray]  # condition name -> masked unit array

    def complement(self, condition: str) -> np.ndarray:
        masked = self.conditions[condition]
        if self.unit_kind == "edge":
            all_units = np.arange(len(self.edges), dtype=np.int64)
        else:
            all_units = self.nodes
        return np.setdiff1d(all_units, masked)


def condition_name(ranking: str, side: str, k_percent: float) -> str:
    # side is "top" (masked = ranked units) or "comp" (masked = complement)
    k = int(k_percent) if float(k_percent).is_integer() else k_percent
    return f"{ranking}_{side}_{k}"


def build_edge_manifest(graph: Graph, target: int, node_scores: SaliencyTable,
                        key: StreamKey, hops: int = 2,
                        k_levels=K_PERCENT_LEVELS) -> TargetManifest:
    """Edge-masking manifest for one node-level target.

    Raises EmptySubgraph when the receptive field has no maskable edge; the
    caller skips and logs such targets.
    """
    sub = khop_subgraph(graph, target, hops)
    if len(sub.edges) == 0:
        raise EmptySubgraph(f"target {target}: receptive field has no edges")
    scores = edge_saliency_from_node_grads(node_scores, sub.edges)
    conditions: dict[str, np.ndarray] = {}
    for ranking in RANKINGS:
        for k in k_levels:
            masked, comp = rank_and_mask(scores, k, key, ranking)
            conditions[condition_name(ranking, "top", k)] = masked
            conditions[condition_name(ranking, "comp", k)] = comp
    return TargetManifest(target=int(target), unit_kind="edge", nodes=sub.nodes,
                          edges=sub.edges, conditions=conditions)


def atom_ablation_manifest(molecule: Graph, atom_scores: SaliencyTable,
                           key: StreamKey, k_percent: float = ATOM_K_PERCENT,
                           k_levels=None) -> TargetManifest:
    """Atom-removal manifest for one molecule.

    Masked atoms are removed together with every incident bond and their
    pooling entries; the complement condition removes the remaining atoms
    instead.
    """
    if molecule.num_nodes == 0:
        raise EmptyMolecule("cannot ablate an empty molecule")
    atoms = np.arange(molecule.num_nodes, dtype=np.int64)
    scores = atom_scores.scores_for(atoms)
    levels = k_levels if k_levels is not None else (k_percent,)
    conditions: dict[str, np.ndarray] = {}
    for ranking in RANKINGS:
        for k in levels:
            masked_idx, comp_idx = rank_and_mask(scores, k, key, ranking)
            conditions[condition_name(ranking, "top", k)] = atoms[masked_idx]
            conditions[condition_name(ranking, "comp", k)] = atoms[comp_idx]
    sub = khop_subgraph(molecule, 0, hops=molecule.num_nodes)  # full molecule bonds
    return TargetManifest(target=0, unit_kind="atom", nodes=atoms,
                          edges=sub.edges, conditions=conditions)


def incident_bonds(edges: np.ndarray, masked_atoms: np.ndarray) -> np.ndarray:
    """Indices of bonds touching any masked atom."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    hit = np.isin(edges[:, 0], masked_atoms) | np.isin(edges[:, 1], masked_atoms)
    return np.flatnonzero(hit).astype(np.int64)


def masked_graph(graph: Graph, manifest: TargetManifest, condition: str) -> tuple[Graph, np.ndarray]:
    """Apply one masking condition; returns (masked graph, pool-excluded atoms).

    Edge kind: removes the masked subgraph edges (both arcs) from the full
    graph. Atom kind: removes the masked atoms' incident bonds; atom ids stay
    valid but are excluded from pooling via the returned array.
    """
    masked = manifest.conditions[condition]
    if manifest.unit_kind == "edge":
        drop = manifest.edges[masked]
        return _drop_edges(graph, drop), np.empty(0, dtype=np.int64)
    bonds = incident_bonds(manifest.edges, masked)
    drop = manifest.edges[bonds]
    return _drop_edges(graph, drop), np.asarray(masked, dtype=np.int64)


def _drop_edges(graph: Graph, drop: np.ndarray) -> Graph:
    """Remove canonical (u, v) rows from an undirected graph, arcs both ways."""
    if len(drop) == 0:
        return graph
    src, dst = graph.arcs()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    arc_keys = lo * graph.num_nodes + hi
    drop_keys = np.unique(drop[:, 0] * graph.num_nodes + drop[:, 1])
    keep = ~np.isin(arc_keys, drop_keys) | (src == dst)  # self-loops persist
    return Graph.from_arcs(graph.num_nodes, src[keep], dst[keep], undirected=True,
                           features=graph.features, labels=graph.labels,
                           num_classes=graph.num_classes, meta=graph.meta)


def graph_eval_population(labels: np.ndarray, correct: np.ndarray,
                          min_correct: int = 10) -> np.ndarray:
    """Molecule-task targets: clean-correct positives, else all positives.

    Falls back to every y=1 molecule when fewer than `min_correct` positives
    were classified correctly on the clean input.
    """
    labels = np.asarray(labels)
    correct = np.asarray(correct, dtype=bool)
    positives = np.flatnonzero(labels == 1).astype(np.int64)
    chosen = positives[correct[positives]]
    if len(chosen) < min_correct:
        return positives
    return chosen


# ---------------------------------------------------------------------------
# manifest and probability files
# ---------------------------------------------------------------------------

def write_manifest_file(path, manifest: TargetManifest) -> None:
    """One target per file: header, node list, edge rows, condition rows."""
    with open(path, "w") as f:
        f.write(f"target\t{manifest.target}\n")
        f.write(f"unit_kind\t{manifest.unit_kind}\n")
        f.write("nodes\t" + " ".join(map(str, manifest.nodes.tolist())) + "\n")
        for u, v in manifest.edges.tolist():
            f.write(f"edge\t{u}\t{v}\n")
        for name in sorted(manifest.conditions):
            ids = " ".join(map(str, manifest.conditions[name].tolist()))
            f.write(f"condition\t{name}\t{ids}\n")


def read_manifest_file(path) -> TargetManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    target = None
    unit_kind = None
    nodes = np.empty(0, dtype=np.int64)
    edges = []
    conditions: dict[str, np.ndarray] = {}
    with open(path) as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "target":
                target = int(parts[1])
            elif parts[0] == "unit_kind":
                unit_kind = parts[1]
            elif parts[0] == "nodes":
                nodes = np.array([int(x) for x in parts[1].split()], dtype=np.int64)
            elif parts[0] == "edge":
                edges.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "condition":
                ids = parts[2].split() if len(parts) > 2 else []
                conditions[parts[1]] = np.array([int(x) for x in ids], dtype=np.int64)
    if target is None or unit_kind is None:
        raise LengthMismatch(f"{path}: incomplete manifest")
    return TargetManifest(target=target, unit_kind=unit_kind, nodes=nodes,
                          edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                          conditions=conditions)


def read_saliency_file(path) -> SaliencyTable:
    """Text format: header ``#kind<TAB>KIND`` then ``unit_id<TAB>score`` rows."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if len(header) != 2 or header[0] != "#kind":
            raise LengthMismatch(f"{path}: first line must be '#kind<TAB>KIND'")
        kind = header[1]
        ids, scores = [], []
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            uid, score = line.split("\t")
            ids.append(int(uid))
            scores.append(float(score))
    return SaliencyTable(kind=kind, unit_ids=np.array(ids, dtype=np.int64),
                         scores=np.array(scores, dtype=np.float64))


def write_saliency_file(path, table: SaliencyTable) -> None:
    with open(path, "w") as f:
        f.write(f"#kind\t{table.kind}\n")
        for uid, score in zip(table.unit_ids.tolist(), table.scores.tolist()):
            f.write(f"{uid}\t{repr(float(score))}\n")


def read_probs_file(path) -> dict[tuple[int, str], float]:
    """Rows ``target_id<TAB>condition<TAB>prob`` from the external model."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    out: dict[tuple[int, str], float] = {}
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            target, condition, prob = line.split("\t")
            out[(int(target), condition)] = float(prob)
    return out


def write_probs_file(path, probs: dict[tuple[int, str], float]) -> None:
    with open(path, "w") as f:
        for (target, condition) in sorted(probs):
            f.write(f"{target}\t{condition}\t{repr(float(probs[(target, condition)]))}\n")
