"""Built-in deterministic scorer: smoothed k-hop label propagation.

This is plumbing, not science: it gives the pipeline a dependency-free
"model" whose predictions react to edge deletion and masking, so every axis
can be exercised end to end without an external ML system. Each node's class
probabilities are proportional to alpha plus the count of each class among
train-labeled nodes within `hops` hops (the node itself excluded, which
prevents trivially perfect train accuracy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NoTrainLabels
from .graph_store import Graph
from .metrics import PredictionTable


@dataclass(frozen=True)
class PropagationConfig:
    hops: int = 2
    alpha: float = 1.0  # add-alpha smoothing

    def __post_init__(self):
        if self.hops < 1:
            raise ConfigError("propagation needs hops >= 1")
        if self.alpha <= 0:
            raise ConfigError("smoothing alpha must be positive")


def _train_mask(train_labels: np.ndarray, num_classes: int) -> np.ndarray:
    train_labels = np.asarray(train_labels, dtype=np.int64)
    return (train_labels >= 0) & (train_labels < num_classes)


def propagate_predict(graph: Graph, train_labels: np.ndarray, num_classes: int,
                      config: PropagationConfig = PropagationConfig()) -> PredictionTable:
    """Probability rows for every node from hop-limited train-label counts.

    ``train_labels`` is per-node; any value outside [0, num_classes) means
    the node is not a labeled training node.
    """
    mask = _train_mask(train_labels, num_classes)
    if not mask.any():
        raise NoTrainLabels("propagation needs at least one labeled train node")
    src, dst = graph.arcs()
    non_loop = src != dst
    adj = sp.csr_matrix(
        (np.ones(int(non_loop.sum()), dtype=bool), (src[non_loop], dst[non_loop])),
        shape=(graph.num_nodes, graph.num_nodes),
    )
    reach = adj.copy()
    power = adj
    for _ in range(config.hops - 1):
        power = (power @ adj).astype(bool)
        reach = (reach + power).astype(bool)
    reach = sp.csr_matrix(reach)
    reach.setdiag(False)  # self excluded from its own count
    reach.eliminate_zeros()

    onehot = np.zeros((graph.num_nodes, num_classes), dtype=np.float64)
    labeled = np.flatnonzero(mask)
    onehot[labeled, np.asarray(train_labels)[labeled]] = 1.0
    counts = np.asarray(reach @ onehot)
    probs = counts + config.alpha
    probs /= probs.sum(axis=1, keepdims=True)
    return PredictionTable(np.arange(graph.num_nodes, dtype=np.int64), probs)


def predict_node(graph: Graph, train_labels: np.ndarray, num_classes: int, node: int,
                 config: PropagationConfig = PropagationConfig(),
                 pool_excluded: np.ndarray | None = None) -> np.ndarray:
    """One node's probability row via local breadth-first search.

    Equals the corresponding propagate_predict row; used where rebuilding the
    full reachability matrix per masking condition would be wasteful.
    ``pool_excluded`` nodes contribute no label counts (atom-ablation rule).
    """
    mask = _train_mask(train_labels, num_classes)
    if not mask.any():
        raise NoTrainLabels("propagation needs at least one labeled train node")
    excluded = set(map(int, pool_excluded)) if pool_excluded is not None else set()
    visited = {int(node)}
    frontier = [int(node)]
    counts = np.zeros(num_classes, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    for _ in range(config.hops):
        nxt = []
        for u in frontier:
            for v in graph.neighbors_of(u).tolist():
                if v not in visited and v != u:
                    visited.add(v)
                    nxt.append(v)
                    if mask[v] and v not in excluded:
                        counts[train_labels[v]] += 1.0
        frontier = nxt
        if not frontier:
            break
    probs = counts + config.alpha
    return probs / probs.sum()


def predicted_class_prob(graph: Graph, train_labels: np.ndarray, num_classes: int,
                         node: int, clean_class: int,
                         config: PropagationConfig = PropagationConfig(),
                         pool_excluded: np.ndarray | None = None) -> float:
    """Probability the masked-input scorer assigns to the clean predicted class."""
    row = predict_node(graph, train_labels, num_classes, node, config, pool_excluded)
    return float(row[clean_class])
