import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes oracles importable

from graphstress.graph_store import Graph, save_dataset
from graphstress.synthetic import make_node_dataset


@pytest.fixture
def path_graph():
    # 0 - 1 - 2
    return Graph.from_arcs(3, [0, 1, 1, 2], [1, 0, 2, 1])


@pytest.fixture
def random_graph():
    """100-node graph, fixed arcs, with one self-loop at node 7."""
    rng = np.random.default_rng(12345)
    src = rng.integers(0, 100, size=300)
    dst = rng.integers(0, 100, size=300)
    src = np.append(src, 7)
    dst = np.append(dst, 7)
    return Graph.from_arcs(100, src, dst, symmetrize=True)


@pytest.fixture(scope="session")
def node_dataset():
    return make_node_dataset(num_nodes=400, seed=0)


@pytest.fixture(scope="session")
def node_dataset_dir(tmp_path_factory, node_dataset):
    out = tmp_path_factory.mktemp("ds")
    manifest = save_dataset(node_dataset, out / "synth")
    return manifest
