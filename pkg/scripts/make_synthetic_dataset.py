#!/usr/bin/env python3
"""Generate the bundled synthetic datasets in the on-disk manifest format.

Writes three datasets under the output directory: a 1k-node labeled graph
(synth1k), a 60-molecule collection with scaffold families (synthmol), and a
200-entity knowledge graph (synthkg). Re-running with the same seed rewrites
identical bytes.
"""

import argparse
from pathlib import Path

from graphstress.graph_store import save_dataset
from graphstress.synthetic import make_molecule_collection, make_node_dataset, make_triple_store


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--nodes", type=int, default=1000)
    args = parser.parse_args()

    out = Path(args.out)
    node_ds = make_node_dataset(num_nodes=args.nodes, seed=args.seed)
    mol_ds = make_molecule_collection(seed=args.seed)
    kg_ds = make_triple_store(seed=args.seed)
    for ds in (node_ds, mol_ds, kg_ds):
        manifest = save_dataset(ds, out / ds.name)
        print(f"{ds.name}: {manifest}")


if __name__ == "__main__":
    main()
