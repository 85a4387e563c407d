#!/usr/bin/env python3
"""Write the refined mesh hierarchy as plain-text files.

Each file lists vertices as "v x y" lines followed by triangles as
"t i j k" lines (zero-based vertex indices), one file per level.
"""

import argparse
import pathlib
import sys

from ldgflow.cli import parse_levels
from ldgflow.mesh import mesh_at_level, write_mesh


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=parse_levels, default=(0, 1, 2))
    parser.add_argument("--out-dir", default="meshes")
    args = parser.parse_args(argv)

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for level in args.levels:
        mesh = mesh_at_level(level)
        path = out_dir / f"level{level}.txt"
        write_mesh(mesh, path)
        print(f"wrote {path} ({mesh.n_vertices} vertices, "
              f"{mesh.n_triangles} triangles)")
    return 0


if __name__ == "__main__":
    sys.exit(run())
