"""Compile a generated parallel source directory into the two runners.

The only contract with the generator is the directory layout and the
manifest: sources listed under "sources", kernels.h providing the element
counts, shared.h providing the per-core entry table. Builds run_parallel
and run_seq next to the sources.
"""

from __future__ import annotations

import json
import pathlib
import subprocess
import sys

RUNNER_DIR = pathlib.Path(__file__).resolve().parent / "runner"
CC = ["cc", "-O2", "-std=c11", "-Wall", "-Werror"]


def compile_plan(src_dir) -> tuple[pathlib.Path, pathlib.Path]:
    src = pathlib.Path(src_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    if manifest["mode"] != "parallel":
        raise ValueError("differential runs need a parallel source directory")
    includes = ["-I", str(src), "-I", str(RUNNER_DIR)]
    sources = [str(src / name) for name in manifest["sources"]]

    parallel = src / "run_parallel"
    subprocess.run(
        [*CC, "-pthread", *includes, *sources,
         str(RUNNER_DIR / "run_parallel.c"), "-o", str(parallel)],
        check=True,
    )

    sequential = src / "run_seq"
    subprocess.run(
        [*CC, *includes, str(src / "kernels.c"), str(src / "inference_seq.c"),
         str(RUNNER_DIR / "run_seq.c"), "-o", str(sequential)],
        check=True,
    )
    return parallel, sequential


if __name__ == "__main__":
    for arg in sys.argv[1:]:
        par, seq = compile_plan(arg)
        print(f"built {par} and {seq}")
