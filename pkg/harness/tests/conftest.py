import pathlib
import shutil
import subprocess
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))
from build import compile_plan  # noqa: E402


def run_cli(*args):
    subprocess.run(
        ["schedgen", *[str(a) for a in args]],
        check=True,
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="session")
def toolchain():
    if shutil.which("cc") is None:
        pytest.skip("differential tests need a C compiler")
    if shutil.which("schedgen") is None:
        pytest.skip("install the scheduling package first (pip install -e .)")


@pytest.fixture(scope="session")
def lenet_plan(toolchain, tmp_path_factory):
    root = tmp_path_factory.mktemp("lenet")
    graph = root / "graph.json"
    sched = root / "sched.json"
    run_cli("fixture", "lenet5-split", "--out", graph, "--schedule-out", sched)
    out = root / "gen"
    run_cli("codegen", graph, "--mode", "parallel", "--schedule", sched, "--out", out)
    compile_plan(out)
    return out


@pytest.fixture(scope="session")
def random_plans(toolchain, tmp_path_factory):
    root = tmp_path_factory.mktemp("plans")
    dirs = []
    for seed in range(10):
        graph = root / f"graph_{seed}.json"
        sched = root / f"sched_{seed}.json"
        run_cli("gen", "--nodes", 12, "--density", 0.3, "--seed", seed, "--out", graph)
        run_cli("schedule", graph, "--algo", "dsh", "--cores", 3, "--out", sched)
        out = root / f"gen_{seed}"
        run_cli("codegen", graph, "--mode", "parallel", "--schedule", sched, "--out", out)
        compile_plan(out)
        dirs.append(out)
    return dirs
