"""Shared fixtures: kernel warmup and the expensive benchmark run.

The two-class million-agent scenario is simulated once per session through
the CLI and shared by every test that needs its stationary histogram.
"""
import json
import time
from pathlib import Path

import pytest

import paygame

REPO = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO / "configs"


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile jitted kernels up front so timed tests measure work, not JIT
    paygame.warmup_jit()


@pytest.fixture(scope="session")
def bench_run(tmp_path_factory):
    """Stationary run of the shipped two-class benchmark config via the CLI.

    Returns the output directory, the parsed config, and the wall-clock
    seconds the simulate command took (used by the runtime criterion).
    """
    from paygame import cli

    cfg_path = CONFIG_DIR / "two_class_million.json"
    out = tmp_path_factory.mktemp("bench")
    t0 = time.perf_counter()
    rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert rc == 0, "benchmark simulate run failed"
    return {
        "dir": out,
        "config": json.loads(cfg_path.read_text()),
        "seconds": elapsed,
        "manifest": json.loads((out / "manifest.json").read_text()),
    }
