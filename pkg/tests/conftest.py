from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from regiolex.cli import run_cli
from regiolex.corpus import Dataset, LabeledInstance

TESTS_DIR = Path(__file__).parent
STUB_SCORER = str(TESTS_DIR / "stub_scorer.py")

sys.path.insert(0, str(TESTS_DIR))  # for loo_oracle imports inside tests


def make_dataset(texts_by_class: dict[str, list[str]]) -> Dataset:
    """Build an in-memory dataset; keys become the manifest in dict order."""
    manifest = list(texts_by_class)
    instances = []
    for label, name in enumerate(manifest):
        for i, text in enumerate(texts_by_class[name]):
            instances.append(LabeledInstance(id=f"{name}-{i:04d}", text=text, label=label))
    return Dataset(instances=instances, manifest=manifest)


@dataclass
class RefRun:
    """A completed reference-configuration pipeline run (config defaults:
    3 classes, 20 markers per class, injection 0.3, 2000/500/500 per class,
    seed 7) with top-20 lexicons."""

    out: Path
    seconds: float


REF_ARGS = ["--lexicon-size", "20"]


@pytest.fixture(scope="session")
def ref_run(tmp_path_factory) -> RefRun:
    out = tmp_path_factory.mktemp("refrun")
    start = time.perf_counter()
    rc = run_cli(["pipeline", "--out", str(out)] + REF_ARGS)
    seconds = time.perf_counter() - start
    assert rc == 0, "reference pipeline run failed"
    return RefRun(out=out, seconds=seconds)
