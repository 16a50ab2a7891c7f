import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from emgevm import cli
from emgevm.dataio import LabeledDataset


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """Small synthetic dataset: 1 subject, 10 classes, 6 trials, 1.5 s each."""
    root = tmp_path_factory.mktemp("synth") / "ds"
    rc = cli.main(["synth", "--out", str(root), "--subjects", "1",
                   "--seconds", "1.5", "--seed", "3"])
    assert rc == 0
    return root


@pytest.fixture()
def ab_dataset() -> LabeledDataset:
    """1-D two-class fixture: A at {0.0, 0.1, 0.2}, B at {1.0, 1.1, 1.2}."""
    return LabeledDataset(
        features=np.array([[0.0], [0.1], [0.2], [1.0], [1.1], [1.2]]),
        labels=["A", "A", "A", "B", "B", "B"],
        class_list=["A", "B"],
    )
