import os
import sys

# tiny matrices everywhere: BLAS threading only adds sync overhead (must be
# set before numpy first loads)
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

sys.path.insert(0, os.path.dirname(__file__))  # for the shared oracles module

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from rmanet.data import generate_split, load  # noqa: E402


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small train/test split shared by trainer and CLI tests."""
    root = tmp_path_factory.mktemp("tiny_data")
    generate_split(7, 24, 8, str(root), image_size=32, n_classes=3)
    return {
        "root": str(root),
        "train": load(str(root / "train")),
        "test": load(str(root / "test")),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(0)
