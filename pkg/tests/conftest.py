import numpy as np
import pytest

from modelcritic.data import Dataset


@pytest.fixture
def small_dataset():
    return Dataset.from_columns(
        "small",
        {"g": [0, 0, 1, 1], "soil": ["clay", "loam", "clay", "sand"], "x": [0.1, 0.5, 0.9, 1.3], "y": [1.0, 3.0, 1.0, 3.0]},
        "y",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
