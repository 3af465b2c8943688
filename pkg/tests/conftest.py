"""
Fixtures et constructeurs d'instances partagés par les tests
"""
import numpy as np
import pandas as pd
import pytest

from src.dataset import LabeledDataset, PartitionSpec
from src.losses import TaylorLossSpec, get_loss
from src.permdiag import calibrated_gamma


def make_dataset(rng: np.random.Generator, d: int, m: int) -> LabeledDataset:
    """Variables uniformes dans [−1, 1], deux classes toujours présentes."""
    X = rng.uniform(-1.0, 1.0, size=(d, m))
    y = rng.choice([-1.0, 1.0], size=m)
    y[0], y[1] = 1.0, -1.0
    return LabeledDataset(X, y)


def half_partition(d: int) -> PartitionSpec:
    """Lignes [0, d/2) côté ancre, le reste mélangé ; ligne 0 partagée."""
    cut = max(1, d // 2)
    return PartitionSpec(tuple(range(cut)), tuple(range(cut, d)), (0,))


def random_transpositions(m: int, rng: np.random.Generator, count: int) -> np.ndarray:
    pi = np.arange(m)
    for _ in range(count):
        u, v = rng.choice(m, size=2, replace=False)
        pi[[u, v]] = pi[[v, u]]
    return pi


def within_class_permutation(labels: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """Composition de `count` échanges entre exemples de même classe (ρ = 0)."""
    pi = np.arange(labels.size)
    for _ in range(count):
        label = rng.choice([-1.0, 1.0])
        members = np.flatnonzero(labels == label)
        if members.size < 2:
            continue
        u, v = rng.choice(members, size=2, replace=False)
        pi[[u, v]] = pi[[v, u]]
    return pi


def calibrated_spec(S: LabeledDataset, loss_name: str = "logistic") -> TaylorLossSpec:
    loss = get_loss(loss_name)
    c = loss.F2 / 2.0
    return TaylorLossSpec.from_source(loss, calibrated_gamma(S, loss, c), S.d, c=c)


def write_toy_csv(path, m: int = 40, seed: int = 0):
    """CSV jouet : 4 variables, étiquettes 'yes' / 'no' presque linéairement séparables."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, 4))
    score = X @ np.array([1.0, -0.5, 2.0, 1.0]) + 0.3 * rng.standard_normal(m)
    df = pd.DataFrame(X, columns=["f0", "f1", "f2", "f3"])
    df["label"] = np.where(score > 0, "yes", "no")
    df.to_csv(path, index=False)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_csv(tmp_path):
    return write_toy_csv(tmp_path / "toy.csv")


@pytest.fixture
def small_dataset(rng):
    return make_dataset(rng, d=4, m=20)
