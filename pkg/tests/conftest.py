import json
import math

import numpy as np
import pytest

from moran_dim.ifs_core import AmbientSet, IFSSpec, LevelSystem, Similarity, validate_spec

S = Similarity.line
CANTOR_DIM = math.log(2) / math.log(3)


def cantor_spec() -> IFSSpec:
    return validate_spec(IFSSpec.autonomous([S(1 / 3, 0.0), S(1 / 3, 2 / 3)], AmbientSet.unit_interval()))


def osc_level(rng, k_range=(2, 5), ratio_range=(0.1, 0.45)) -> tuple[LevelSystem, np.ndarray]:
    """Random level on [0, 1] whose images are disjoint and in order (so the OSC holds)."""
    while True:
        k = int(rng.integers(*k_range))
        r = rng.uniform(*ratio_range, size=k)
        if r.sum() < 0.97:
            break
    gaps = rng.dirichlet(np.ones(k + 1)) * (1 - r.sum())
    t = np.cumsum(np.r_[0.0, r[:-1]]) + np.cumsum(gaps[:-1])
    return LevelSystem.from_maps([S(float(a), float(b)) for a, b in zip(r, t)]), r


def random_osc_autonomous(seed: int) -> tuple[IFSSpec, np.ndarray]:
    lv, r = osc_level(np.random.default_rng(seed))
    return validate_spec(IFSSpec.periodic([lv])), r


def random_periodic(seed: int, max_period: int = 4, max_prefix: int = 2) -> IFSSpec:
    rng = np.random.default_rng(seed)
    period = int(rng.integers(1, max_period + 1))
    prefix = int(rng.integers(0, max_prefix + 1))
    tail = [osc_level(rng)[0] for _ in range(period)]
    pre = [osc_level(rng)[0] for _ in range(prefix)]
    return validate_spec(IFSSpec.periodic(tail, prefix=pre))


@pytest.fixture
def cantor():
    return cantor_spec()


CANTOR_JSON = {
    "dimension": 1,
    "ambient": {"box": {"lo": [0.0], "hi": [1.0]}},
    "tail": {"periodic": [[{"ratio": 1 / 3, "translation": 0.0},
                           {"ratio": 1 / 3, "translation": 2 / 3}]]},
}


@pytest.fixture
def cantor_file(tmp_path):
    p = tmp_path / "cantor.json"
    p.write_text(json.dumps(CANTOR_JSON))
    return p
