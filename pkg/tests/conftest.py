"""Shared test helpers: independent brute-force oracles and fixture builders.

The oracle here deliberately avoids the package's joint-table code path
(pure-Python dicts and math.log2) so proposition checks compare two
independent computations.
"""

import math

import numpy as np
import pytest

from fragscope import DiscreteDistribution, MixtureModel, SubDatasetFactors


def dist(probs: dict[str, float]) -> DiscreteDistribution:
    return DiscreteDistribution(tuple(probs.keys()), np.array(list(probs.values())))


def mix2(u1, v1, u2, v2) -> MixtureModel:
    return MixtureModel(
        (
            SubDatasetFactors(dist(u1) if isinstance(u1, dict) else u1,
                              dist(v1) if isinstance(v1, dict) else v1),
            SubDatasetFactors(dist(u2) if isinstance(u2, dict) else u2,
                              dist(v2) if isinstance(v2, dict) else v2),
        )
    )


def independent_nmi(mixture: MixtureModel) -> float:
    """Dict-based brute-force NMI, independent of the numpy joint-table path."""
    m = mixture.m
    joint: dict[tuple[str, str], float] = {}
    for comp in mixture.components:
        for su, pu in zip(comp.u.support, comp.u.mass):
            for sv, pv in zip(comp.v.support, comp.v.mass):
                joint[(su, sv)] = joint.get((su, sv), 0.0) + float(pu) * float(pv) / m
    pu_m: dict[str, float] = {}
    pv_m: dict[str, float] = {}
    for (su, sv), p in joint.items():
        pu_m[su] = pu_m.get(su, 0.0) + p
        pv_m[sv] = pv_m.get(sv, 0.0) + p
    info = sum(
        p * math.log2(p / (pu_m[su] * pv_m[sv])) for (su, sv), p in joint.items() if p > 0.0
    )
    h = lambda d: -sum(p * math.log2(p) for p in d.values() if p > 0.0)
    denom = h(pu_m) + h(pv_m)
    return 0.0 if denom == 0.0 else 2.0 * info / denom


def random_unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1)[:, None]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
