"""Exact discrete-probability machinery for factor mixtures.

A corpus is modeled as a uniform mixture of m sub-datasets; each sub-dataset
carries an independent pair of finite factor distributions (a task-relevant
factor u and a task-irrelevant factor v). Everything here is exact and
analytic over the tabulated joint: entropies, mutual information, normalized
mutual information, the closed-form NMI equality for disjoint supports, the
NMI upper bound for overlapping supports, and a randomized verification
harness that checks both against brute-force enumeration.

Conventions: logarithms are base 2 and results are reported in bits;
0 * log 0 := 0 for zero-mass atoms and cells. Masses must arrive normalized
(sum to 1 within 1e-12); nothing here renormalizes silently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import (
    DegenerateMixtureWarning,
    FormatError,
    UnsupportedArityError,
    ValidationError,
)

MASS_TOL = 1e-12
PROP_TOL = 1e-10

Factor = Literal["u", "v"]


def _entropy_bits(mass: np.ndarray) -> float:
    """Shannon entropy in bits of a mass vector, with the 0*log(0)=0 convention."""
    p = mass[mass > 0.0]
    if p.size == 0:
        return 0.0
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite-support probability distribution over opaque string symbols."""

    support: tuple[str, ...]
    mass: np.ndarray

    def __post_init__(self) -> None:
        support = tuple(str(s) for s in self.support)
        mass = np.asarray(self.mass, dtype=np.float64)
        object.__setattr__(self, "support", support)
        if mass.ndim != 1 or mass.shape[0] != len(support):
            raise ValidationError(
                f"mass must be 1-D and aligned with support "
                f"(got {mass.shape} masses for {len(support)} symbols)"
            )
        if len(support) == 0:
            raise ValidationError("support must be non-empty")
        if len(set(support)) != len(support):
            raise ValidationError("support symbols must be unique")
        if not np.all(np.isfinite(mass)):
            raise ValidationError("masses must be finite")
        if np.any(mass < 0.0):
            raise ValidationError("masses must be >= 0")
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(
                f"masses must sum to 1 within {MASS_TOL:g} (got {total!r}); "
                "callers must normalize explicitly"
            )
        mass = mass.copy()
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_dict(cls, probs: dict[str, float]) -> "DiscreteDistribution":
        return cls(tuple(probs.keys()), np.array(list(probs.values()), dtype=np.float64))

    @classmethod
    def point(cls, symbol: str) -> "DiscreteDistribution":
        return cls((symbol,), np.array([1.0]))

    @classmethod
    def uniform(cls, symbols: Sequence[str]) -> "DiscreteDistribution":
        n = len(symbols)
        return cls(tuple(symbols), np.full(n, 1.0 / n))

    def prob(self, symbol: str) -> float:
        try:
            return float(self.mass[self.support.index(symbol)])
        except ValueError:
            return 0.0

    def as_dict(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.support, self.mass)}


def entropy(d: DiscreteDistribution) -> float:
    """H(d) in bits."""
    return _entropy_bits(d.mass)


@dataclass(frozen=True)
class SubDatasetFactors:
    """One sub-dataset: independent factor distributions u and v.

    The joint within a sub-dataset is always the product of the marginals
    (it is derived, never stored), so intra-dataset independence holds by
    construction.
    """

    u: DiscreteDistribution
    v: DiscreteDistribution

    def factor(self, which: Factor) -> DiscreteDistribution:
        if which == "u":
            return self.u
        if which == "v":
            return self.v
        raise ValidationError(f"factor must be 'u' or 'v', got {which!r}")


@dataclass(frozen=True)
class MixtureModel:
    """Uniform mixture of sub-datasets (weights implicitly 1/m)."""

    components: tuple[SubDatasetFactors, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        object.__setattr__(self, "components", components)
        if len(components) < 1:
            raise ValidationError("mixture needs at least one component")

    @property
    def m(self) -> int:
        return len(self.components)


def _union_support(dists: Iterable[DiscreteDistribution]) -> tuple[str, ...]:
    """Union of supports in first-appearance order (component order, then symbol order)."""
    seen: dict[str, None] = {}
    for d in dists:
        for s in d.support:
            seen.setdefault(s, None)
    return tuple(seen.keys())


def mixture_marginal(mix: MixtureModel, which: Factor) -> DiscreteDistribution:
    """Marginal of the chosen factor under the uniform mixture: (1/m) sum_i p_i."""
    dists = [c.factor(which) for c in mix.components]
    support = _union_support(dists)
    index = {s: k for k, s in enumerate(support)}
    mass = np.zeros(len(support))
    for d in dists:
        for s, p in zip(d.support, d.mass):
            mass[index[s]] += p
    mass /= mix.m
    return DiscreteDistribution(support, mass)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Tabulated joint p(u, v) over the union supports."""

    u_support: tuple[str, ...]
    v_support: tuple[str, ...]
    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (len(self.u_support), len(self.v_support)):
            raise ValidationError("joint mass table shape must match supports")
        if np.any(mass < 0.0) or not np.all(np.isfinite(mass)):
            raise ValidationError("joint masses must be finite and >= 0")
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"joint masses must sum to 1 within {MASS_TOL:g} (got {total!r})")
        mass = mass.copy()
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    def marginal_u(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def marginal_v(self) -> np.ndarray:
        return self.mass.sum(axis=0)


def joint_mixture(mix: MixtureModel) -> JointDistribution:
    """Joint p(u,v) = (1/m) sum_i p_{u_i}(u) p_{v_i}(v) as an explicit table."""
    u_support = _union_support(c.u for c in mix.components)
    v_support = _union_support(c.v for c in mix.components)
    u_index = {s: k for k, s in enumerate(u_support)}
    v_index = {s: k for k, s in enumerate(v_support)}
    table = np.zeros((len(u_support), len(v_support)))
    for c in mix.components:
        u_vec = np.zeros(len(u_support))
        v_vec = np.zeros(len(v_support))
        for s, p in zip(c.u.support, c.u.mass):
            u_vec[u_index[s]] = p
        for s, p in zip(c.v.support, c.v.mass):
            v_vec[v_index[s]] = p
        table += np.outer(u_vec, v_vec)
    table /= mix.m
    joint = JointDistribution(u_support, v_support, table)

    # Marginal consistency with the mixture marginals is an invariant, not
    # a numerical accident; check it eagerly.
    mu = mixture_marginal(mix, "u")
    mv = mixture_marginal(mix, "v")
    if not np.allclose(joint.marginal_u(), mu.mass, rtol=0.0, atol=MASS_TOL) or not np.allclose(
        joint.marginal_v(), mv.mass, rtol=0.0, atol=MASS_TOL
    ):
        raise ValidationError("joint marginals drifted from mixture marginals beyond 1e-12")
    return joint


def mutual_information(j: JointDistribution) -> float:
    """I(u, v) in bits from the tabulated joint; zero-mass cells contribute 0."""
    pu = j.marginal_u()
    pv = j.marginal_v()
    outer = np.outer(pu, pv)
    mask = j.mass > 0.0
    cells = j.mass[mask] * np.log2(j.mass[mask] / outer[mask])
    return max(0.0, float(cells.sum()))


def normalized_mi(mix: MixtureModel) -> float:
    """Normalized mutual information 2*I / (H(u) + H(v)) of the mixture.

    The degenerate 0/0 case (both mixture marginals are point masses, so
    H(u) + H(v) = 0 and I = 0) returns 0.0 and emits DegenerateMixtureWarning.
    """
    h_sum = entropy(mixture_marginal(mix, "u")) + entropy(mixture_marginal(mix, "v"))
    if h_sum == 0.0:
        warnings.warn(
            "H(u) + H(v) = 0: normalized MI is 0/0, defined as 0",
            DegenerateMixtureWarning,
            stacklevel=2,
        )
        return 0.0
    return 2.0 * mutual_information(joint_mixture(mix)) / h_sum


def c_diversity(mix: MixtureModel) -> float:
    """Sum of per-component factor entropies, in bits."""
    return float(sum(entropy(c.u) + entropy(c.v) for c in mix.components))


def c_interleave(mix: MixtureModel) -> float:
    """Total overlapping mass of factor supports across two sub-datasets.

    For each factor, sums p_1(s) + p_2(s) over symbols in the support
    intersection; ranges from 0 (disjoint) to 4 (identical supports).
    """
    if mix.m != 2:
        raise UnsupportedArityError(f"c_interleave is stated for m=2 sub-datasets, got m={mix.m}")
    total = 0.0
    for which in ("u", "v"):
        d1 = mix.components[0].factor(which)
        d2 = mix.components[1].factor(which)
        shared = set(d1.support) & set(d2.support)
        for s in shared:
            total += d1.prob(s) + d2.prob(s)
    return total


def supports_disjoint(mix: MixtureModel, which: Factor) -> bool:
    """True when no symbol of the chosen factor appears in two components."""
    seen: set[str] = set()
    for c in mix.components:
        sup = set(c.factor(which).support)
        if seen & sup:
            return False
        seen |= sup
    return True


def prop1_predicted_nmi(mix: MixtureModel) -> float:
    """Closed-form NMI for two sub-datasets with disjoint supports: 4/(C_diversity + 4)."""
    if mix.m != 2:
        raise UnsupportedArityError(f"the disjoint-support equality is stated for m=2, got m={mix.m}")
    if not (supports_disjoint(mix, "u") and supports_disjoint(mix, "v")):
        raise ValidationError(
            "supports overlap; the equality only holds for disjoint supports "
            "(use prop2_nmi_upper_bound instead)"
        )
    return 4.0 / (c_diversity(mix) + 4.0)


def prop2_nmi_upper_bound(mix: MixtureModel) -> float:
    """Upper bound on NMI for two sub-datasets with overlapping supports.

    bound = 1 - C_diversity / (C_diversity + (4 - C_interleave)).

    Validity: the bound is derived for components that assign equal mass to
    every shared symbol (disjoint supports are the degenerate case, where it
    reduces exactly to the closed-form equality). With unequal masses on the
    overlap the cross terms of the mutual information no longer cancel and
    the returned value can be exceeded; see the unmatched-overlap regression
    test for a concrete witness. The 0/0 corner (C_diversity = 0 with
    C_interleave = 4, i.e. two identical point-mass components) is defined
    as 0 by continuity; the exact NMI of that mixture is 0 as well.
    """
    if mix.m != 2:
        raise UnsupportedArityError(f"the overlap bound is stated for m=2, got m={mix.m}")
    c_div = c_diversity(mix)
    slack = 4.0 - c_interleave(mix)
    denom = c_div + slack
    if denom <= 0.0:
        return 0.0
    return 1.0 - c_div / denom


# ---------------------------------------------------------------------------
# Randomized verification harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    index: int
    family: str  # "disjoint" | "overlapping"
    nmi: float
    reference: float  # equality prediction (disjoint) or upper bound (overlapping)
    residual: float  # |nmi - reference| for disjoint, max(0, nmi - bound) otherwise


@dataclass(frozen=True)
class VerificationReport:
    trials: int
    seed: int
    support_size_range: tuple[int, int]
    disjoint_trials: int
    overlapping_trials: int
    max_equality_residual: float
    max_bound_violation: float
    records: tuple[TrialRecord, ...]

    @property
    def ok(self) -> bool:
        return self.max_equality_residual < PROP_TOL and self.max_bound_violation <= PROP_TOL

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "support_size_range": list(self.support_size_range),
            "disjoint_trials": self.disjoint_trials,
            "overlapping_trials": self.overlapping_trials,
            "max_equality_residual": self.max_equality_residual,
            "max_bound_violation": self.max_bound_violation,
            "tolerance": PROP_TOL,
            "pass": self.ok,
        }


def _default_alphabet(max_support: int) -> tuple[str, ...]:
    size = max(2 * max_support + 4, 12)
    return tuple(f"s{k:02d}" for k in range(size))


def _random_dist(rng: np.random.Generator, symbols: Sequence[str]) -> DiscreteDistribution:
    n = len(symbols)
    mass = rng.dirichlet(np.ones(n)) if n > 1 else np.array([1.0])
    return DiscreteDistribution(tuple(symbols), mass)


def _draw_disjoint_pair(
    rng: np.random.Generator, alphabet: Sequence[str], lo: int, hi: int
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    n1 = int(rng.integers(lo, hi + 1))
    n2 = int(rng.integers(lo, hi + 1))
    picked = rng.choice(len(alphabet), size=n1 + n2, replace=False)
    symbols = [alphabet[k] for k in picked]
    return _random_dist(rng, symbols[:n1]), _random_dist(rng, symbols[n1:])


def _draw_overlapping_pair(
    rng: np.random.Generator, alphabet: Sequence[str], lo: int, hi: int
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """Overlapping supports with matched masses on every shared symbol.

    Both components put the same (random) mass on each shared symbol and
    spread the remaining mass over their exclusive symbols independently;
    this is the regime where the overlap bound is a theorem.
    """
    n1 = int(rng.integers(max(lo, 1), hi + 1))
    n2 = int(rng.integers(max(lo, 1), hi + 1))
    s = 1 + int(rng.integers(0, min(n1, n2)))
    picked = rng.choice(len(alphabet), size=n1 + n2 - s, replace=False)
    symbols = [alphabet[k] for k in picked]
    shared, excl1, excl2 = symbols[:s], symbols[s:n1], symbols[n1:]
    w = 1.0 if not excl1 or not excl2 else float(rng.uniform(0.05, 0.95))
    shared_mass = w * rng.dirichlet(np.ones(s)) if s > 1 else np.array([w])

    def build(exclusive: list[str]) -> DiscreteDistribution:
        if exclusive and w < 1.0:
            tail = (1.0 - w) * rng.dirichlet(np.ones(len(exclusive)))
        else:
            tail = np.zeros(len(exclusive))
        return DiscreteDistribution(tuple(shared) + tuple(exclusive), np.concatenate([shared_mass, tail]))

    return build(excl1), build(excl2)


def verify_propositions(
    trials: int,
    seed: int,
    support_size_range: tuple[int, int] = (1, 8),
    alphabet: Sequence[str] | None = None,
) -> VerificationReport:
    """Check both NMI propositions against brute-force enumeration.

    Trials alternate deterministically between the two families: even trial
    indices draw m=2 mixtures with disjoint supports for both factors (the
    closed-form equality must hold to 1e-10), odd indices draw mixtures with
    at least one shared symbol per factor and matched masses on the overlap
    (the upper bound's validity regime; it must hold to 1e-10 there). Factor
    masses are Dirichlet(1) draws; everything is a pure function of the seed.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    lo, hi = int(support_size_range[0]), int(support_size_range[1])
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad support_size_range {support_size_range!r}")
    if alphabet is None:
        alphabet = _default_alphabet(hi)
    alphabet = tuple(str(s) for s in alphabet)
    if len(set(alphabet)) != len(alphabet):
        raise ValidationError("alphabet symbols must be unique")
    if len(alphabet) < 2 * hi:
        raise ValidationError(f"alphabet needs at least {2 * hi} symbols for support size {hi}")

    rng = np.random.default_rng(seed)
    records: list[TrialRecord] = []
    max_eq = 0.0
    max_viol = 0.0
    n_disjoint = 0
    n_overlap = 0
    for k in range(trials):
        family = "disjoint" if k % 2 == 0 else "overlapping"
        draw = _draw_disjoint_pair if family == "disjoint" else _draw_overlapping_pair
        u1, u2 = draw(rng, alphabet, lo, hi)
        v1, v2 = draw(rng, alphabet, lo, hi)
        mix = MixtureModel((SubDatasetFactors(u1, v1), SubDatasetFactors(u2, v2)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateMixtureWarning)
            nmi = normalized_mi(mix)
        if family == "disjoint":
            reference = prop1_predicted_nmi(mix)
            residual = abs(nmi - reference)
            max_eq = max(max_eq, residual)
            n_disjoint += 1
        else:
            reference = prop2_nmi_upper_bound(mix)
            residual = max(0.0, nmi - reference)
            max_viol = max(max_viol, residual)
            n_overlap += 1
        records.append(TrialRecord(k, family, nmi, reference, residual))
    return VerificationReport(
        trials=trials,
        seed=seed,
        support_size_range=(lo, hi),
        disjoint_trials=n_disjoint,
        overlapping_trials=n_overlap,
        max_equality_residual=max_eq,
        max_bound_violation=max_viol,
        records=tuple(records),
    )


# ---------------------------------------------------------------------------
# JSON document interface
# ---------------------------------------------------------------------------


def _dist_from_obj(obj: object, where: str) -> DiscreteDistribution:
    if not isinstance(obj, dict) or "symbols" not in obj or "mass" not in obj:
        raise FormatError(f"{where}: expected an object with 'symbols' and 'mass'")
    symbols = obj["symbols"]
    mass = obj["mass"]
    if not isinstance(symbols, list) or not isinstance(mass, list):
        raise FormatError(f"{where}: 'symbols' and 'mass' must be arrays")
    if not all(isinstance(s, str) for s in symbols):
        raise FormatError(f"{where}: symbols must be strings")
    try:
        mass_arr = np.array([float(x) for x in mass], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: non-numeric mass entry") from exc
    return DiscreteDistribution(tuple(symbols), mass_arr)


def mixture_from_dict(doc: dict) -> MixtureModel:
    if not isinstance(doc, dict) or "components" not in doc:
        raise FormatError("mixture document must be an object with a 'components' array")
    comps = doc["components"]
    if not isinstance(comps, list) or not comps:
        raise FormatError("'components' must be a non-empty array")
    parsed = []
    for i, comp in enumerate(comps):
        if not isinstance(comp, dict) or "u" not in comp or "v" not in comp:
            raise FormatError(f"components[{i}] must have 'u' and 'v'")
        parsed.append(
            SubDatasetFactors(
                _dist_from_obj(comp["u"], f"components[{i}].u"),
                _dist_from_obj(comp["v"], f"components[{i}].v"),
            )
        )
    return MixtureModel(tuple(parsed))


def mixture_to_dict(mix: MixtureModel) -> dict:
    return {
        "components": [
            {
                "u": {"symbols": list(c.u.support), "mass": [float(p) for p in c.u.mass]},
                "v": {"symbols": list(c.v.support), "mass": [float(p) for p in c.v.mass]},
            }
            for c in mix.components
        ]
    }


def load_mixture_json(path: str) -> MixtureModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return mixture_from_dict(doc)


def save_mixture_json(path: str, mix: MixtureModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mixture_to_dict(mix), fh, indent=2, sort_keys=True)
        fh.write("\n")
