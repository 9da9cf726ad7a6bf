"""Factor-level interventions that reconnect fragmented sub-datasets.

Two transformations on a mixture model:

* apply_bridge: every component's chosen factor donates a mass fraction
  epsilon to a shared set of bridge symbols (existing masses rescale by
  1 - epsilon), modeling demonstrations of a shared factor value added to
  each sub-dataset equally so the mixture stays uniform.
* symmetrize_factor: every component's chosen factor is replaced by the
  factor's mixture marginal, the distribution-level picture of augmenting
  each sub-dataset with every other's factor values (e.g. rendering each
  scene from the other viewpoint). Identical marginals make the mixture
  joint a product, so the mutual information drops to exactly zero.

plan_bridge searches an epsilon grid for the smallest bridge mass whose
exact NMI meets a target.

Reference outcome (real-robot finetuning, not reproducible here and never
asserted by tests): baseline shortcut degree 0.6 / OOD success 0.2; adding a
third bridge object 0 / 0.75; viewpoint augmentation 0.15 / 0.55.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateMixtureWarning, ValidationError
from .factors import (
    DiscreteDistribution,
    Factor,
    MixtureModel,
    SubDatasetFactors,
    mixture_marginal,
    normalized_mi,
    prop2_nmi_upper_bound,
)

NMI_GRID_TOL = 1e-12


@dataclass(frozen=True)
class BridgeSpec:
    """Bridge intervention: which factor, which shared symbols, how much mass."""

    factor: Factor
    bridge_symbols: tuple[str, ...]
    epsilon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bridge_symbols", tuple(str(s) for s in self.bridge_symbols))
        if self.factor not in ("u", "v"):
            raise ValidationError(f"factor must be 'u' or 'v', got {self.factor!r}")
        if not self.bridge_symbols:
            raise ValidationError("bridge_symbols must be non-empty")
        if len(set(self.bridge_symbols)) != len(self.bridge_symbols):
            raise ValidationError("bridge_symbols must be unique")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise ValidationError(f"epsilon must be in (0, 1), got {self.epsilon}")

    def to_dict(self) -> dict:
        doc: dict = {"factor": self.factor, "symbols": list(self.bridge_symbols)}
        if self.epsilon is not None:
            doc["epsilon"] = self.epsilon
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "BridgeSpec":
        if not isinstance(doc, dict) or "factor" not in doc or "symbols" not in doc:
            raise ValidationError("bridge object needs 'factor' and 'symbols'")
        return cls(
            factor=doc["factor"],
            bridge_symbols=tuple(doc["symbols"]),
            epsilon=doc.get("epsilon"),
        )


def apply_bridge(mix: MixtureModel, spec: BridgeSpec) -> MixtureModel:
    """Add the bridge symbols with total mass epsilon to every component's chosen factor."""
    if spec.epsilon is None:
        raise ValidationError("BridgeSpec.epsilon must be set to apply a bridge")
    eps = spec.epsilon
    share = eps / len(spec.bridge_symbols)
    new_components = []
    for i, comp in enumerate(mix.components):
        dist = comp.factor(spec.factor)
        clash = set(spec.bridge_symbols) & set(dist.support)
        if clash:
            raise ValidationError(
                f"bridge symbols {sorted(clash)} already present in component {i}'s "
                f"{spec.factor} support"
            )
        support = dist.support + spec.bridge_symbols
        mass = np.concatenate([dist.mass * (1.0 - eps), np.full(len(spec.bridge_symbols), share)])
        bridged = DiscreteDistribution(support, mass)
        if spec.factor == "u":
            new_components.append(SubDatasetFactors(bridged, comp.v))
        else:
            new_components.append(SubDatasetFactors(comp.u, bridged))
    return MixtureModel(tuple(new_components))


def symmetrize_factor(mix: MixtureModel, factor: Factor) -> MixtureModel:
    """Replace the chosen factor of every component with its mixture marginal."""
    marginal = mixture_marginal(mix, factor)
    if factor == "u":
        return MixtureModel(tuple(SubDatasetFactors(marginal, c.v) for c in mix.components))
    return MixtureModel(tuple(SubDatasetFactors(c.u, marginal) for c in mix.components))


@dataclass(frozen=True)
class BridgePlan:
    target_nmi: float
    grid: tuple[float, ...]
    nmi_values: tuple[float, ...]
    epsilon_star: float | None
    achieved_nmi: float
    bound_after: float | None
    feasible: bool
    monotone: bool

    def to_dict(self) -> dict:
        return {
            "target_nmi": self.target_nmi,
            "grid": list(self.grid),
            "nmi": list(self.nmi_values),
            "epsilon_star": self.epsilon_star,
            "achieved_nmi": self.achieved_nmi,
            "bound_after": self.bound_after,
            "feasible": self.feasible,
            "monotone": self.monotone,
        }


def plan_bridge(
    mix: MixtureModel,
    spec_template: BridgeSpec,
    target_nmi: float,
    grid: Sequence[float],
) -> BridgePlan:
    """Smallest grid epsilon whose bridged mixture reaches NMI <= target.

    The grid must be sorted ascending inside (0, 1). NMI at every epsilon is
    evaluated with the exact joint-table oracle. When no grid point meets the
    target the plan is marked infeasible and reports the best value found.
    Shared-symbol bridges should make NMI non-increasing along the grid; the
    `monotone` flag records whether that held.
    """
    if not 0.0 <= target_nmi < 1.0:
        raise ValidationError(f"target_nmi must be in [0, 1), got {target_nmi}")
    if len(grid) == 0:
        raise ValidationError("epsilon grid must be non-empty")
    eps_grid = tuple(float(x) for x in grid)
    if any(not 0.0 < x < 1.0 for x in eps_grid):
        raise ValidationError("grid epsilons must lie in (0, 1)")
    if list(eps_grid) != sorted(eps_grid):
        raise ValidationError("epsilon grid must be sorted ascending")

    values = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMixtureWarning)
        for eps in eps_grid:
            bridged = apply_bridge(mix, replace(spec_template, epsilon=eps))
            values.append(normalized_mi(bridged))
    monotone = all(b <= a + NMI_GRID_TOL for a, b in zip(values, values[1:]))

    star = next((k for k, v in enumerate(values) if v <= target_nmi + NMI_GRID_TOL), None)
    best = int(np.argmin(values)) if star is None else star
    bound_after = None
    if mix.m == 2:
        bridged = apply_bridge(mix, replace(spec_template, epsilon=eps_grid[best]))
        bound_after = prop2_nmi_upper_bound(bridged)
    return BridgePlan(
        target_nmi=target_nmi,
        grid=eps_grid,
        nmi_values=tuple(values),
        epsilon_star=None if star is None else eps_grid[star],
        achieved_nmi=values[best],
        bound_after=bound_after,
        feasible=star is not None,
        monotone=monotone,
    )
