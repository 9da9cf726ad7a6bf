"""Deterministic toy analog of the controlled shortcut-learning experiments.

The world: m sub-datasets, each pairing a viewpoint range (the task-irrelevant
factor) with a fixed set of k object positions and matching instructions (the
task-relevant factors). An episode observes the scene (all k object positions
of its sub-dataset), an encoded camera viewpoint, and optionally a one-hot
instruction; the action target is the instructed object's 2-D position. The
learner is closed-form ridge regression, which is deterministic, analyzable,
and still exhibits the variance-driven preference for large-scale confounded
features that drives shortcut behavior.

Out-of-distribution evaluation swaps the pairing: positions and instructions
from one sub-dataset are presented under another sub-dataset's viewpoint. A
policy leaning on the viewpoint lands near the viewpoint-associated targets
instead of the instructed one; the automated rubric scores 1.0 within the
success tolerance of the shortcut target, 0.5 when the prediction sits
nearest the midpoint, 0.0 otherwise, averaged over trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError

VIEWPOINT_MIN_DEG = -10.0
VIEWPOINT_MAX_DEG = 90.0

DEFAULT_EPISODES_PER_TASK = 200
DEFAULT_SUCCESS_TOLERANCE = 0.1
DEFAULT_RIDGE_LAMBDA = 1e-3
DEFAULT_VIEWPOINT_GAIN = 12.0
DEFAULT_NOISE_STD = 0.125
DEFAULT_VIEWPOINT_CENTERS = (15.0, 65.0)
DEFAULT_VIEWPOINT_RADIUS = 2.0

# Position grid extents inside [-1, 1]^2. The band centerline sits halfway
# between the origin and the band center so target separations stay a few
# multiples of the success tolerance rather than an order of magnitude above.
_BAND_X_SCALE = 0.5
_SEPARATED_Y_SPAN = 0.3
_INTERTWINED_Y_SPAN = 0.4

DEFAULT_KNOB_GRIDS: dict[str, tuple] = {
    "viewpoint_radius": (0.0, 2.0, 5.0, 10.0, 25.0),
    "viewpoint_center_distance": (5.0, 10.0, 20.0, 35.0, 50.0),
    "positions_per_subdataset": (1, 2, 3, 4, 5),
    "layout": ("intertwined", "separated"),
    "per_task_viewpoints": (False, True),
}

Layout = Literal["intertwined", "separated"]


@dataclass(frozen=True)
class SimConfig:
    m: int = 2
    positions_per_subdataset: int = 1
    layout: Layout = "separated"
    viewpoint_centers: tuple[float, ...] = DEFAULT_VIEWPOINT_CENTERS
    viewpoint_radius: float = DEFAULT_VIEWPOINT_RADIUS
    include_instruction: bool = True
    per_task_viewpoints: bool = False
    noise_std: float = DEFAULT_NOISE_STD
    viewpoint_gain: float = DEFAULT_VIEWPOINT_GAIN
    episodes_per_task: int = DEFAULT_EPISODES_PER_TASK
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "viewpoint_centers", tuple(float(c) for c in self.viewpoint_centers))
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")
        if not 1 <= self.positions_per_subdataset <= 5:
            raise ConfigurationError(
                f"positions_per_subdataset must be in [1, 5], got {self.positions_per_subdataset}"
            )
        if self.layout not in ("intertwined", "separated"):
            raise ConfigurationError(f"layout must be 'intertwined' or 'separated', got {self.layout!r}")
        if len(self.viewpoint_centers) != self.m:
            raise ConfigurationError(
                f"need {self.m} viewpoint centers, got {len(self.viewpoint_centers)}"
            )
        if self.viewpoint_radius < 0.0:
            raise ConfigurationError(f"viewpoint_radius must be >= 0, got {self.viewpoint_radius}")
        if self.noise_std < 0.0:
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.viewpoint_gain <= 0.0:
            raise ConfigurationError(f"viewpoint_gain must be > 0, got {self.viewpoint_gain}")
        if self.episodes_per_task < 1:
            raise ConfigurationError(f"episodes_per_task must be >= 1, got {self.episodes_per_task}")
        for c in self.viewpoint_centers:
            lo, hi = c - self.viewpoint_radius, c + self.viewpoint_radius
            if lo < VIEWPOINT_MIN_DEG or hi > VIEWPOINT_MAX_DEG:
                raise ConfigurationError(
                    f"viewpoint range [{lo:g}, {hi:g}] leaves the allowed "
                    f"[{VIEWPOINT_MIN_DEG:g}, {VIEWPOINT_MAX_DEG:g}] interval"
                )

    @property
    def k(self) -> int:
        return self.positions_per_subdataset

    @property
    def n_tasks(self) -> int:
        return self.m * self.k


def task_positions(cfg: SimConfig) -> np.ndarray:
    """Object positions per (sub-dataset, task slot), shape (m, k, 2).

    The grid is a pure function of (m, k, layout): 'separated' puts each
    sub-dataset on the centerline of its own vertical band of [-1, 1]^2;
    'intertwined' spreads all m*k positions along one shared line, assigned
    round-robin so neighboring positions belong to different sub-datasets.
    """
    m, k = cfg.m, cfg.k
    out = np.zeros((m, k, 2))
    if cfg.layout == "separated":
        for i in range(m):
            x = (-1.0 + (2.0 * i + 1.0) / m) * _BAND_X_SCALE
            ys = np.linspace(-_SEPARATED_Y_SPAN, _SEPARATED_Y_SPAN, k) if k > 1 else np.array([0.0])
            out[i, :, 0] = x
            out[i, :, 1] = ys
    else:
        total = m * k
        ys = (
            np.linspace(-_INTERTWINED_Y_SPAN, _INTERTWINED_Y_SPAN, total)
            if total > 1
            else np.array([0.0])
        )
        for j in range(total):
            out[j % m, j // m, 0] = 0.0
            out[j % m, j // m, 1] = ys[j]
    return out


def per_task_viewpoint_angles(cfg: SimConfig) -> np.ndarray:
    """Distinct viewpoint per task, evenly spaced over each center +/- radius; shape (m, k)."""
    angles = np.zeros((cfg.m, cfg.k))
    for i, c in enumerate(cfg.viewpoint_centers):
        if cfg.k == 1:
            angles[i, 0] = c
        else:
            angles[i] = np.linspace(c - cfg.viewpoint_radius, c + cfg.viewpoint_radius, cfg.k)
    return angles


def encode_viewpoint(angles_deg: np.ndarray, gain: float) -> np.ndarray:
    """Angle (degrees) -> gain * (sin, cos) feature pair; shape (..., 2)."""
    rad = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    return gain * np.stack([np.sin(rad), np.cos(rad)], axis=-1)


@dataclass(frozen=True, eq=False)
class SimDataset:
    """Episode matrix with its feature-block column map."""

    observations: np.ndarray
    targets: np.ndarray
    subdataset_ids: np.ndarray
    episodes_per_task: int
    u_columns: tuple[int, ...]  # scene + instruction blocks (task-relevant)
    v_columns: tuple[int, ...]  # viewpoint block (task-irrelevant)

    def __post_init__(self) -> None:
        obs = np.asarray(self.observations, dtype=np.float64)
        tgt = np.asarray(self.targets, dtype=np.float64)
        ids = np.asarray(self.subdataset_ids)
        if obs.ndim != 2 or tgt.ndim != 2:
            raise ValidationError("observations and targets must be 2-D")
        if not (obs.shape[0] == tgt.shape[0] == ids.shape[0]):
            raise ValidationError("row counts of observations, targets and ids must agree")
        cols = set(self.u_columns) | set(self.v_columns)
        if len(cols) != len(self.u_columns) + len(self.v_columns) or cols != set(range(obs.shape[1])):
            raise ValidationError("u_columns and v_columns must partition the observation columns")
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "targets", tgt)
        object.__setattr__(self, "subdataset_ids", ids)

    @property
    def n(self) -> int:
        return self.observations.shape[0]


def _scene_row(positions: np.ndarray, i: int) -> np.ndarray:
    return positions[i].reshape(-1)


def _clean_observation(
    cfg: SimConfig, positions: np.ndarray, i: int, t: int, angle_deg: float
) -> np.ndarray:
    parts = [_scene_row(positions, i), encode_viewpoint(np.array(angle_deg), cfg.viewpoint_gain)]
    if cfg.include_instruction:
        onehot = np.zeros(cfg.n_tasks)
        onehot[i * cfg.k + t] = 1.0
        parts.append(onehot)
    return np.concatenate(parts)


def _column_blocks(cfg: SimConfig) -> tuple[tuple[int, ...], tuple[int, ...]]:
    scene = 2 * cfg.k
    u = list(range(scene))
    v = list(range(scene, scene + 2))
    if cfg.include_instruction:
        u.extend(range(scene + 2, scene + 2 + cfg.n_tasks))
    return tuple(u), tuple(v)


def generate_dataset(cfg: SimConfig) -> SimDataset:
    """Sample the training corpus; bit-identical for identical (config, seed).

    Episodes are laid out in (sub-dataset, task, episode) order. Viewpoints
    are uniform in center +/- radius per sub-dataset, or pinned per task in
    per_task_viewpoints mode. Gaussian noise_std noise lands on every
    observation column; targets stay exact.
    """
    rng = np.random.default_rng(cfg.seed)
    positions = task_positions(cfg)
    pinned = per_task_viewpoint_angles(cfg) if cfg.per_task_viewpoints else None
    n_ep = cfg.episodes_per_task
    rows: list[np.ndarray] = []
    targets: list[np.ndarray] = []
    ids: list[np.ndarray] = []
    for i in range(cfg.m):
        for t in range(cfg.k):
            if pinned is not None:
                angles = np.full(n_ep, pinned[i, t])
            else:
                c = cfg.viewpoint_centers[i]
                angles = rng.uniform(c - cfg.viewpoint_radius, c + cfg.viewpoint_radius, size=n_ep)
            scene = np.tile(_scene_row(positions, i), (n_ep, 1))
            view = encode_viewpoint(angles, cfg.viewpoint_gain)
            parts = [scene, view]
            if cfg.include_instruction:
                onehot = np.zeros((n_ep, cfg.n_tasks))
                onehot[:, i * cfg.k + t] = 1.0
                parts.append(onehot)
            rows.append(np.hstack(parts))
            targets.append(np.tile(positions[i, t], (n_ep, 1)))
            ids.append(np.full(n_ep, i, dtype=np.intp))
    obs = np.vstack(rows)
    if cfg.noise_std > 0.0:
        obs = obs + rng.normal(0.0, cfg.noise_std, size=obs.shape)
    u_cols, v_cols = _column_blocks(cfg)
    return SimDataset(
        observations=obs,
        targets=np.vstack(targets),
        subdataset_ids=np.concatenate(ids),
        episodes_per_task=n_ep,
        u_columns=u_cols,
        v_columns=v_cols,
    )


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """Closed-form ridge solution split by feature block."""

    weights_u: np.ndarray  # (len(u_columns), 2)
    weights_v: np.ndarray  # (len(v_columns), 2)
    bias: np.ndarray  # (2,)
    ridge_lambda: float
    u_columns: tuple[int, ...]
    v_columns: tuple[int, ...]

    @property
    def weight_ratio(self) -> float:
        """||weights_v|| / ||weights_u|| (Frobenius)."""
        wu = float(np.linalg.norm(self.weights_u))
        wv = float(np.linalg.norm(self.weights_v))
        return math.inf if wu == 0.0 else wv / wu

    def full_weights(self) -> np.ndarray:
        p = len(self.u_columns) + len(self.v_columns)
        w = np.zeros((p, self.bias.shape[0]))
        w[list(self.u_columns)] = self.weights_u
        w[list(self.v_columns)] = self.weights_v
        return w

    def predict(self, observations: np.ndarray) -> np.ndarray:
        x = np.asarray(observations, dtype=np.float64)
        return x @ self.full_weights() + self.bias


def fit_ridge(data: SimDataset, ridge_lambda: float) -> LinearPolicy:
    """Solve the mean-scaled ridge normal equations on centered features.

    (X_c^T X_c / n + lambda I) W = X_c^T Y_c / n, bias = mean(y) - mean(x) W.
    The mean scaling makes the solution invariant to duplicating rows and
    matches the convention where a unit-variance feature with ratio-t
    collinear twin yields w = 1 / (1 + t^2 + lambda).
    """
    if ridge_lambda <= 0.0:
        raise ValidationError(f"ridge_lambda must be > 0, got {ridge_lambda}")
    if data.n < 1:
        raise ValidationError("dataset is empty")
    x = data.observations
    y = data.targets
    xm = x.mean(axis=0)
    ym = y.mean(axis=0)
    xc = x - xm
    yc = y - ym
    n = data.n
    cov = (xc.T @ xc) / n + ridge_lambda * np.eye(x.shape[1])
    rhs = (xc.T @ yc) / n
    w = np.linalg.solve(cov, rhs)
    residual = float(np.linalg.norm(cov @ w - rhs))
    if residual >= 1e-8:
        raise ValidationError(f"normal-equation residual {residual:g} exceeds 1e-8")
    bias = ym - xm @ w
    return LinearPolicy(
        weights_u=w[list(data.u_columns)],
        weights_v=w[list(data.v_columns)],
        bias=bias,
        ridge_lambda=ridge_lambda,
        u_columns=data.u_columns,
        v_columns=data.v_columns,
    )


@dataclass(frozen=True, eq=False)
class BlockGradients:
    """Zero-initialization L2-loss gradients per feature block: -2 E[(f - Ef)(y - Ey)]."""

    g_u: np.ndarray
    g_v: np.ndarray

    @property
    def u_magnitude(self) -> float:
        return float(np.linalg.norm(self.g_u))

    @property
    def v_magnitude(self) -> float:
        return float(np.linalg.norm(self.g_v))


def initial_gradients(data: SimDataset) -> BlockGradients:
    if data.n < 1:
        raise ValidationError("dataset is empty")
    xc = data.observations - data.observations.mean(axis=0)
    yc = data.targets - data.targets.mean(axis=0)
    g = -2.0 * (xc.T @ yc) / data.n
    return BlockGradients(g_u=g[list(data.u_columns)], g_v=g[list(data.v_columns)])


@dataclass(frozen=True)
class EvalResult:
    ood_success_rate: float
    shortcut_degree: float
    success_tolerance: float


def _rubric_score(
    pred: np.ndarray, instructed: np.ndarray, shortcut: np.ndarray, delta: float
) -> float:
    if np.linalg.norm(instructed - shortcut) <= 1e-12:
        return 0.0  # targets coincide: no shortcut is expressible
    if np.linalg.norm(pred - shortcut) <= delta:
        return 1.0
    midpoint = 0.5 * (instructed + shortcut)
    dists = [
        np.linalg.norm(pred - instructed),
        np.linalg.norm(pred - shortcut),
        np.linalg.norm(pred - midpoint),
    ]
    return 0.5 if int(np.argmin(dists)) == 2 else 0.0


def _check_policy_compat(policy: LinearPolicy, cfg: SimConfig) -> None:
    u_cols, v_cols = _column_blocks(cfg)
    if policy.u_columns != u_cols or policy.v_columns != v_cols:
        raise ValidationError(
            "policy feature blocks do not match the config "
            f"(policy u/v {len(policy.u_columns)}/{len(policy.v_columns)} cols, "
            f"config {len(u_cols)}/{len(v_cols)})"
        )


def _evaluate(policy: LinearPolicy, cfg: SimConfig, delta: float, swapped: bool) -> EvalResult:
    if delta <= 0.0:
        raise ValidationError(f"success tolerance delta must be > 0, got {delta}")
    _check_policy_compat(policy, cfg)
    if cfg.m < 2 and swapped:
        raise ValidationError("OOD pairing swap needs at least 2 sub-datasets")
    positions = task_positions(cfg)
    successes: list[float] = []
    degrees: list[float] = []
    for i in range(cfg.m):  # viewpoint provider
        for j in range(cfg.m):  # position/instruction provider
            if swapped == (i == j):
                continue
            angle = cfg.viewpoint_centers[i]
            shortcut_target = positions[i].mean(axis=0)
            for t in range(cfg.k):
                obs = _clean_observation(cfg, positions, j, t, angle)
                pred = policy.predict(obs[None, :])[0]
                instructed = positions[j, t]
                successes.append(1.0 if np.linalg.norm(pred - instructed) <= delta else 0.0)
                if swapped:
                    degrees.append(_rubric_score(pred, instructed, shortcut_target, delta))
                else:
                    degrees.append(0.0)  # in-distribution: no shortcut by construction
    return EvalResult(
        ood_success_rate=float(np.mean(successes)),
        shortcut_degree=float(np.mean(degrees)),
        success_tolerance=delta,
    )


def evaluate_ood(
    policy: LinearPolicy, data_cfg: SimConfig, delta: float = DEFAULT_SUCCESS_TOLERANCE
) -> EvalResult:
    """Score the policy on the swapped pairings (positions of j under viewpoint of i != j).

    Evaluation observations are noise-free and use each sub-dataset's center
    angle as its representative viewpoint, so results are a pure function of
    (policy, config).
    """
    return _evaluate(policy, data_cfg, delta, swapped=True)


def evaluate_in_distribution(
    policy: LinearPolicy, data_cfg: SimConfig, delta: float = DEFAULT_SUCCESS_TOLERANCE
) -> EvalResult:
    """Score the policy on the training pairings; shortcut_degree is 0 by construction."""
    return _evaluate(policy, data_cfg, delta, swapped=False)


# ---------------------------------------------------------------------------
# Knob sweeps
# ---------------------------------------------------------------------------

SWEEP_KNOBS = (
    "viewpoint_radius",
    "viewpoint_center_distance",
    "positions_per_subdataset",
    "layout",
    "per_task_viewpoints",
)


def _config_for(base: SimConfig, knob: str, value) -> SimConfig:
    if knob == "viewpoint_radius":
        return replace(base, viewpoint_radius=float(value))
    if knob == "viewpoint_center_distance":
        if base.m != 2:
            raise ValidationError("viewpoint_center_distance sweep needs m = 2")
        mid = sum(base.viewpoint_centers) / 2.0
        d = float(value)
        if d < 0.0:
            raise ValidationError(f"center distance must be >= 0, got {d}")
        return replace(base, viewpoint_centers=(mid - d / 2.0, mid + d / 2.0))
    if knob == "positions_per_subdataset":
        return replace(base, positions_per_subdataset=int(value))
    if knob == "layout":
        return replace(base, layout=str(value))
    if knob == "per_task_viewpoints":
        return replace(base, per_task_viewpoints=bool(value))
    raise ValidationError(f"unknown sweep knob {knob!r}; supported: {', '.join(SWEEP_KNOBS)}")


@dataclass(frozen=True)
class SweepRow:
    knob_value: object
    ood_success: float
    shortcut_degree: float
    weight_ratio: float
    seed: int


@dataclass(frozen=True)
class SweepTable:
    knob: str
    rows: tuple[SweepRow, ...]
    ridge_lambda: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "knob": self.knob,
            "lambda": self.ridge_lambda,
            "delta": self.delta,
            "rows": [
                {
                    "knob_value": r.knob_value,
                    "ood_success": r.ood_success,
                    "shortcut_degree": r.shortcut_degree,
                    "weight_ratio": r.weight_ratio,
                    "seed": r.seed,
                }
                for r in self.rows
            ],
        }

    def to_csv_rows(self) -> list[list[str]]:
        out = [["knob_value", "ood_success", "shortcut_degree", "weight_ratio", "seed"]]
        for r in self.rows:
            out.append(
                [
                    str(r.knob_value),
                    repr(r.ood_success),
                    repr(r.shortcut_degree),
                    repr(r.weight_ratio),
                    str(r.seed),
                ]
            )
        return out


def sweep(
    base_cfg: SimConfig,
    knob: str,
    values: Sequence,
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
    delta: float = DEFAULT_SUCCESS_TOLERANCE,
) -> SweepTable:
    """Generate, fit and OOD-evaluate one configuration per knob value."""
    if len(values) == 0:
        raise ValidationError("sweep needs at least one knob value")
    rows = []
    for value in values:
        cfg = _config_for(base_cfg, knob, value)
        data = generate_dataset(cfg)
        policy = fit_ridge(data, ridge_lambda)
        result = evaluate_ood(policy, cfg, delta)
        rows.append(
            SweepRow(
                knob_value=value,
                ood_success=result.ood_success_rate,
                shortcut_degree=result.shortcut_degree,
                weight_ratio=policy.weight_ratio,
                seed=cfg.seed,
            )
        )
    return SweepTable(knob=knob, rows=tuple(rows), ridge_lambda=ridge_lambda, delta=delta)
