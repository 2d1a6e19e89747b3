"""Domain types shared by every module.

All types are immutable after construction. Arrays held by them are copied and
flagged read-only so value objects can be shared across episode workers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

LEVELS = 255  # 8-bit quantization: values live on {0, 1/255, ..., 255/255}


class SpecError(ValueError):
    """Raised when an argument violates a documented precondition."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# option space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    name: str
    lower: float
    upper: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise SpecError(f"axis {self.name!r}: bounds must be finite")
        if not self.lower < self.upper:
            raise SpecError(f"axis {self.name!r}: lower must be < upper")
        if int(self.steps) != self.steps or self.steps < 1:
            raise SpecError(f"axis {self.name!r}: step count must be >= 1")

    def value(self, i: int) -> float:
        if self.steps == 1:
            return float(self.lower)
        if i == self.steps - 1:
            return float(self.upper)  # rounding could otherwise overshoot the bound
        v = self.lower + i * (self.upper - self.lower) / (self.steps - 1)
        return min(max(v, self.lower), self.upper)

    def values(self) -> list[float]:
        return [self.value(i) for i in range(self.steps)]


@dataclass(frozen=True)
class SensorOption:
    """One point of the sensing-parameter space."""

    values: tuple[float, ...]
    axis_index: tuple[int, ...] | None = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise SpecError("option needs at least one parameter")
        if not all(math.isfinite(v) for v in vals):
            raise SpecError("invalid option: non-finite value")
        object.__setattr__(self, "values", vals)
        if self.axis_index is not None:
            idx = tuple(int(i) for i in self.axis_index)
            if len(idx) != len(vals):
                raise SpecError("axis_index length must match values")
            object.__setattr__(self, "axis_index", idx)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


@dataclass(frozen=True)
class OptionSpace:
    """Finite rectangular grid over p sensing parameters (row-major order)."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes)
        if not axes:
            raise SpecError("option space needs at least one axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_axes(cls, *axes) -> "OptionSpace":
        return cls(tuple(Axis(*a) for a in axes))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.steps for a in self.axes)

    @property
    def total_size(self) -> int:
        return math.prod(self.shape)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def axis_position(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SpecError(f"option space has no axis {name!r}") from None

    def option(self, flat_index: int) -> SensorOption:
        if not 0 <= flat_index < self.total_size:
            raise SpecError(f"option index {flat_index} out of range")
        if self.total_size <= _OPTION_CACHE_LIMIT:
            return _grid_options(self)[int(flat_index)]
        return self._build_option(int(flat_index))

    def _build_option(self, flat_index: int) -> SensorOption:
        idx = tuple(int(i) for i in np.unravel_index(flat_index, self.shape))
        return SensorOption(tuple(a.value(i) for a, i in zip(self.axes, idx)), idx)

    def index_of(self, option: SensorOption) -> int:
        """Flat grid index of an on-grid option."""
        if option.axis_index is not None:
            return int(np.ravel_multi_index(option.axis_index, self.shape))
        idx = []
        for a, v in zip(self.axes, option.values):
            vals = np.array(a.values())
            j = int(np.argmin(np.abs(vals - v)))
            if vals[j] != v:
                raise SpecError(f"value {v} is not on axis {a.name!r}")
            idx.append(j)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def contains(self, option: SensorOption) -> bool:
        if len(option) != self.dim:
            return False
        return all(a.lower <= v <= a.upper for a, v in zip(self.axes, option.values))

    def nearest(self, values: Sequence[float]) -> SensorOption:
        idx = []
        for a, v in zip(self.axes, values):
            idx.append(int(np.argmin(np.abs(np.array(a.values()) - v))))
        return self.option(int(np.ravel_multi_index(tuple(idx), self.shape)))

    def __iter__(self) -> Iterator[SensorOption]:
        return iter(option_space_enumerate(self))


_OPTION_CACHE_LIMIT = 4096


@functools.lru_cache(maxsize=64)
def _grid_options(space: OptionSpace) -> tuple[SensorOption, ...]:
    return tuple(space._build_option(i) for i in range(space.total_size))


def option_space_enumerate(space: OptionSpace) -> list[SensorOption]:
    """All grid options in stable row-major order (last axis fastest)."""
    return [space.option(i) for i in range(space.total_size)]


# ---------------------------------------------------------------------------
# modality weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModalityWeights:
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w:
            raise SpecError("no modalities")
        if any(not (0.0 <= x <= 1.0) for x in w):
            raise SpecError("modality weights must lie in [0, 1]")
        if abs(math.fsum(w) - 1.0) > 1e-9:
            raise SpecError("modality weights must sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "ModalityWeights":
        return cls((1.0 / n,) * n)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> float:
        return self.weights[i]


def weights_project(raw: Sequence[float]) -> ModalityWeights:
    """Clamp negatives to zero and renormalize onto the simplex.

    A zero clamped sum falls back to uniform weights.
    """
    r = np.asarray(raw, dtype=float).ravel()
    n = r.size
    if n == 0:
        raise SpecError("no modalities")
    if not np.all(np.isfinite(r)):
        raise SpecError("modality weights must be finite")
    r = np.maximum(r, 0.0)
    peak = r.max()
    if peak <= 0.0:
        return ModalityWeights.uniform(n)
    r = r / peak  # sum stays in [1, n]; no overflow for huge inputs
    w = r / r.sum()
    return ModalityWeights(tuple(w.tolist()))


# ---------------------------------------------------------------------------
# scenes and observations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnalogScene:
    """Latent pre-capture signal, one feature vector per modality."""

    features: Mapping[str, np.ndarray]
    context: Mapping[str, float] = field(default_factory=dict)
    label: int | None = None

    def __post_init__(self):
        feats = {}
        for name, vec in self.features.items():
            arr = _frozen(vec).ravel()
            if arr.size == 0:
                raise SpecError(f"modality {name!r} has an empty feature vector")
            feats[name] = arr
        if not feats:
            raise SpecError("scene needs at least one modality")
        ctx = {k: float(v) for k, v in self.context.items()}
        if not all(math.isfinite(v) for v in ctx.values()):
            raise SpecError("scene context must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "context", ctx)

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(self.features)

    def __getitem__(self, modality: str) -> np.ndarray:
        try:
            return self.features[modality]
        except KeyError:
            raise SpecError(f"scene has no {modality!r} modality") from None

    def __eq__(self, other):
        if not isinstance(other, AnalogScene):
            return NotImplemented
        return (
            self.modalities == other.modalities
            and all(np.array_equal(self[m], other[m]) for m in self.modalities)
            and self.context == other.context
            and self.label == other.label
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Observation:
    """Digitized measurement; each part is on the 256-level grid in [0, 1].

    ``features`` is what a perception model consumes: the parts concatenated,
    each scaled by its modality weight when weights are present.
    """

    parts: tuple[np.ndarray, ...]
    clip_flags: tuple[np.ndarray, ...]
    capturing_option: SensorOption | tuple[SensorOption, ...]
    modalities: tuple[str, ...] = ("visual",)
    weights: ModalityWeights | None = None

    def __post_init__(self):
        parts = tuple(_frozen(p).ravel() for p in self.parts)
        flags = tuple(_frozen(f, dtype=bool).ravel() for f in self.clip_flags)
        if len(parts) != len(flags) or len(parts) != len(self.modalities):
            raise SpecError("observation parts, flags and modality names must align")
        if any(p.shape != f.shape for p, f in zip(parts, flags)):
            raise SpecError("clip flags must match their part's shape")
        if self.weights is not None and len(self.weights) != len(parts):
            raise SpecError("modality count mismatch between weights and parts")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "clip_flags", flags)
        object.__setattr__(self, "modalities", tuple(self.modalities))

    def part(self, modality: str) -> np.ndarray:
        try:
            return self.parts[self.modalities.index(modality)]
        except ValueError:
            raise SpecError(f"observation has no {modality!r} modality") from None

    def flags(self, modality: str) -> np.ndarray:
        try:
            return self.clip_flags[self.modalities.index(modality)]
        except ValueError:
            raise SpecError(f"observation has no {modality!r} modality") from None

    def option_for(self, modality: str) -> SensorOption:
        if isinstance(self.capturing_option, SensorOption):
            return self.capturing_option
        return self.capturing_option[self.modalities.index(modality)]

    @property
    def values(self) -> np.ndarray:
        """Unweighted concatenation of the parts (all on the 8-bit grid)."""
        return np.concatenate(self.parts)

    @property
    def features(self) -> np.ndarray:
        if self.weights is None:
            return self.values
        return np.concatenate([w * p for w, p in zip(self.weights.weights, self.parts)])

    @property
    def clipped_fraction(self) -> float:
        flags = np.concatenate(self.clip_flags)
        return float(flags.mean())

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.modalities == other.modalities
            and self.capturing_option == other.capturing_option
            and self.weights == other.weights
            and all(np.array_equal(a, b) for a, b in zip(self.parts, other.parts))
            and all(np.array_equal(a, b) for a, b in zip(self.clip_flags, other.clip_flags))
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# quality, reward, trajectories
# ---------------------------------------------------------------------------

MAX_CONFIDENCE = "max-confidence"
GRIP = "grip"
VISUAL_ALIGNMENT = "visual-alignment"


@dataclass(frozen=True)
class QualityScore:
    value: float
    metric_id: str = MAX_CONFIDENCE

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0):
            raise SpecError(f"quality {v} outside [0, 1]")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class RewardBreakdown:
    task: float
    quality_terms: tuple[tuple[str, float, float], ...] = ()
    total: float = math.nan

    @staticmethod
    def sum_terms(task: float, quality_terms) -> float:
        # Fixed left-to-right order; a zero lambda leaves task bit-identical.
        total = float(task)
        for _, lam, q in quality_terms:
            total += lam * q
        return total

    def recompute(self) -> float:
        return self.sum_terms(self.task, self.quality_terms)


@dataclass(frozen=True)
class StepRecord:
    step: int
    observation: Observation
    option: SensorOption | tuple[SensorOption, ...]
    reward: RewardBreakdown
    qualities: tuple[QualityScore, ...] = ()
    action: int | None = None
    weights: ModalityWeights | None = None
    option_index: int | tuple[int, ...] | None = None
    correct: bool | None = None
    done: bool = False


@dataclass
class Trajectory:
    seed: int
    steps: list[StepRecord] = field(default_factory=list)
    initial_observation: Observation | None = None
    info: dict = field(default_factory=dict)

    def append(self, record: StepRecord) -> None:
        expected = len(self.steps)
        if record.step != expected:
            raise SpecError(f"step index {record.step} breaks sequence (expected {expected})")
        self.steps.append(record)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def total_return(self) -> float:
        return float(sum(s.reward.total for s in self.steps))

    @property
    def task_return(self) -> float:
        return float(sum(s.reward.task for s in self.steps))

    @property
    def observations(self) -> list[Observation]:
        return [s.observation for s in self.steps]

    def mean_quality(self, metric_id: str | None = None) -> float:
        vals = [
            q.value for s in self.steps for q in s.qualities
            if metric_id is None or q.metric_id == metric_id
        ]
        return float(np.mean(vals)) if vals else math.nan


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.9
    alpha: float = 0.1
    epsilon: float = 0.1
    k: int = 8
    buckets: int = 4
    tau: float = 1.0
    alpha_schedule: str = "constant"  # or "inverse-visits"
    initial_value: float = 0.0  # starting table entries; > 0 is optimistic

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise SpecError("gamma must lie in [0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise SpecError("alpha must lie in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise SpecError("epsilon must lie in [0, 1]")
        if int(self.k) != self.k or self.k < 1:
            raise SpecError("k must be an integer >= 1")
        if int(self.buckets) != self.buckets or self.buckets < 1:
            raise SpecError("buckets must be an integer >= 1")
        if not math.isfinite(self.tau):
            raise SpecError("tau must be finite")
        if self.alpha_schedule not in ("constant", "inverse-visits"):
            raise SpecError("alpha_schedule must be 'constant' or 'inverse-visits'")
        if not math.isfinite(self.initial_value):
            raise SpecError("initial_value must be finite")
