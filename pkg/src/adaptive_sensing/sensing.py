"""Measurement function: analog scene + sensor option -> digital observation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import AnalogScene, ModalityWeights, Observation, SensorOption, SpecError
from .seeding import MASK64, generator

EXPOSURE = "exposure"  # option axes: (log2 exposure in stops, gain, ...)
RANGE = "range"        # option axes: (half-width of the captured range, ...)


@dataclass(frozen=True)
class CaptureModel:
    """Parameters of the capture pipeline.

    sigma0 is the base read noise in normalized output units, gain_noise the
    extra noise per unit of gain above 1, blur the moving-average width.
    """

    sigma0: float = 0.0
    gain_noise: float = 0.0
    blur: int = 1
    response: str = EXPOSURE

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 >= 0):
            raise SpecError("sigma0 must be finite and >= 0")
        if not (math.isfinite(self.gain_noise) and self.gain_noise >= 0):
            raise SpecError("gain_noise must be finite and >= 0")
        if int(self.blur) != self.blur or self.blur < 1 or self.blur % 2 == 0:
            raise SpecError("blur width must be an odd integer >= 1")
        if self.response not in (EXPOSURE, RANGE):
            raise SpecError(f"unknown response {self.response!r}")

    def transfer(self, option: SensorOption) -> tuple[float, float, float]:
        """(scale, offset, effective gain) applied to the analog signal."""
        vals = option.values
        if not all(math.isfinite(v) for v in vals):
            raise SpecError("invalid option")
        if self.response == EXPOSURE:
            stops = vals[0]
            gain = vals[1] if len(vals) > 1 else 1.0
            if gain < 0:
                raise SpecError("invalid option: negative gain")
            return 2.0 ** stops * gain, 0.0, gain
        half = vals[0]
        if half <= 0:
            raise SpecError("invalid option: range must be positive")
        # maps [0.5 - half, 0.5 + half] onto [0, 1]
        scale = 1.0 / (2.0 * half)
        return scale, 0.5 - 0.5 * scale, scale

    def noise_sigma(self, gain: float) -> float:
        return self.sigma0 + self.gain_noise * max(gain - 1.0, 0.0)

    def pre_quantization(self, x: np.ndarray, option: SensorOption, seed: int) -> np.ndarray:
        """The value fed to clip+quantize; used to reconstruct clip flags."""
        scale, offset, gain = self.transfer(option)
        noise = _noise(x.size, self.noise_sigma(gain), seed)
        y = x * scale + offset + noise
        if self.blur > 1:
            h = self.blur // 2
            c = np.concatenate(([0.0], np.cumsum(y)))
            idx = np.arange(y.size)
            lo, hi = np.maximum(idx - h, 0), np.minimum(idx + h + 1, y.size)
            y = (c[hi] - c[lo]) / (hi - lo)
        return y


def _noise(n: int, sigma: float, seed: int) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(n)
    return generator(seed).normal(0.0, sigma, size=n)


def measure(
    scene: AnalogScene,
    option: SensorOption,
    model: CaptureModel,
    seed: int,
    modality: str = "visual",
) -> Observation:
    """Capture one modality of ``scene`` under ``option``.

    Per element: y = x * scale + noise, moving-average blur, clip to [0, 1]
    and round to the nearest of 256 levels. For the exposure response
    scale = 2**stops * gain; noise has sigma0 + gain_noise * max(gain - 1, 0).
    """
    x = scene[modality]
    scale, offset, gain = model.transfer(option)
    noise = _noise(x.size, model.noise_sigma(gain), seed)
    q, flags = _kernels.capture(x, scale, offset, noise, model.blur)
    return Observation((q,), (flags,), option, (modality,))


def measure_multi(
    scene: AnalogScene | Sequence[AnalogScene],
    options: Sequence[SensorOption],
    weights: ModalityWeights,
    models: Sequence[CaptureModel],
    seed: int,
    modalities: Sequence[str] | None = None,
) -> Observation:
    """Measure each modality independently and fuse with modality weights.

    Modality n uses seed + n. The fused feature vector is the concatenation of
    the parts, each multiplied by its weight; parts themselves stay on the
    8-bit grid.
    """
    if isinstance(scene, AnalogScene):
        names = tuple(modalities) if modalities is not None else scene.modalities
        scenes = [scene] * len(names)
    else:
        scenes = list(scene)
        names = tuple(modalities) if modalities is not None else tuple(
            s.modalities[0] for s in scenes)
    n = len(names)
    if not (len(scenes) == len(options) == len(models) == len(weights) == n):
        raise SpecError("modality count mismatch")
    parts, flags = [], []
    for i, (sc, opt, cm, name) in enumerate(zip(scenes, options, models, names)):
        obs = measure(sc, opt, cm, (seed + i) & MASK64, modality=name)
        parts.append(obs.parts[0])
        flags.append(obs.clip_flags[0])
    return Observation(tuple(parts), tuple(flags), tuple(options), names, weights)


def decode_range(obs: Observation, modality: str | None = None) -> np.ndarray:
    """Map a range-response capture back to centered scene units (x - 0.5).

    Clipped elements decode to the edge of the captured range.
    """
    name = modality or obs.modalities[0]
    half = obs.option_for(name).values[0]
    return (obs.part(name) - 0.5) * 2.0 * half
