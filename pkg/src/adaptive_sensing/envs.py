"""Synthetic environments.

Four kinds share one functional interface: ``env_reset(spec, seed)`` and
``env_step(state, action, seed)``. States are immutable; stepping returns a
new one.

scene-classification
    One labelled scene per episode. Features are a class prototype scaled by
    2**L under lighting L ~ U[-3, 3] stops plus N(0, 0.02) analog noise.
drifting-perception
    A new labelled scene every step; lighting follows a random walk with
    N(0, 0.5) increments clamped to [-4, 4] stops.
balance
    Linearized cart-pole (Euler, dt = 0.02) with process noise N(0, 0.01);
    actions push the cart with -10 N / +10 N. Fails when |theta| > 0.21 rad.
    The analog scene is 0.5 + x / (2 * nominal) per state variable; it is
    read by a range sensor whose option is the half-width r of the window
    captured around 0.5.
grip
    Bottle-cap turning. Latent cap angle phi and grip engagement g; actions
    turn / regrip / release. Turning advances phi by 0.25 * g and loosens the
    grip; the cap is spring-loaded and slides back by 25% on any step ending
    with g below 0.3. Success (reward 1, episode ends) once phi reaches the
    threshold. Tactile and visual modalities.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .core import (
    MAX_CONFIDENCE,
    AnalogScene,
    Observation,
    OptionSpace,
    QualityScore,
    SensorOption,
    SpecError,
)
from .perception import PerceptionModel, softmax, train_perception
from .seeding import derive_seed, generator
from .sensing import EXPOSURE, RANGE, CaptureModel, decode_range, measure

SCENE = "scene-classification"
DRIFTING = "drifting-perception"
BALANCE = "balance"
GRIP = "grip"
KINDS = (SCENE, DRIFTING, BALANCE, GRIP)
PERCEPTION_KINDS = (SCENE, DRIFTING)

TURN, REGRIP, RELEASE = 0, 1, 2

DEFAULTS: dict[str, dict[str, float]] = {
    SCENE: dict(n_classes=4, dim=16, lighting_low=-3.0, lighting_high=3.0,
                analog_noise=0.02, proto_low=0.2, proto_high=1.0),
    DRIFTING: dict(n_classes=4, dim=16, lighting_low=-3.0, lighting_high=3.0,
                   analog_noise=0.02, proto_low=0.2, proto_high=1.0,
                   lighting_step=0.5, lighting_clamp=4.0),
    BALANCE: dict(dt=0.02, force=10.0, init_range=0.05, fail_angle=0.21,
                  process_noise=0.01, gravity=9.8, cart_mass=1.0, pole_mass=0.1,
                  pole_length=0.5, nominal_x=2.4, nominal_v=2.0, nominal_theta=0.21,
                  nominal_omega=1.5),
    GRIP: dict(threshold=1.0, turn_step=0.25, slip=0.3, regrip_low=0.5, spring=0.25, hold=0.3,
               tactile_dim=8, visual_dim=8, visual_classes=4, sector=0.1,
               contact_width=2.0, analog_noise=0.01),
}


@dataclass(frozen=True)
class EnvSpec:
    kind: str
    horizon: int
    action_count: int
    modalities: tuple[str, ...]
    option_spaces: tuple[OptionSpace, ...]
    capture_models: tuple[CaptureModel, ...]
    fixed_options: tuple[int, ...]
    params: tuple[tuple[str, float], ...] = ()
    family_seed: int = 0
    ignore_actions: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown environment kind {self.kind!r}")
        if self.horizon < 1:
            raise SpecError("horizon must be >= 1")
        n = len(self.modalities)
        if not (len(self.option_spaces) == len(self.capture_models) == len(self.fixed_options) == n):
            raise SpecError("per-modality option spaces, capture models and fixed options must align")
        if self.kind in PERCEPTION_KINDS and self.action_count != 0 and not self.ignore_actions:
            raise SpecError("perception-only kinds have no actions")
        if self.kind not in PERCEPTION_KINDS and self.action_count < 1:
            raise SpecError(f"{self.kind} needs at least one action")
        if self.kind == SCENE and self.horizon != 1:
            raise SpecError("scene-classification episodes have horizon 1")
        for space, fixed in zip(self.option_spaces, self.fixed_options):
            if not 0 <= fixed < space.total_size:
                raise SpecError("fixed option index out of range")
        unknown = set(dict(self.params)) - set(DEFAULTS[self.kind])
        if unknown:
            raise SpecError(f"unknown parameters for {self.kind}: {sorted(unknown)}")

    def param(self, name: str) -> float:
        return self._param_table[name]

    @functools.cached_property
    def _param_table(self) -> dict[str, float]:
        return {**DEFAULTS[self.kind], **dict(self.params)}

    @property
    def has_actions(self) -> bool:
        return self.action_count > 0

    @property
    def n_modalities(self) -> int:
        return len(self.modalities)

    @property
    def fixed_option(self) -> SensorOption:
        return self.option_spaces[0].option(self.fixed_options[0])

    def space(self, modality: str | int = 0) -> OptionSpace:
        if isinstance(modality, str):
            modality = self.modalities.index(modality)
        return self.option_spaces[modality]


def _params(kind: str, overrides: dict[str, Any]) -> tuple[tuple[str, float], ...]:
    unknown = set(overrides) - set(DEFAULTS[kind])
    if unknown:
        raise SpecError(f"unknown parameters for {kind}: {sorted(unknown)}")
    return tuple(sorted((k, float(v)) for k, v in overrides.items()))


def camera_space(stop_steps: int = 5, gain_steps: int = 5, stops=(-4.0, 4.0),
                 gains=(1.0, 4.0)) -> OptionSpace:
    return OptionSpace.from_axes(("stops", *stops, stop_steps), ("gain", *gains, gain_steps))


def scene_classification_spec(space: OptionSpace | None = None,
                              capture: CaptureModel | None = None,
                              fixed: SensorOption | tuple | None = None,
                              family_seed: int = 0, **params) -> EnvSpec:
    """Single-shot classification; nominal fixed option is 0 stops, gain 1."""
    space = space or camera_space()
    capture = capture or CaptureModel(sigma0=0.12, gain_noise=0.01, blur=1)
    fixed_idx = space.index_of(space.nearest(fixed if fixed is not None else (0.0, 1.0)))
    return EnvSpec(SCENE, 1, 0, ("visual",), (space,), (capture,), (fixed_idx,),
                   _params(SCENE, params), family_seed)


def drifting_perception_spec(space: OptionSpace | None = None,
                             capture: CaptureModel | None = None,
                             fixed: SensorOption | tuple | None = None,
                             horizon: int = 50, family_seed: int = 0, **params) -> EnvSpec:
    space = space or camera_space()
    capture = capture or CaptureModel(sigma0=0.12, gain_noise=0.01, blur=1)
    fixed_idx = space.index_of(space.nearest(fixed if fixed is not None else (0.0, 1.0)))
    return EnvSpec(DRIFTING, horizon, 0, ("visual",), (space,), (capture,), (fixed_idx,),
                   _params(DRIFTING, params), family_seed)


def balance_spec(space: OptionSpace | None = None, capture: CaptureModel | None = None,
                 fixed: float | None = None, horizon: int = 200, family_seed: int = 0,
                 **params) -> EnvSpec:
    """Range sensor: option = half-width r of the window around the nominal centre."""
    space = space or OptionSpace.from_axes(("range", 0.01, 0.21, 5))
    capture = capture or CaptureModel(sigma0=0.03, gain_noise=0.002, blur=1, response=RANGE)
    fixed_idx = space.index_of(space.nearest((fixed if fixed is not None else 0.5,)))
    return EnvSpec(BALANCE, horizon, 2, ("state",), (space,), (capture,), (fixed_idx,),
                   _params(BALANCE, params), family_seed)


def grip_spec(tactile_space: OptionSpace | None = None, visual_space: OptionSpace | None = None,
              horizon: int = 60, family_seed: int = 0, **params) -> EnvSpec:
    """Tactile option axes (stops, gain, threshold); visual axes (stops, gain)."""
    tact = tactile_space or OptionSpace.from_axes(
        ("stops", -1.0, 1.0, 3), ("gain", 1.0, 2.0, 2), ("threshold", 0.1, 0.3, 2))
    vis = visual_space or OptionSpace.from_axes(("stops", -1.0, 1.0, 3), ("gain", 1.0, 2.0, 2))
    models = (CaptureModel(sigma0=0.01, blur=1), CaptureModel(sigma0=0.02, blur=1))
    fixed = (tact.index_of(tact.nearest((0.0, 1.0, 0.1))), vis.index_of(vis.nearest((0.0, 1.0))))
    return EnvSpec(GRIP, horizon, 3, ("tactile", "visual"), (tact, vis), models, fixed,
                   _params(GRIP, params), family_seed)


def make_spec(kind: str, **kwargs) -> EnvSpec:
    factory = {SCENE: scene_classification_spec, DRIFTING: drifting_perception_spec,
               BALANCE: balance_spec, GRIP: grip_spec}.get(kind)
    if factory is None:
        raise SpecError(f"unknown environment kind {kind!r}")
    return factory(**kwargs)


def with_ignored_actions(spec: EnvSpec, n_actions: int = 1) -> EnvSpec:
    """Perception-only spec that accepts (and discards) action indices.

    Lets the conventional loop run on an action-free process.
    """
    if spec.kind not in PERCEPTION_KINDS:
        raise SpecError("only perception-only kinds can ignore actions")
    return replace(spec, action_count=n_actions, ignore_actions=True)


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnvState:
    spec: EnvSpec
    t: int
    latent: tuple[float, ...]
    label: int | None = None
    done: bool = False
    extra: dict = field(default_factory=dict)


@functools.lru_cache(maxsize=32)
def prototypes(n_classes: int, dim: int, low: float, high: float, family_seed: int) -> np.ndarray:
    protos = generator(derive_seed(family_seed, 0x70)).uniform(low, high, size=(n_classes, dim))
    protos.setflags(write=False)
    return protos


def _spec_prototypes(spec: EnvSpec) -> np.ndarray:
    return prototypes(int(spec.param("n_classes")), int(spec.param("dim")),
                      spec.param("proto_low"), spec.param("proto_high"), spec.family_seed)


def _classification_scene(spec: EnvSpec, lighting: float, label: int, rng) -> AnalogScene:
    proto = _spec_prototypes(spec)[label]
    x = proto * 2.0 ** lighting + rng.normal(0.0, spec.param("analog_noise"), size=proto.size)
    return AnalogScene({"visual": x}, {"lighting": lighting}, label)


def env_reset(spec: EnvSpec, seed: int) -> tuple[EnvState, AnalogScene]:
    if not isinstance(spec, EnvSpec):
        raise SpecError("env_reset needs an EnvSpec")
    rng = generator(seed)
    if spec.kind in PERCEPTION_KINDS:
        lighting = rng.uniform(spec.param("lighting_low"), spec.param("lighting_high"))
        label = int(rng.integers(int(spec.param("n_classes"))))
        scene = _classification_scene(spec, lighting, label, rng)
        return EnvState(spec, 0, (lighting,), label), scene
    if spec.kind == BALANCE:
        r = spec.param("init_range")
        x = tuple(float(v) for v in rng.uniform(-r, r, size=4))
        return EnvState(spec, 0, x), balance_scene(spec, x)
    phi, g = 0.0, 0.0
    return EnvState(spec, 0, (phi, g)), grip_scene(spec, phi, g, rng)


def env_step(state: EnvState, action: int | None, seed: int):
    """Advance one step: (next state, analog scene, task reward, done)."""
    spec = state.spec
    if state.done:
        raise SpecError("episode already finished")
    if spec.kind in PERCEPTION_KINDS:
        if spec.ignore_actions:
            if action is not None and not 0 <= action < spec.action_count:
                raise SpecError("action index out of range")
        elif action is not None:
            raise SpecError(f"{spec.kind} takes no actions")
        return _perception_step(state, seed)
    if action is None or not 0 <= action < spec.action_count:
        raise SpecError(f"{spec.kind} needs an action in [0, {spec.action_count})")
    if spec.kind == BALANCE:
        return _balance_step(state, action, seed)
    return _grip_step(state, action, seed)


def _perception_step(state: EnvState, seed: int):
    spec = state.spec
    rng = generator(seed)
    lighting = state.latent[0]
    if spec.kind == DRIFTING:
        c = spec.param("lighting_clamp")
        lighting = float(np.clip(lighting + rng.normal(0.0, spec.param("lighting_step")), -c, c))
    else:
        lighting = rng.uniform(spec.param("lighting_low"), spec.param("lighting_high"))
    label = int(rng.integers(int(spec.param("n_classes"))))
    scene = _classification_scene(spec, lighting, label, rng)
    t = state.t + 1
    done = t >= spec.horizon
    # Correctness of a designated classifier is scored by the loop, which owns the model.
    return EnvState(spec, t, (lighting,), label, done), scene, 0.0, done


# ---------------------------------------------------------------------------
# balance
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def balance_matrices(params: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Euler-discretized linearization of the cart-pole about upright.

    State (x, x_dot, theta, theta_dot); B is the response to one unit of force
    direction (+1 pushes the cart toward +x).
    """
    p = {**DEFAULTS[BALANCE], **dict(params)}
    g, mc, mp, l = p["gravity"], p["cart_mass"], p["pole_mass"], p["pole_length"]
    dt, force = p["dt"], p["force"]
    total = mc + mp
    den = l * (4.0 / 3.0 - mp / total)
    Ac = np.zeros((4, 4))
    Ac[0, 1] = 1.0
    Ac[2, 3] = 1.0
    Ac[3, 2] = g / den
    Ac[1, 2] = -mp * l * (g / den) / total
    Bc = np.zeros(4)
    Bc[3] = -1.0 / (total * den)
    Bc[1] = 1.0 / total + mp * l / (total * total * den)
    A = np.eye(4) + dt * Ac
    B = dt * force * Bc
    A.setflags(write=False)
    B.setflags(write=False)
    return A, B


def balance_nominal(spec: EnvSpec) -> np.ndarray:
    return np.array([spec.param("nominal_x"), spec.param("nominal_v"),
                     spec.param("nominal_theta"), spec.param("nominal_omega")])


def balance_scene(spec: EnvSpec, x) -> AnalogScene:
    return AnalogScene({"state": 0.5 + np.asarray(x) / (2.0 * balance_nominal(spec))})


def _balance_step(state: EnvState, action: int, seed: int):
    spec = state.spec
    A, B = balance_matrices(spec.params)
    u = -1.0 if action == 0 else 1.0
    noise = generator(seed).normal(0.0, spec.param("process_noise"), size=4)
    x = A @ np.asarray(state.latent) + B * u + noise
    t = state.t + 1
    fell = abs(x[2]) > spec.param("fail_angle")
    done = fell or t >= spec.horizon
    reward = 0.0 if fell else 1.0
    nxt = EnvState(spec, t, tuple(float(v) for v in x), None, done, {"fell": fell})
    return nxt, balance_scene(spec, x), reward, done


def balance_obs_bucket(spec: EnvSpec, obs: Observation) -> int:
    """Which way the pole is falling, from the decoded capture: the sign of
    theta + 0.1 * theta_dot in physical units (0 = toward -theta).

    A range so narrow that theta and theta_dot both clip reads back as
    +-r on each, so the verdict degrades to the sign of theta alone.
    """
    dec = decode_range(obs) * 2.0 * balance_nominal(spec)
    return int(dec[2] + 0.1 * dec[3] > 0.0)


def balance_n_obs_buckets(spec: EnvSpec) -> int:
    return 2


@functools.lru_cache(maxsize=8)
def balance_perception_model(spec: EnvSpec, n_samples: int = 2000, seed: int = 0) -> PerceptionModel:
    """Two-class "which side of the track is the cart on" classifier.

    Input is the capture decoded back to the analog scale, centred at zero.
    Trained on states visited by a stabilizing reference controller. The
    question it answers is unaffected by the balancing objective, so its
    confidence reflects how legible the capture is rather than how far the
    pole leans; a clipped capture reads back near zero and scores near 1/2.
    """
    rng = generator(derive_seed(spec.family_seed, 0xBA, seed))
    A, B = balance_matrices(spec.params)
    nominal = balance_nominal(spec)
    X, y = [], []
    x = rng.uniform(-0.05, 0.05, size=4)
    for _ in range(n_samples):
        u = 1.0 if x[2] + 0.1 * x[3] > 0 else -1.0
        x = A @ x + B * u + rng.normal(0.0, spec.param("process_noise"), size=4)
        if abs(x[2]) > spec.param("fail_angle") or rng.random() < 0.005:
            x = rng.uniform(-0.05, 0.05, size=4)
        X.append(x / (2.0 * nominal))
        y.append(int(x[0] > 0))
    data = list(zip(np.array(X), y))
    # The classes are separable, so weights grow without bound under training and
    # confidence saturates on every legible capture; stopping early keeps Q_M graded.
    return train_perception(data, 2, epochs=250, seed=seed)


def balance_quality(spec: EnvSpec, model: PerceptionModel, obs: Observation):
    """Q_M(s, o): max-confidence of the model on the range-decoded capture."""
    z = _balance_logits(model, obs)
    return QualityScore(min(float(softmax(z).max()), 1.0), MAX_CONFIDENCE)


def _balance_logits(model: PerceptionModel, obs: Observation) -> np.ndarray:
    # logits of compose_affine(model, 2r, -r) without building it every step
    half = obs.option_for("state").values[0]
    return model.weights @ (2.0 * half * obs.part("state") - half) + model.bias


# ---------------------------------------------------------------------------
# grip
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _grip_profiles(params: tuple, family_seed: int):
    p = {**DEFAULTS[GRIP], **dict(params)}
    n_t = int(p["tactile_dim"])
    i = np.arange(n_t)
    contact = np.exp(-(((i - (n_t - 1) / 2.0) / p["contact_width"]) ** 2))
    rng = generator(derive_seed(family_seed, 0x61))
    marks = rng.uniform(0.0, 1.0, size=(int(p["visual_classes"]), int(p["visual_dim"])))
    contact.setflags(write=False)
    marks.setflags(write=False)
    return contact, marks


def grip_progress(spec: EnvSpec, phi: float) -> float:
    return min(max(phi / spec.param("threshold"), 0.0), 1.0)


def grip_sector(spec: EnvSpec, phi: float) -> int:
    return int(math.floor(phi / spec.param("sector"))) % int(spec.param("visual_classes"))


def grip_scene(spec: EnvSpec, phi: float, g: float, rng) -> AnalogScene:
    """Tactile: contact profile scaled by g. Visual: the current sector's
    alignment mark blended from flat grey, sharper as phi nears threshold."""
    contact, marks = _grip_profiles(spec.params, spec.family_seed)
    p = grip_progress(spec, phi)
    noise = spec.param("analog_noise")
    tactile = contact * g + rng.normal(0.0, noise, size=contact.size)
    mark = marks[grip_sector(spec, phi)]
    visual = 0.5 + p * (mark - 0.5) + rng.normal(0.0, noise, size=mark.size)
    return AnalogScene({"tactile": tactile, "visual": visual},
                       {"phi": phi, "grip": g}, grip_sector(spec, phi))


def _grip_step(state: EnvState, action: int, seed: int):
    spec = state.spec
    rng = generator(seed)
    phi, g = state.latent
    if action == TURN:
        phi = phi + spec.param("turn_step") * g
        g = g * (1.0 - spec.param("slip"))
    elif action == REGRIP:
        g = rng.uniform(spec.param("regrip_low"), 1.0)
    else:
        g = 0.0
    if g < spec.param("hold"):
        # spring-loaded cap: without a firm hold it slides back toward closed
        phi = phi * (1.0 - spec.param("spring"))
    t = state.t + 1
    success = phi >= spec.param("threshold")
    done = success or t >= spec.horizon
    nxt = EnvState(spec, t, (phi, g), None, done, {"success": success})
    return nxt, grip_scene(spec, phi, g, rng), 1.0 if success else 0.0, done


@functools.lru_cache(maxsize=8)
def grip_visual_model(spec: EnvSpec, n_samples: int = 1500, seed: int = 0) -> PerceptionModel:
    """Sector classifier for the visual modality, trained on nominal captures."""
    rng = generator(derive_seed(spec.family_seed, 0x6B, seed))
    vis_space = spec.space("visual")
    cm = spec.capture_models[1]
    fixed = vis_space.option(spec.fixed_options[1])
    data = []
    for i in range(n_samples):
        phi = rng.uniform(0.0, spec.param("threshold"))
        scene = grip_scene(spec, phi, 0.0, rng)
        obs = measure(scene, fixed, cm, derive_seed(seed, i), modality="visual")
        data.append((obs.part("visual"), grip_sector(spec, phi)))
    return train_perception(data, int(spec.param("visual_classes")), epochs=1000,
                            seed=seed)


GRIP_CONTACT_BINS = 3
GRIP_PROGRESS_BINS = 4


def grip_obs_bucket(spec: EnvSpec, obs: Observation) -> int:
    """Contact level (3 bins) x visual contrast (4 bins)."""
    tact = obs.part("tactile")
    t_opt = obs.option_for("tactile")
    contact = float(tact.max()) / (2.0 ** t_opt.values[0] * t_opt.values[1])
    b_contact = int(np.searchsorted([0.25, 0.6], contact, side="right"))
    vis = obs.part("visual")
    v_opt = obs.option_for("visual")
    contrast = float(np.std(vis)) / (2.0 ** v_opt.values[0] * v_opt.values[1])
    _, marks = _grip_profiles(spec.params, spec.family_seed)
    full = float(np.mean(np.std(marks, axis=1)))
    progress = contrast / full
    b_prog = min(int(progress * GRIP_PROGRESS_BINS), GRIP_PROGRESS_BINS - 1)
    return b_contact * GRIP_PROGRESS_BINS + b_prog


def grip_n_obs_buckets(spec: EnvSpec) -> int:
    return GRIP_CONTACT_BINS * GRIP_PROGRESS_BINS


@functools.lru_cache(maxsize=8)
def scene_perception_model(spec: EnvSpec, n_samples: int = 3000, seed: int = 0) -> PerceptionModel:
    """Classifier for the classification kinds.

    Trained on scenes under random lighting captured at uniformly random grid
    options, so saturated and starved captures appear with every label and the
    model learns to be unsure about them.
    """
    if spec.kind not in PERCEPTION_KINDS:
        raise SpecError("scene perception model is for classification kinds")
    rng = generator(derive_seed(spec.family_seed, 0x5C, seed))
    space = spec.option_spaces[0]
    cm = spec.capture_models[0]
    data = []
    for i in range(n_samples):
        lighting = rng.uniform(spec.param("lighting_low"), spec.param("lighting_high"))
        label = int(rng.integers(int(spec.param("n_classes"))))
        scene = _classification_scene(spec, lighting, label, rng)
        option = space.option(int(rng.integers(space.total_size)))
        obs = measure(scene, option, cm, derive_seed(seed, 0x5D, i), modality="visual")
        data.append((obs.part("visual"), label))
    return train_perception(data, int(spec.param("n_classes")), epochs=1000,
                            seed=seed)
