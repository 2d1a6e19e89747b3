"""Experiment configuration, seeded execution, metrics files and comparisons.

Config files are UTF-8 ``key = value`` lines with dotted prefixes and ``#``
comments::

    env.kind = balance
    framework = sensorimotor
    learner.epsilon = 0.05
    reward.lambda = 0.1
    run.episodes = 100
    run.master_seed = 7

Episode i of a run uses ``episode_seed(master_seed, i)`` unless an explicit
``run.seeds`` list is given. Learning frameworks carry their policy tables
from one episode to the next, so episodes run in index order.

Metrics files start with a header that declares the row count, then a
timestamp line (the only line that differs between identical runs), then one
record per episode, then an aggregate record. A file whose row count does not
match its header is rejected on read.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import envs, loops
from .core import LearnerConfig, SpecError, Trajectory
from .policies import ActionPolicyState, SensePolicyState
from .seeding import episode_seed

FRAMEWORKS = ("conventional", "single-shot", "perception-only", "sensorimotor", "multimodal-sparse")
SENSE_MODES = ("adaptive", "fixed", "random")
FORMATS = ("csv", "jsonl")
METRICS_VERSION = 1

# which environment kinds each framework accepts
_COMPATIBLE = {
    "conventional": envs.KINDS,
    "single-shot": envs.PERCEPTION_KINDS,
    "perception-only": envs.PERCEPTION_KINDS,
    "sensorimotor": (envs.BALANCE,),
    "multimodal-sparse": (envs.GRIP,),
}


class ConfigError(SpecError):
    """Validation failure; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class MetricsError(OSError):
    """A metrics file that cannot be trusted (truncated or malformed)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


_LEARNER_KEYS = ("gamma", "alpha", "epsilon", "buckets", "tau", "alpha_schedule", "initial_value")
_ENV_KEYS = ("horizon", "family_seed")


@dataclass(frozen=True)
class ExperimentConfig:
    env_kind: str
    framework: str
    env_params: tuple[tuple[str, float], ...] = ()
    horizon: int | None = None
    family_seed: int = 0
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    sense_learner: LearnerConfig | None = None  # None: same as ``learner``
    sense_mode: str = "adaptive"
    lam: float = 0.0
    lam_tact: float = 0.0
    lam_vis: float = 0.0
    k: int = 8
    episodes: int = 1
    master_seed: int = 0
    seeds: tuple[int, ...] | None = None
    learn: bool = True
    model_seed: int = 0
    name: str | None = None
    out_dir: str | None = None  # None: $ASL_OUT_DIR, else the working directory
    format: str = "csv"

    def __post_init__(self):
        if self.env_kind not in envs.KINDS:
            raise ConfigError("env.kind", f"unknown kind {self.env_kind!r}; expected one of {envs.KINDS}")
        if self.framework not in FRAMEWORKS:
            raise ConfigError("framework", f"unknown framework {self.framework!r}; expected one of {FRAMEWORKS}")
        if self.env_kind not in _COMPATIBLE[self.framework]:
            raise ConfigError("framework", f"{self.framework} cannot run on {self.env_kind}")
        if self.sense_mode not in SENSE_MODES:
            raise ConfigError("sense.mode", f"expected one of {SENSE_MODES}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"expected one of {FORMATS}")
        if self.episodes < 1:
            raise ConfigError("run.episodes", "must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.episodes:
            raise ConfigError("run.seeds", f"lists {len(self.seeds)} seeds for {self.episodes} episodes")
        for key, lam in (("reward.lambda", self.lam), ("reward.lambda_tact", self.lam_tact),
                         ("reward.lambda_vis", self.lam_vis)):
            if not (math.isfinite(lam) and lam >= 0):
                raise ConfigError(key, "must be finite and >= 0")
        try:
            spec = self.env_spec()
        except ConfigError:
            raise
        except SpecError as exc:
            raise ConfigError("env", str(exc)) from None
        n_options = spec.option_spaces[0].total_size
        if self.k < 1 or (self.framework == "single-shot" and self.k > n_options):
            raise ConfigError("k", f"k={self.k} outside [1, {n_options}] (size of the option grid)")

    @property
    def run_name(self) -> str:
        return self.name or f"{self.framework}-{self.env_kind}"

    @property
    def sense_config(self) -> LearnerConfig:
        return self.sense_learner or self.learner

    def env_spec(self) -> envs.EnvSpec:
        kwargs: dict[str, Any] = dict(self.env_params)
        kwargs["family_seed"] = self.family_seed
        if self.horizon is not None:
            if self.env_kind == envs.SCENE:
                raise ConfigError("env.horizon", "scene-classification episodes have horizon 1")
            kwargs["horizon"] = self.horizon
        spec = envs.make_spec(self.env_kind, **kwargs)
        if self.framework == "conventional" and self.env_kind in envs.PERCEPTION_KINDS:
            spec = envs.with_ignored_actions(spec)
        return spec

    def episode_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [episode_seed(self.master_seed, i) for i in range(self.episodes)]

    def with_value(self, key: str, value: str) -> "ExperimentConfig":
        """Copy with one dotted key overridden (used by sweeps and CLI flags)."""
        entries = config_entries(self)
        if key not in entries and not _known_key(key):
            raise ConfigError(key, "unknown key")
        entries[key] = value
        return config_from_entries(entries)


def _known_key(key: str) -> bool:
    if key in _TOP_KEYS:
        return True
    section, _, name = key.partition(".")
    if section in ("learner", "sense") and name in _LEARNER_KEYS:
        return True
    return section == "env" and bool(name)


_TOP_KEYS = (
    "env.kind", "framework", "sense.mode", "reward.lambda", "reward.lambda_tact",
    "reward.lambda_vis", "k", "run.episodes", "run.master_seed", "run.seeds", "run.learn",
    "run.name", "model.seed", "out_dir", "format",
)


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _parse_number(key: str, text: str, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {text!r}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    return value


def _learner_from(section: str, entries: dict[str, str], base: LearnerConfig, k: int) -> LearnerConfig:
    values: dict[str, Any] = {}
    for name in _LEARNER_KEYS:
        key = f"{section}.{name}"
        if key not in entries:
            continue
        text = entries[key]
        if name == "alpha_schedule":
            values[name] = text.strip()
        elif name == "buckets":
            values[name] = _parse_number(key, text, int)
        else:
            values[name] = _parse_number(key, text)
    try:
        return replace(base, k=k, **values)
    except SpecError as exc:
        raise ConfigError(section, str(exc)) from None


def config_from_entries(entries: dict[str, str]) -> ExperimentConfig:
    """Build a validated config from raw ``key -> text`` entries."""
    for key in entries:
        if not _known_key(key):
            raise ConfigError(key, "unknown key")
    for required in ("env.kind", "framework"):
        if required not in entries:
            raise ConfigError(required, "missing required key")
    kind = entries["env.kind"].strip()
    if kind not in envs.KINDS:
        raise ConfigError("env.kind", f"unknown kind {kind!r}; expected one of {envs.KINDS}")

    env_params = []
    horizon, family_seed = None, 0
    for key, text in entries.items():
        section, _, name = key.partition(".")
        if section != "env" or name == "kind":
            continue
        if name == "horizon":
            horizon = _parse_number(key, text, int)
        elif name == "family_seed":
            family_seed = _parse_number(key, text, int)
        elif name in envs.DEFAULTS[kind]:
            env_params.append((name, _parse_number(key, text)))
        else:
            raise ConfigError(key, f"unknown parameter for {kind}")

    k = _parse_number("k", entries.get("k", "8"), int)
    learner = _learner_from("learner", entries, LearnerConfig(), max(k, 1))
    sense = None
    if any(key.startswith("sense.") and key != "sense.mode" for key in entries):
        sense = _learner_from("sense", entries, learner, max(k, 1))

    seeds = None
    if "run.seeds" in entries:
        seeds = tuple(_parse_number("run.seeds", s.strip(), int)
                      for s in entries["run.seeds"].split(",") if s.strip())
    episodes = _parse_number("run.episodes", entries["run.episodes"], int) \
        if "run.episodes" in entries else (len(seeds) if seeds else 1)

    return ExperimentConfig(
        env_kind=kind,
        framework=entries["framework"].strip(),
        env_params=tuple(sorted(env_params)),
        horizon=horizon,
        family_seed=family_seed,
        learner=learner,
        sense_learner=sense,
        sense_mode=entries.get("sense.mode", "adaptive").strip(),
        lam=_parse_number("reward.lambda", entries.get("reward.lambda", "0")),
        lam_tact=_parse_number("reward.lambda_tact", entries.get("reward.lambda_tact", "0")),
        lam_vis=_parse_number("reward.lambda_vis", entries.get("reward.lambda_vis", "0")),
        k=k,
        episodes=episodes,
        master_seed=_parse_number("run.master_seed", entries.get("run.master_seed", "0"), int),
        seeds=seeds,
        learn=_parse_bool("run.learn", entries.get("run.learn", "true")),
        model_seed=_parse_number("model.seed", entries.get("model.seed", "0"), int),
        name=entries["run.name"].strip() if "run.name" in entries else None,
        out_dir=entries["out_dir"].strip() if "out_dir" in entries else None,
        format=entries.get("format", "csv").strip(),
    )


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}", f"{source}: expected 'key = value'")
        if key in entries:
            raise ConfigError(key, f"{source}: duplicate key (line {lineno})")
        entries[key] = value.strip()
    return config_from_entries(entries)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Read and validate a config file. Missing files raise OSError."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, str(path))


def config_entries(config: ExperimentConfig) -> dict[str, str]:
    """Every setting as ``key -> text``, in a fixed order."""
    out = {"env.kind": config.env_kind, "framework": config.framework}
    if config.horizon is not None:
        out["env.horizon"] = str(config.horizon)
    out["env.family_seed"] = str(config.family_seed)
    for name, value in config.env_params:
        out[f"env.{name}"] = repr(value)
    for name in _LEARNER_KEYS:
        out[f"learner.{name}"] = _text(getattr(config.learner, name))
    if config.sense_learner is not None:
        for name in _LEARNER_KEYS:
            out[f"sense.{name}"] = _text(getattr(config.sense_learner, name))
    out["sense.mode"] = config.sense_mode
    out["reward.lambda"] = repr(config.lam)
    out["reward.lambda_tact"] = repr(config.lam_tact)
    out["reward.lambda_vis"] = repr(config.lam_vis)
    out["k"] = str(config.k)
    out["run.episodes"] = str(config.episodes)
    out["run.master_seed"] = str(config.master_seed)
    if config.seeds is not None:
        out["run.seeds"] = ",".join(str(s) for s in config.seeds)
    out["run.learn"] = "true" if config.learn else "false"
    if config.name is not None:
        out["run.name"] = config.name
    out["model.seed"] = str(config.model_seed)
    if config.out_dir is not None:
        out["out_dir"] = config.out_dir
    out["format"] = config.format
    return out


def _text(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_entries(config).items())


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


ROW_FIELDS = ("episode", "seed", "return", "survival", "correct", "mean_q", "success", "options")
AGGREGATED = ("return", "survival", "correct", "mean_q", "success")


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    seed: int
    ret: float
    survival: int
    correct: float | None
    mean_q: float | None
    success: float | None
    options: tuple[tuple[str, int], ...]  # (option label, steps spent there), sorted

    def value(self, metric: str) -> float | None:
        return {"return": self.ret, "survival": float(self.survival), "correct": self.correct,
                "mean_q": self.mean_q, "success": self.success}[metric]

    def as_dict(self) -> dict[str, Any]:
        return {"episode": self.episode, "seed": self.seed, "return": self.ret,
                "survival": self.survival, "correct": self.correct, "mean_q": self.mean_q,
                "success": self.success, "options": dict(self.options)}


def aggregate_rows(rows: Sequence[MetricsRow]) -> dict[str, dict[str, float]]:
    """Mean, population standard deviation and count for each metric (missing values skipped)."""
    out = {}
    for metric in AGGREGATED:
        vals = np.array([v for r in rows if (v := r.value(metric)) is not None], dtype=float)
        if vals.size:
            out[metric] = {"mean": float(vals.mean()), "std": float(vals.std()), "count": int(vals.size)}
        else:
            out[metric] = {"mean": math.nan, "std": math.nan, "count": 0}
    return out


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[MetricsRow, ...]
    aggregate: dict[str, dict[str, float]]
    name: str = ""
    path: str | None = None

    @classmethod
    def from_rows(cls, rows: Iterable[MetricsRow], name: str = "", path: str | None = None):
        rows = tuple(rows)
        return cls(rows, aggregate_rows(rows), name, path)

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(r.seed for r in self.rows)

    def column(self, metric: str) -> np.ndarray:
        return np.array([np.nan if (v := r.value(metric)) is None else v for r in self.rows])

    def mean(self, metric: str) -> float:
        return self.aggregate[metric]["mean"]


def _option_label(index) -> str:
    if isinstance(index, tuple):
        return "-".join(str(i) for i in index)
    return str(index)


def _histogram(indices) -> tuple[tuple[str, int], ...]:
    counts: dict[Any, int] = {}
    for idx in indices:
        counts[idx] = counts.get(idx, 0) + 1
    return tuple((_option_label(i), counts[i]) for i in sorted(counts))


def row_from_trajectory(episode: int, seed: int, traj: Trajectory) -> MetricsRow:
    flags = [s.correct for s in traj.steps if s.correct is not None]
    q = traj.mean_quality()
    success = traj.info.get("success") if traj.info.get("kind") == envs.GRIP else None
    return MetricsRow(
        episode, seed, traj.total_return, len(traj),
        float(np.mean(flags)) if flags else None,
        None if math.isnan(q) else q,
        None if success is None else float(success),
        _histogram(s.option_index for s in traj.steps),
    )


def row_from_selection(episode: int, seed: int, rec: loops.SelectionRecord) -> MetricsRow:
    correct = None if rec.correct is None else float(rec.correct)
    return MetricsRow(episode, seed, correct or 0.0, 1, correct, rec.quality.value, None,
                      _histogram([rec.option_index]))


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def _format_options(options) -> str:
    return ";".join(f"{k}:{v}" for k, v in options)


def _parse_options(text: str) -> tuple[tuple[str, int], ...]:
    if not text:
        return ()
    out = []
    for item in text.split(";"):
        k, _, v = item.partition(":")
        out.append((k, int(v)))
    return tuple(out)


class MetricsWriter:
    """Append-only writer: header, timestamp, rows in episode order, aggregate."""

    def __init__(self, path: str | os.PathLike, fmt: str, n_rows: int, name: str,
                 clock: Callable[[], str] | None = None):
        self.path = Path(path)
        self.fmt = fmt
        self.n_rows = n_rows
        self.rows: list[MetricsRow] = []
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        stamp = (clock or _utc_now)()
        if fmt == "csv":
            self._fh.write(f"# adaptive-sensing metrics v{METRICS_VERSION} rows={n_rows} name={name}\n")
            self._fh.write(f"# timestamp={stamp}\n")
            self._fh.write(",".join(ROW_FIELDS) + "\n")
        else:
            self._json({"type": "header", "version": METRICS_VERSION, "rows": n_rows, "name": name})
            self._json({"type": "timestamp", "timestamp": stamp})
        self._fh.flush()

    def _json(self, obj) -> None:
        self._fh.write(json.dumps(obj, sort_keys=True, allow_nan=False) + "\n")

    def append(self, row: MetricsRow) -> None:
        if row.episode != len(self.rows):
            raise SpecError("rows must be appended in episode order")
        self.rows.append(row)
        if self.fmt == "csv":
            self._fh.write(",".join((
                str(row.episode), str(row.seed), _num(row.ret), str(row.survival),
                _num(row.correct), _num(row.mean_q), _num(row.success),
                _format_options(row.options))) + "\n")
        else:
            self._json({"type": "row", **row.as_dict()})
        self._fh.flush()

    def close(self) -> dict[str, dict[str, float]]:
        agg = aggregate_rows(self.rows)
        if self.fmt == "csv":
            parts = [f"{m}.{stat}={_stat_text(agg[m][stat])}" for m in AGGREGATED
                     for stat in ("mean", "std", "count")]
            self._fh.write("# aggregate " + " ".join(parts) + "\n")
        else:
            self._json({"type": "aggregate", **{m: {s: _json_safe(v) for s, v in agg[m].items()}
                                               for m in AGGREGATED}})
        self._fh.close()
        return agg


def _stat_text(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def _json_safe(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def read_metrics(path: str | os.PathLike) -> MetricsReport:
    """Load a metrics file written by ``run_experiment``.

    Raises MetricsError when the row count disagrees with the header or the
    aggregate record is missing (an interrupted run).
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MetricsError(f"{path}: empty metrics file")
    if lines[0].startswith("#"):
        rows, declared, name, has_agg = _read_csv(path, lines)
    else:
        rows, declared, name, has_agg = _read_jsonl(path, lines)
    if len(rows) != declared:
        raise MetricsError(f"{path}: header declares {declared} rows, found {len(rows)} (truncated?)")
    if not has_agg:
        raise MetricsError(f"{path}: missing aggregate record (truncated?)")
    return MetricsReport.from_rows(rows, name, str(path))


def _read_csv(path, lines):
    head = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split() if "=" in tok)
    try:
        declared = int(head["rows"])
    except (KeyError, ValueError):
        raise MetricsError(f"{path}: bad metrics header") from None
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    has_agg = any(ln.startswith("# aggregate") for ln in lines)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    rows = []
    try:
        for rec in reader:
            rows.append(MetricsRow(
                int(rec["episode"]), int(rec["seed"]), float(rec["return"]), int(rec["survival"]),
                _opt_float(rec["correct"]), _opt_float(rec["mean_q"]), _opt_float(rec["success"]),
                _parse_options(rec["options"] or "")))
    except (KeyError, ValueError, TypeError) as exc:
        raise MetricsError(f"{path}: malformed row ({exc})") from None
    return rows, declared, head.get("name", ""), has_agg


def _read_jsonl(path, lines):
    try:
        objs = [json.loads(ln) for ln in lines if ln.strip()]
    except json.JSONDecodeError as exc:
        raise MetricsError(f"{path}: malformed JSON line ({exc})") from None
    if not objs or objs[0].get("type") != "header":
        raise MetricsError(f"{path}: bad metrics header")
    rows = []
    for o in objs:
        if o.get("type") == "row":
            rows.append(MetricsRow(o["episode"], o["seed"], o["return"], o["survival"],
                                   o["correct"], o["mean_q"], o["success"],
                                   tuple(sorted(o["options"].items(), key=lambda kv: _label_key(kv[0])))))
    has_agg = objs[-1].get("type") == "aggregate"
    return rows, int(objs[0]["rows"]), objs[0].get("name", ""), has_agg


def _label_key(label: str):
    return tuple(int(p) for p in label.split("-"))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def default_model(spec: envs.EnvSpec, seed: int = 0):
    """The perception model each environment kind is scored with."""
    if spec.kind in envs.PERCEPTION_KINDS:
        return envs.scene_perception_model(spec, seed=seed)
    if spec.kind == envs.BALANCE:
        return envs.balance_perception_model(spec, seed=seed)
    return envs.grip_visual_model(spec, seed=seed)


def _sense_state(config: ExperimentConfig, space, fixed_index: int) -> SensePolicyState:
    cfg = config.sense_config
    if config.sense_mode == "fixed":
        return SensePolicyState.for_space(space, cfg, pinned=fixed_index)
    if config.sense_mode == "random":
        cfg = replace(cfg, epsilon=1.0)
    return SensePolicyState.for_space(space, cfg)


def episode_runner(config: ExperimentConfig) -> Callable[[int, int], MetricsRow]:
    """A function (episode, seed) -> row; policy tables live in its closure."""
    spec = config.env_spec()
    model = default_model(spec, config.model_seed)
    learner, fw = config.learner, config.framework

    if fw == "single-shot":
        mode = "fixed" if config.sense_mode == "fixed" else "adaptive"
        k = 1 if config.sense_mode == "random" else config.k

        def run(ep, seed):
            return row_from_selection(ep, seed, loops.run_single_shot(spec, k, model, seed, mode))
        return run

    def tagged(traj: Trajectory) -> Trajectory:
        traj.info["kind"] = spec.kind
        return traj

    if fw == "perception-only":
        sense = _sense_state(config, spec.option_spaces[0], spec.fixed_options[0])

        def run(ep, seed):
            traj = loops.run_perception_only(spec, sense, model, learner, seed, config.learn)
            return row_from_trajectory(ep, seed, tagged(traj))
        return run

    action = ActionPolicyState(loops.n_obs_buckets(spec), spec.action_count, learner)
    if fw == "conventional":
        def run(ep, seed):
            traj = loops.run_conventional(spec, action, learner, seed, model=model, learn=config.learn)
            return row_from_trajectory(ep, seed, tagged(traj))
        return run

    if fw == "sensorimotor":
        sense = _sense_state(config, spec.option_spaces[0], spec.fixed_options[0])

        def run(ep, seed):
            traj = loops.run_sensorimotor(spec, action, sense, config.lam, learner, seed,
                                          model=model, learn=config.learn)
            return row_from_trajectory(ep, seed, tagged(traj))
        return run

    senses = [_sense_state(config, sp, fx) for sp, fx in zip(spec.option_spaces, spec.fixed_options)]

    def run(ep, seed):
        traj = loops.run_multimodal_sparse(spec, action, senses, config.lam_tact, config.lam_vis,
                                           learner, seed, visual_model=model, learn=config.learn)
        return row_from_trajectory(ep, seed, tagged(traj))
    return run


def metrics_path(config: ExperimentConfig) -> Path:
    base = config.out_dir or os.environ.get("ASL_OUT_DIR") or "."
    return Path(base) / f"{config.run_name}.{config.format}"


def run_experiment(
    config: ExperimentConfig,
    path: str | os.PathLike | None = None,
    write: bool = True,
    progress: Callable[[MetricsRow], None] | None = None,
    clock: Callable[[], str] | None = None,
) -> MetricsReport:
    """Run every episode of ``config`` in index order, appending rows as they finish."""
    seeds = config.episode_seeds()
    run = episode_runner(config)
    target = Path(path) if path is not None else metrics_path(config)
    writer = MetricsWriter(target, config.format, len(seeds), config.run_name, clock) if write else None
    rows = []
    try:
        for ep, seed in enumerate(seeds):
            row = run(ep, seed)
            rows.append(row)
            if writer is not None:
                writer.append(row)
            if progress is not None:
                progress(row)
    finally:
        if writer is not None and len(rows) == len(seeds):
            writer.close()
        elif writer is not None:
            writer._fh.close()
    return MetricsReport.from_rows(rows, config.run_name, str(target) if write else None)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


def sign_test(differences: Iterable[float]) -> tuple[float, int, int, int]:
    """Two-sided sign test with ties dropped.

    Returns (p, positives, negatives, ties); p = min(1, 2 * P[X <= min(pos, neg)])
    for X ~ Binomial(pos + neg, 1/2), and p = 1 when every pair is tied.
    """
    d = np.asarray(list(differences), dtype=float)
    pos, neg = int((d > 0).sum()), int((d < 0).sum())
    ties = int(d.size - pos - neg)
    n = pos + neg
    if n == 0:
        return 1.0, pos, neg, ties
    tail = sum(math.comb(n, i) for i in range(min(pos, neg) + 1))
    return min(1.0, 2.0 * tail / 2.0 ** n), pos, neg, ties


@dataclass(frozen=True)
class ComparisonSummary:
    metric: str
    name_a: str
    name_b: str
    mean_a: float
    mean_b: float
    mean_difference: float
    differences: tuple[float, ...]
    wins_a: int
    wins_b: int
    ties: int
    p_value: float

    @property
    def n(self) -> int:
        return len(self.differences)

    def table(self) -> str:
        w = max(len(self.name_a), len(self.name_b), 8)
        lines = [
            f"metric: {self.metric}   paired episodes: {self.n}",
            f"{'run':<{w}}  {'mean':>12}  {'wins':>6}",
            f"{self.name_a:<{w}}  {self.mean_a:>12.6f}  {self.wins_a:>6d}",
            f"{self.name_b:<{w}}  {self.mean_b:>12.6f}  {self.wins_b:>6d}",
            f"difference (a - b): {self.mean_difference:.6f}   ties: {self.ties}",
            f"sign test (two-sided, ties dropped): p = {self.p_value:.6g}",
        ]
        return "\n".join(lines)

    def to_json(self) -> str:
        rec = {"type": "comparison", "metric": self.metric, "a": self.name_a, "b": self.name_b,
               "mean_a": self.mean_a, "mean_b": self.mean_b,
               "mean_difference": self.mean_difference, "n": self.n, "wins_a": self.wins_a,
               "wins_b": self.wins_b, "ties": self.ties, "p_value": self.p_value,
               "differences": list(self.differences)}
        return json.dumps(rec, sort_keys=True)


def compare(report_a: MetricsReport, report_b: MetricsReport, metric: str = "return") -> ComparisonSummary:
    """Pair episodes by seed and sign-test the per-pair differences (a - b)."""
    if metric not in AGGREGATED:
        raise SpecError(f"unknown metric {metric!r}; expected one of {AGGREGATED}")
    if len(report_a.rows) != len(report_b.rows):
        raise SpecError(f"episode counts differ ({len(report_a.rows)} vs {len(report_b.rows)})")
    if report_a.seeds != report_b.seeds:
        raise SpecError("seed mismatch: reports were not run on the same seed list")
    a, b = report_a.column(metric), report_b.column(metric)
    keep = ~(np.isnan(a) | np.isnan(b))
    if not keep.any():
        raise SpecError(f"metric {metric!r} is not recorded in these reports")
    diff = a[keep] - b[keep]
    p, pos, neg, ties = sign_test(diff)
    return ComparisonSummary(
        metric, report_a.name or "a", report_b.name or "b",
        float(a[keep].mean()), float(b[keep].mean()), float(diff.mean()),
        tuple(float(x) for x in diff), pos, neg, ties, p,
    )


def headline_metric(framework: str) -> str:
    """The metric a framework is usually judged by."""
    return {"single-shot": "correct", "perception-only": "correct", "sensorimotor": "survival",
            "multimodal-sparse": "success"}.get(framework, "return")


def config_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ExperimentConfig))
