"""Calibration runs behind the statistical acceptance thresholds.

    python3 calibration/calibrate.py single-shot   # adaptive vs fixed accuracy, 5 master seeds
    python3 calibration/calibrate.py balance       # survival: lambda 0.1 vs 0 vs random sensing
    python3 calibration/calibrate.py grip          # success: shaped vs bare sparse, 3 master seeds

Each writes a plain-text record next to this script (``<name>.txt``).
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from adaptive_sensing import harness

HERE = Path(__file__).resolve().parent
CONFIGS = HERE.parent / "configs"


def _run(path: Path, **overrides) -> harness.MetricsReport:
    cfg = harness.load_config(path)
    for key, value in overrides.items():
        cfg = cfg.with_value(key, str(value))
    return harness.run_experiment(cfg, write=False)


def single_shot(lines: list[str]) -> None:
    lines.append("single-shot accuracy, 2000 episodes per master seed, k = 8, model seed 0")
    lines.append("master  adaptive  fixed     gain_pp  wins  losses  p")
    for master in range(5):
        a = _run(CONFIGS / "single_shot_adaptive.cfg", **{"run.master_seed": master})
        f = _run(CONFIGS / "single_shot_fixed.cfg", **{"run.master_seed": master})
        s = harness.compare(a, f, "correct")
        lines.append(f"{master:>6d}  {s.mean_a:.4f}    {s.mean_b:.4f}    {100 * s.mean_difference:6.2f}"
                     f"  {s.wins_a:>4d}  {s.wins_b:>6d}  {s.p_value:.3g}")


def balance(lines: list[str]) -> None:
    lines.append("balance mean survival over 100 training episodes per seed (master seeds 1000..1019)")
    lines.append("seed  aware    task-only  random")
    aware, plain, rand = [], [], []
    for master in range(1000, 1020):
        vals = [_run(CONFIGS / name, **{"run.master_seed": master}).mean("survival")
                for name in ("balance_aware.cfg", "balance_task_only.cfg", "balance_random_sensing.cfg")]
        aware.append(vals[0]), plain.append(vals[1]), rand.append(vals[2])
        lines.append(f"{master}  {vals[0]:7.2f}  {vals[1]:9.2f}  {vals[2]:7.2f}")
    p, pos, neg, ties = harness.sign_test(np.array(aware) - np.array(plain))
    lines.append(f"means: aware {np.mean(aware):.2f}  task-only {np.mean(plain):.2f}  random {np.mean(rand):.2f}")
    lines.append(f"aware vs task-only: wins {pos}  losses {neg}  ties {ties}  sign-test p = {p:.3g}")


def grip(lines: list[str]) -> None:
    lines.append("grip success rate over 500 paired training episodes")
    lines.append("master  shaped  sparse  wins  losses  p")
    for master in range(3):
        a = _run(CONFIGS / "grip_shaped.cfg", **{"run.master_seed": master})
        b = _run(CONFIGS / "grip_sparse.cfg", **{"run.master_seed": master})
        s = harness.compare(a, b, "success")
        lines.append(f"{master:>6d}  {s.mean_a:.3f}   {s.mean_b:.3f}   {s.wins_a:>4d}  {s.wins_b:>6d}  {s.p_value:.3g}")


STUDIES = {"single-shot": single_shot, "balance": balance, "grip": grip}


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("study", choices=sorted(STUDIES))
    args = parser.parse_args(argv)
    lines: list[str] = []
    start = time.perf_counter()
    STUDIES[args.study](lines)
    lines.append(f"elapsed {time.perf_counter() - start:.0f} s")
    text = "\n".join(lines) + "\n"
    (HERE / f"{args.study}.txt").write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
