"""Closed-loop adaptive sensing: choose sensor options for the model that reads them.

Modules:
    core        value types (options, observations, rewards, trajectories)
    sensing     the capture pipeline y = clip(x * scale + offset + noise), quantized
    perception  logistic classifiers and quality metrics
    policies    single-shot selection, tabular sensing and action policies
    envs        scene, drifting, balance and grip environments
    loops       the closed-loop frameworks
    learn       Q-learning, value iteration and the toy MDP fixture
    harness     configs, seeded runs, metrics files, paired comparisons
    cli         command-line entry point
"""

from .core import LearnerConfig, SpecError

__version__ = "0.1.0"
__all__ = ["LearnerConfig", "SpecError", "__version__"]
