"""Linear bandits whose rewards are driven by a linear Gaussian dynamical system."""

from .config import ExperimentConfig
from .environment import LgdsSpec, generate_spec, load_spec, save_spec
from .harness import perturb_spec, run_benchmark, run_episode, run_metric, run_robustness

__all__ = [
    "ExperimentConfig",
    "LgdsSpec",
    "generate_spec",
    "load_spec",
    "save_spec",
    "perturb_spec",
    "run_benchmark",
    "run_episode",
    "run_metric",
    "run_robustness",
]
__version__ = "0.1.0"
