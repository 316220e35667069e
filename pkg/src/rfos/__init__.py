"""R_MAX opponent shaping over discretised meta-games."""

from .games import ContractError, MatrixGame, make_game, matching_pennies
from .harness import RunConfig, RunRecord, detect_convergence, load_config, run, sweep
from .metagame import MetaGame, meta_step
from .rmax import RmaxModel, vi_sweep_count

__all__ = [
    "ContractError",
    "MatrixGame",
    "MetaGame",
    "RmaxModel",
    "RunConfig",
    "RunRecord",
    "detect_convergence",
    "load_config",
    "make_game",
    "matching_pennies",
    "meta_step",
    "run",
    "sweep",
    "vi_sweep_count",
]
