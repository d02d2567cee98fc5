"""Goal-conditioned RL engine for 2D grid path planning.

Trains a final-goal policy while relabeling every episode bi-directionally
(forward plus an inverse-model-synthesized reversal) into a subgoal replay,
from which a dedicated goal-conditioned network learns to reach arbitrary
user waypoints; reward shaping biases it toward shortest segments. Trained
agents run batch waypoint scenarios or serve live sessions over a JSON wire
protocol.
"""

from gridgoal.agents import RndPair, SilAgent
from gridgoal.editing import EditConfig, EditedBatch, edit_backward, edit_forward, shape_reward
from gridgoal.grid import (
    Action,
    DistanceOracle,
    EnvState,
    Event,
    GridEnv,
    GridLayout,
    LayoutError,
    StepOutcome,
    encode_state,
    shortest_path_len,
)
from gridgoal.inverse import InverseModel
from gridgoal.layouts import load_stages, resolve_env, save_stages
from gridgoal.nets import Adam, Mlp
from gridgoal.replay import GoalTransition, ReplayBuffer, ReturnTransition, Transition, compute_returns
from gridgoal.scenario import Scenario, ScenarioResult, compare_shaping, run_scenario
from gridgoal.subgoal import SubgoalAgent
from gridgoal.training import Checkpoint, TrainConfig, Trainer, default_config, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Action", "Adam", "Checkpoint", "DistanceOracle", "EditConfig", "EditedBatch",
    "EnvState", "Event", "GoalTransition", "GridEnv", "GridLayout", "InverseModel",
    "LayoutError", "Mlp", "ReplayBuffer", "ReturnTransition", "RndPair", "Scenario",
    "ScenarioResult", "SilAgent", "StepOutcome", "SubgoalAgent", "TrainConfig",
    "Trainer", "Transition", "compare_shaping", "compute_returns", "default_config",
    "edit_backward", "edit_forward", "encode_state", "load_checkpoint", "load_stages",
    "resolve_env", "run_scenario", "save_stages", "shape_reward", "shortest_path_len",
    "train",
]
