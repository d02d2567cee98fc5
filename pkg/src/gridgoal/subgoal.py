"""Goal-conditioned agent trained only on relabeled replay data.

Kept strictly separate from the final-goal policy: it has its own nets and
optimizer state and only ever reads the subgoal replay memory, so training it
never touches the policy network and vice versa. Input is the state encoding
with the goal coordinates appended.
"""

from __future__ import annotations

import numpy as np

from gridgoal.agents import SilAgent
from gridgoal.grid import Action, EnvState, GridEnv, Pos, state_dim
from gridgoal.replay import ReplayBuffer


class SubgoalAgent:
    def __init__(self, family: str = "simple", hidden=(64, 64), beta: float = 0.01,
                 lr: float = 3e-4, value_lr: float | None = None, seed: int = 0):
        self.family = family
        self.state_dim = state_dim(family)
        self.sil = SilAgent(self.state_dim + 2, hidden=hidden, beta=beta, lr=lr,
                            value_lr=value_lr, seed=seed)

    @property
    def policy(self):
        return self.sil.policy

    @property
    def value(self):
        return self.sil.value

    def train(self, ds: ReplayBuffer, steps: int, minibatch: int = 64) -> dict:
        """Run `steps` self-imitation updates on minibatches from D_s."""
        if steps < 0:
            raise ValueError("steps must be >= 0")
        if steps == 0:
            return {"steps": 0, "mean_loss": 0.0, "losses": []}
        if len(ds) == 0:
            raise RuntimeError("subgoal replay is empty; collect edited episodes first")
        losses = []
        for _ in range(steps):
            batch = ds.sample(minibatch)
            losses.append(self.sil.update(batch["sg"], batch["a"], batch["r"]))
        return {"steps": steps, "mean_loss": float(np.mean(losses)), "losses": losses}

    def encode(self, env: GridEnv, state: EnvState, goal: Pos) -> np.ndarray:
        return env.encode(state, goal=goal)

    def act_toward(self, env: GridEnv, state: EnvState, goal: Pos, greedy: bool = False) -> Action:
        """Action from the goal-conditioned policy for pursuing `goal`."""
        goal = (int(goal[0]), int(goal[1]))
        layout = env.layout_for(state.stage)
        if not layout.in_bounds(goal):
            raise ValueError(f"goal {goal} is outside the grid")
        if goal in layout.walls:
            raise ValueError(f"goal {goal} is a wall")
        action, _ = self.sil.act(self.encode(env, state, goal), greedy=greedy)
        return action
