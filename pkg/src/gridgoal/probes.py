"""Rollout probes for measuring goal-reaching ability.

Used by the ablation command and the acceptance suite: drive the
goal-conditioned agent toward fixed goals from fixed starts and score
whether it arrives within a step budget tied to the BFS distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gridgoal.grid import EnvState, GridEnv, Pos
from gridgoal.subgoal import SubgoalAgent


def probe_env(env: GridEnv) -> GridEnv:
    """A copy of the environment for free-roaming rollouts (no terminal cell)."""
    return GridEnv(env.stages, family=env.family, horizon=10**9, terminal_on_target=False)


def rollout_to_goal(agent: SubgoalAgent, env: GridEnv, start: Pos, goal: Pos,
                    budget: int, greedy: bool = True,
                    rng: np.random.Generator | None = None) -> tuple[bool, int, list[Pos]]:
    """Drive toward one goal; returns (reached, steps_used, trace)."""
    state = EnvState(pos=tuple(start), stage=1)
    trace = [state.pos]
    if state.pos == tuple(goal):
        return True, 0, trace
    rng = rng or np.random.default_rng(0)
    enc_goal = tuple(goal)
    for step in range(budget):
        probs = agent.sil.action_probs(agent.encode(env, state, enc_goal))
        if greedy:
            a = int(np.argmax(probs))
        else:
            a = int(rng.choice(len(probs), p=probs / probs.sum()))
        out = env.step(state, a)
        state = out.next
        trace.append(state.pos)
        if state.pos == enc_goal:
            return True, step + 1, trace
    return False, budget, trace


@dataclass
class ProbeResult:
    n: int
    n_reached: int
    details: list[dict]

    @property
    def reach_rate(self) -> float:
        return self.n_reached / self.n if self.n else 0.0


def free_cells(env: GridEnv, stage: int = 1) -> list[Pos]:
    layout = env.layout_for(stage)
    return [(x, y) for y in range(layout.height) for x in range(layout.width)
            if (x, y) not in layout.walls]


def goal_reach_probe(agent: SubgoalAgent, env: GridEnv, pairs: list[tuple[Pos, Pos]],
                     factor: float = 2.0, min_budget: int = 4, greedy: bool = True,
                     seed: int = 0) -> ProbeResult:
    """Score (start, goal) pairs: reached within factor x BFS-distance steps."""
    penv = probe_env(env)
    oracle = penv.oracle(1)
    rng = np.random.default_rng(seed)
    details = []
    n_reached = 0
    for start, goal in pairs:
        d = oracle.dist(start, goal)
        if d < 0:
            details.append({"start": start, "goal": goal, "bfs": None, "reached": False})
            continue
        budget = max(min_budget, math.ceil(factor * d))
        reached, steps, _ = rollout_to_goal(agent, penv, start, goal, budget, greedy=greedy, rng=rng)
        n_reached += reached
        details.append({"start": start, "goal": goal, "bfs": d, "steps": steps, "reached": reached})
    return ProbeResult(n=len(pairs), n_reached=n_reached, details=details)


def random_pairs(env: GridEnv, n: int, seed: int, min_dist: int = 1,
                 include_cells: list[Pos] | None = None) -> list[tuple[Pos, Pos]]:
    """Uniform (start, goal) pairs over free cells, BFS-connected, at least
    min_dist apart. include_cells are forced in as goals (round-robin starts).
    """
    cells = free_cells(env)
    oracle = env.oracle(1)
    rng = np.random.default_rng(seed)
    pairs: list[tuple[Pos, Pos]] = []
    for goal in include_cells or []:
        for _ in range(10_000):
            start = cells[rng.integers(len(cells))]
            if oracle.dist(start, tuple(goal)) >= min_dist:
                pairs.append((start, tuple(goal)))
                break
    attempts = 0
    while len(pairs) < n and attempts < 100_000:
        attempts += 1
        start = cells[rng.integers(len(cells))]
        goal = cells[rng.integers(len(cells))]
        if oracle.dist(start, goal) >= min_dist:
            pairs.append((start, goal))
    return pairs[:n]


def quadrant_goals(env: GridEnv, origin: Pos, dx_sign: int, dy_sign: int, n: int,
                   seed: int, min_dist: int = 3) -> list[tuple[Pos, Pos]]:
    """(origin, goal) pairs with goals strictly in one quadrant around origin."""
    cells = [c for c in free_cells(env)
             if (c[0] - origin[0]) * dx_sign > 0 and (c[1] - origin[1]) * dy_sign >= 0]
    oracle = env.oracle(1)
    rng = np.random.default_rng(seed)
    pairs = []
    attempts = 0
    while len(pairs) < n and cells and attempts < 100_000:
        attempts += 1
        goal = cells[rng.integers(len(cells))]
        if oracle.dist(origin, goal) >= min_dist:
            pairs.append((tuple(origin), goal))
    return pairs


def quadrant_report(agent: SubgoalAgent, env: GridEnv, seed: int = 0,
                    per_quadrant: int = 25) -> dict:
    """Reach rate by goal quadrant around the grid center (subgoal training report)."""
    cx, cy = env.width // 2, env.height // 2
    report = {}
    for name, dx, dy in (("up_left", -1, -1), ("up_right", 1, -1),
                         ("down_left", -1, 1), ("down_right", 1, 1)):
        pairs = quadrant_goals(env, (cx, cy), dx_sign=dx, dy_sign=dy,
                               n=per_quadrant, seed=seed, min_dist=3)
        res = goal_reach_probe(agent, env, pairs, factor=2.0, greedy=False, seed=seed)
        report[name] = round(res.reach_rate, 4)
    return report


def low_visit_cells(visits: np.ndarray, env: GridEnv, k: int = 10) -> list[Pos]:
    """The k least-visited free cells of stage 1 from a training visit grid."""
    grid = visits[0] if visits.ndim == 3 else visits
    layout = env.layout_for(1)
    order = np.argsort(grid, axis=None)
    cells = []
    for flat in order:
        y, x = divmod(int(flat), layout.width)
        if (x, y) not in layout.walls:
            cells.append((x, y))
        if len(cells) >= k:
            break
    return cells
