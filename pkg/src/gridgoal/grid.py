"""Deterministic 2D grid environments with a BFS shortest-path oracle.

Two families: a single-layout "simple" grid (terminal reward on the target
cell) and a staged "keydoor" grid where each stage's door only works after
the stage's bonus cell (the key) was collected. Coordinates are (x, y) with
x the column and y the row; (0, 0) is the top-left cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property

import numpy as np

from gridgoal import kernels

Pos = tuple[int, int]

KEYDOOR_STAGES = 4  # stage one-hot width in the key-door encoding

DEFAULT_REWARDS = {"goal": 30.0, "bonus": 10.0, "penalty": -10.0}


class LayoutError(ValueError):
    """A layout violates one of its invariants; message names the field."""


class EpisodeOver(RuntimeError):
    """step() was called on a finished episode."""


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def inverse(self) -> "Action":
        # UP<->DOWN and LEFT<->RIGHT pair up as even/odd neighbors
        return Action(self.value ^ 1)

    @property
    def delta(self) -> Pos:
        return _DELTAS[self.value]


_DELTAS: tuple[Pos, ...] = ((0, -1), (0, 1), (-1, 0), (1, 0))


class Event(IntEnum):
    NONE = kernels.EV_NONE
    BONUS = kernels.EV_BONUS
    PENALTY = kernels.EV_PENALTY
    GOAL = kernels.EV_GOAL
    BLOCKED = kernels.EV_BLOCKED


@dataclass
class GridLayout:
    width: int
    height: int
    start: Pos
    target: Pos
    walls: frozenset[Pos] = field(default_factory=frozenset)
    bonus: Pos | None = None
    penalty: Pos | None = None
    rewards: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_REWARDS))

    def __post_init__(self):
        self.start = tuple(self.start)
        self.target = tuple(self.target)
        self.walls = frozenset(tuple(w) for w in self.walls)
        if self.bonus is not None:
            self.bonus = tuple(self.bonus)
        if self.penalty is not None:
            self.penalty = tuple(self.penalty)
        rewards = dict(DEFAULT_REWARDS)
        rewards.update(self.rewards)
        self.rewards = rewards

    def in_bounds(self, pos: Pos) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    @cached_property
    def wall_mask(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=np.uint8)
        for x, y in self.walls:
            mask[y, x] = 1
        mask.setflags(write=False)
        return mask

    def validate(self) -> None:
        if not (isinstance(self.width, int) and self.width > 0):
            raise LayoutError(f"width must be a positive integer, got {self.width!r}")
        if not (isinstance(self.height, int) and self.height > 0):
            raise LayoutError(f"height must be a positive integer, got {self.height!r}")
        for name in ("start", "target", "bonus", "penalty"):
            pos = getattr(self, name)
            if pos is None:
                continue
            if not self.in_bounds(pos):
                raise LayoutError(f"{name} {pos} is outside the {self.width}x{self.height} grid")
            if pos in self.walls:
                raise LayoutError(f"{name} {pos} lies inside walls")
        for w in self.walls:
            if not self.in_bounds(w):
                raise LayoutError(f"walls entry {w} is outside the grid")
        for key, val in self.rewards.items():
            if not isinstance(val, (int, float)) or not np.isfinite(val):
                raise LayoutError(f"rewards[{key!r}] must be a finite number, got {val!r}")
        if shortest_path_len(self, self.start, self.target) is None:
            raise LayoutError(f"target {self.target} is unreachable from start {self.start}")


@dataclass
class EnvState:
    pos: Pos
    stage: int = 1
    has_bonus: bool = False
    t: int = 0
    penalty_hit: bool = False  # keeps once-per-stage penalty a function of state


@dataclass
class StepOutcome:
    next: EnvState
    reward: float
    done: bool
    event: Event


def shortest_path_len(layout: GridLayout, frm: Pos, to: Pos) -> int | None:
    """BFS length over 4-connected non-wall cells; None when unreachable."""
    for name, pos in (("from", tuple(frm)), ("to", tuple(to))):
        if not layout.in_bounds(pos):
            raise ValueError(f"{name} position {pos} is outside the grid")
        if pos in layout.walls:
            raise ValueError(f"{name} position {pos} is a wall")
    dist = kernels.bfs_fill(layout.wall_mask, int(frm[0]), int(frm[1]))
    d = int(dist[to[1], to[0]])
    return None if d < 0 else d


class DistanceOracle:
    """Lazily filled all-pairs BFS distance table for one layout.

    Row `y*width + x` holds the distance field from source (x, y); -1 marks
    unreachable, -2 not yet computed. Sized for desk-scale grids (<= 4096
    cells); larger layouts should query shortest_path_len directly.
    """

    def __init__(self, layout: GridLayout):
        n = layout.width * layout.height
        if n > 4096:
            raise ValueError("DistanceOracle supports layouts up to 4096 cells")
        self.layout = layout
        self._table = np.full((n, layout.height, layout.width), -2, dtype=np.int16)
        self._filled = np.zeros(n, dtype=bool)

    def _ensure(self, idx: np.ndarray) -> None:
        for i in np.unique(idx):
            if not self._filled[i]:
                x = int(i % self.layout.width)
                y = int(i // self.layout.width)
                self._table[i] = kernels.bfs_fill(self.layout.wall_mask, x, y).astype(np.int16)
                self._filled[i] = True

    def dist(self, frm: Pos, to: Pos) -> int:
        """Distance in steps, or -1 if unreachable."""
        i = np.asarray([frm[1] * self.layout.width + frm[0]])
        self._ensure(i)
        return int(self._table[i[0], to[1], to[0]])

    def dist_many(self, src_x: np.ndarray, src_y: np.ndarray, dst_x: np.ndarray, dst_y: np.ndarray) -> np.ndarray:
        idx = src_y.astype(np.int64) * self.layout.width + src_x
        self._ensure(idx)
        return self._table[idx, dst_y, dst_x].astype(np.int64)


def encode_state(state: EnvState, layout: GridLayout, goal: Pos | None = None, *, family: str = "simple") -> np.ndarray:
    """Normalized feature vector: [x/W, y/H] for simple grids, plus key flag
    and the stage one-hot for key-door; goal coordinates appended when given.
    """
    if family == "keydoor":
        out = np.zeros(7 + (2 if goal is not None else 0), dtype=np.float64)
        out[2] = 1.0 if state.has_bonus else 0.0
        if not 1 <= state.stage <= KEYDOOR_STAGES:
            raise ValueError(f"stage {state.stage} outside 1..{KEYDOOR_STAGES}")
        out[2 + state.stage] = 1.0
        base = 7
    else:
        out = np.zeros(2 + (2 if goal is not None else 0), dtype=np.float64)
        base = 2
    out[0] = state.pos[0] / layout.width
    out[1] = state.pos[1] / layout.height
    if goal is not None:
        out[base] = goal[0] / layout.width
        out[base + 1] = goal[1] / layout.height
    return out


def state_dim(family: str) -> int:
    return 7 if family == "keydoor" else 2


class GridEnv:
    """Single-owner deterministic grid MDP over one or more stage layouts."""

    def __init__(self, stages: list[GridLayout] | GridLayout, family: str | None = None,
                 horizon: int | None = None, terminal_on_target: bool = True):
        if isinstance(stages, GridLayout):
            stages = [stages]
        if not stages:
            raise LayoutError("layout set is empty")
        if family is None:
            family = "keydoor" if len(stages) > 1 else "simple"
        if family not in ("simple", "keydoor"):
            raise ValueError(f"unknown family {family!r}")
        if family == "keydoor" and len(stages) > KEYDOOR_STAGES:
            raise LayoutError(f"key-door supports up to {KEYDOOR_STAGES} stages, got {len(stages)}")
        for i, layout in enumerate(stages):
            try:
                layout.validate()
            except LayoutError as exc:
                raise LayoutError(f"stage {i + 1}: {exc}") from exc
        first = stages[0]
        for i, layout in enumerate(stages[1:], start=2):
            if (layout.width, layout.height) != (first.width, first.height):
                raise LayoutError(f"stage {i} size {layout.width}x{layout.height} differs from stage 1")
        self.stages = list(stages)
        self.family = family
        self.horizon = int(horizon) if horizon is not None else (2000 if family == "keydoor" else 1000)
        self.terminal_on_target = terminal_on_target
        self._oracles: dict[int, DistanceOracle] = {}

    @property
    def width(self) -> int:
        return self.stages[0].width

    @property
    def height(self) -> int:
        return self.stages[0].height

    @property
    def state_dim(self) -> int:
        return state_dim(self.family)

    @property
    def n_actions(self) -> int:
        return len(Action)

    def layout_for(self, stage: int) -> GridLayout:
        return self.stages[stage - 1]

    def oracle(self, stage: int = 1) -> DistanceOracle:
        if stage not in self._oracles:
            self._oracles[stage] = DistanceOracle(self.layout_for(stage))
        return self._oracles[stage]

    def reset(self, seed: int | None = None) -> EnvState:
        # dynamics are deterministic; seed is accepted for interface symmetry
        del seed
        return EnvState(pos=self.stages[0].start, stage=1, has_bonus=False, t=0)

    def is_done(self, state: EnvState) -> bool:
        if state.t >= self.horizon:
            return True
        layout = self.layout_for(state.stage)
        if self.family == "keydoor":
            # standing on the final door implies it was cleared (door cells block keyless entry)
            return state.stage == len(self.stages) and state.pos == layout.target
        return self.terminal_on_target and state.pos == layout.target

    def step(self, state: EnvState, action: Action) -> StepOutcome:
        if self.is_done(state):
            raise EpisodeOver(f"episode finished at t={state.t}; reset before stepping")
        layout = self.layout_for(state.stage)
        dx, dy = Action(action).delta
        nx, ny = state.pos[0] + dx, state.pos[1] + dy
        nxt = replace(state, t=state.t + 1)
        reward = 0.0
        event = Event.NONE
        done = False

        blocked = not layout.in_bounds((nx, ny)) or (nx, ny) in layout.walls
        if not blocked and self.family == "keydoor" and (nx, ny) == layout.target and not state.has_bonus:
            blocked = True  # door without key: no transition
        if blocked:
            event = Event.BLOCKED
        else:
            pos = (nx, ny)
            nxt.pos = pos
            # for key-door, reaching the target here implies the key is held
            # (keyless door entry was handled as Blocked above)
            target_fires = pos == layout.target and (self.family == "keydoor" or self.terminal_on_target)
            if target_fires:
                reward += layout.rewards["goal"]
                event = Event.GOAL
                if self.family == "simple" or state.stage == len(self.stages):
                    done = True
                else:
                    nxt.stage = state.stage + 1
                    nxt.pos = self.layout_for(nxt.stage).start
                    nxt.has_bonus = False
                    nxt.penalty_hit = False
            elif layout.bonus is not None and pos == layout.bonus and not state.has_bonus:
                reward += layout.rewards["bonus"]
                nxt.has_bonus = True
                event = Event.BONUS
            elif layout.penalty is not None and pos == layout.penalty and not state.penalty_hit:
                reward += layout.rewards["penalty"]
                nxt.penalty_hit = True
                event = Event.PENALTY

        if nxt.t >= self.horizon:
            done = True
        return StepOutcome(next=nxt, reward=reward, done=done, event=event)

    def pack(self) -> dict:
        """Layout arrays for the rollout kernels."""
        n = len(self.stages)
        walls = np.stack([layout.wall_mask for layout in self.stages]).astype(np.uint8)
        starts = np.full((n, 2), -1, dtype=np.int32)
        targets = np.full((n, 2), -1, dtype=np.int32)
        bonuses = np.full((n, 2), -1, dtype=np.int32)
        penalties = np.full((n, 2), -1, dtype=np.int32)
        for i, layout in enumerate(self.stages):
            starts[i] = layout.start
            targets[i] = layout.target
            if layout.bonus is not None:
                bonuses[i] = layout.bonus
            if layout.penalty is not None:
                penalties[i] = layout.penalty
        r = self.stages[0].rewards
        return {
            "walls": walls,
            "starts": starts,
            "targets": targets,
            "bonuses": bonuses,
            "penalties": penalties,
            "reward_goal": float(r["goal"]),
            "reward_bonus": float(r["bonus"]),
            "reward_penalty": float(r["penalty"]),
            "family": 1 if self.family == "keydoor" else 0,
        }

    def encode(self, state: EnvState, goal: Pos | None = None) -> np.ndarray:
        return encode_state(state, self.layout_for(state.stage), goal, family=self.family)
