"""Two-way goal relabeling of episodes, with shortest-path reward shaping.

Each episode yields relabeled training data in two directions. Forward: every
step samples k future trajectory positions as goals. Backward: the trajectory
is reversed with actions supplied by the inverse model, then relabeled the
same way, so one walked route teaches both travel directions.

Every sampled (step t, goal-at-index j) pair stores the return of its
relabeled segment: the trajectory did reach the goal after dist_st = j - t
steps (termination there, intermediate relabeled rewards zero), so the stored
scalar is the reach reward — shaped, when enabled, by the shortest-path
penalty

    r = r' + (dist_short - dist_st)

with dist_short the BFS distance from the step's state to the goal. Reaching
along a shortest segment keeps the full r'; every extra step costs 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from gridgoal import kernels
from gridgoal.grid import DistanceOracle, state_dim
from gridgoal.inverse import InverseModel, NotTrainedError
from gridgoal.replay import GoalTransition, Transition


@dataclass
class EditConfig:
    k_goals: int = 4
    reach_reward: float = 1.0  # r'
    shaping: bool = True
    gamma: float = 1.0  # discount across relabeled segments; 1.0 = plain reach reward
    seed: int = 0

    def __post_init__(self):
        if self.k_goals < 1:
            raise ValueError(f"k_goals must be >= 1, got {self.k_goals}")
        if not np.isfinite(self.reach_reward):
            raise ValueError("reach_reward must be finite")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")


@dataclass
class EditedBatch:
    forward: list[GoalTransition]
    backward: list[GoalTransition]
    n_shaping_skipped: int = 0

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.forward), len(self.backward)


def shape_reward(r_prime: float, dist_short: int, dist_st: int) -> float:
    """Shortest-path shaping: r' + (dist_short - dist_st), never above r'."""
    if dist_short < 0:
        raise ValueError("dist_short must be >= 0 (BFS length)")
    if dist_st < dist_short:
        raise ValueError(f"dist_st {dist_st} below BFS minimum {dist_short}")
    return float(r_prime) + float(dist_short - dist_st)


@dataclass
class EpisodeTrace:
    """Array view of one episode, the unit the editors operate on.

    Trace arrays (xs, ys, stages, keys) have length n_steps + 1; actions and
    events have length n_steps. Stage values are 1-based.
    """

    xs: np.ndarray
    ys: np.ndarray
    stages: np.ndarray
    keys: np.ndarray
    actions: np.ndarray
    events: np.ndarray
    family: str
    width: int
    height: int

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    def encode_indices(self, idx: np.ndarray, goal_x: np.ndarray, goal_y: np.ndarray) -> np.ndarray:
        """Goal-conditioned feature rows for trace indices idx."""
        d = state_dim(self.family)
        out = np.zeros((len(idx), d + 2), dtype=np.float64)
        out[:, 0] = self.xs[idx] / self.width
        out[:, 1] = self.ys[idx] / self.height
        if self.family == "keydoor":
            out[:, 2] = self.keys[idx]
            out[np.arange(len(idx)), 2 + self.stages[idx]] = 1.0
        out[:, d] = goal_x / self.width
        out[:, d + 1] = goal_y / self.height
        return out

    def segments(self) -> list[tuple[int, int]]:
        """Per-stage trace-index ranges [a, b] (inclusive)."""
        if self.family != "keydoor":
            return [(0, len(self.xs) - 1)]
        bounds = np.flatnonzero(np.diff(self.stages)) + 1
        starts = np.concatenate([[0], bounds])
        ends = np.concatenate([bounds - 1, [len(self.xs) - 1]])
        return [(int(a), int(b)) for a, b in zip(starts, ends)]


def trace_from_transitions(episode: list[Transition], family: str | None, width: int, height: int) -> EpisodeTrace:
    if not episode:
        raise ValueError("episode is empty")
    if family is None:
        family = "keydoor" if episode[0].s.shape[-1] == 7 else "simple"
    n = len(episode)
    xs = np.empty(n + 1, dtype=np.int32)
    ys = np.empty(n + 1, dtype=np.int32)
    stages = np.ones(n + 1, dtype=np.int32)
    keys = np.zeros(n + 1, dtype=np.uint8)
    actions = np.empty(n, dtype=np.int32)
    events = np.zeros(n, dtype=np.int8)

    def fill(i: int, pos, feat):
        xs[i], ys[i] = pos
        if family == "keydoor":
            keys[i] = int(round(feat[2]))
            stages[i] = int(np.argmax(feat[3:7])) + 1

    for t, tr in enumerate(episode):
        fill(t, tr.pos, tr.s)
        actions[t] = int(tr.a)
        if tr.pos_next == tr.pos:
            events[t] = kernels.EV_BLOCKED
    fill(n, episode[-1].pos_next, episode[-1].s_next)
    if family == "keydoor":
        events[np.flatnonzero(np.diff(stages))] = kernels.EV_GOAL
    return EpisodeTrace(xs, ys, stages, keys, actions, events, family, width, height)


def _oracle_for(oracle, stage: int) -> DistanceOracle:
    if isinstance(oracle, DistanceOracle):
        return oracle
    return oracle[stage - 1]


def _relabel(trace: EpisodeTrace, seq: np.ndarray, actions: np.ndarray, cfg: EditConfig,
             oracle: DistanceOracle, rng: np.random.Generator):
    """Sample k future goals per step of a (possibly reversed) index sequence
    and emit relabeled columns. seq maps sequence positions to trace indices.
    """
    n = len(seq) - 1  # steps in this sequence
    if n <= 0:
        return None, 0
    k = cfg.k_goals
    u = np.repeat(np.arange(n), k)
    j = rng.integers(np.arange(n)[:, None] + 1, n + 1, size=(n, k)).ravel()
    dist_st = (j - u).astype(np.int64)

    src, dst = seq[u], seq[j]
    gx, gy = trace.xs[dst], trace.ys[dst]
    dist_short = oracle.dist_many(trace.xs[src], trace.ys[src], gx, gy)
    unreachable = dist_short < 0

    r = np.full(n * k, float(cfg.reach_reward))
    if cfg.shaping:
        reach = ~unreachable
        r[reach] += dist_short[reach] - dist_st[reach]
    if cfg.gamma < 1.0:
        r *= cfg.gamma ** (dist_st - 1)

    nxt = seq[u + 1]
    done_g = (trace.xs[nxt] == gx) & (trace.ys[nxt] == gy)
    cols = {
        "sg": trace.encode_indices(src, gx, gy),
        "a": actions[u].astype(np.int64),
        "r": r,
        "sg_next": trace.encode_indices(nxt, gx, gy),
        "done_g": done_g,
    }
    return cols, int(unreachable.sum() if cfg.shaping else 0)


def _concat(parts: list[dict]) -> dict:
    if not parts:
        return {"sg": np.zeros((0, 0)), "a": np.zeros(0, np.int64), "r": np.zeros(0),
                "sg_next": np.zeros((0, 0)), "done_g": np.zeros(0, bool)}
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def edit_forward_arrays(trace: EpisodeTrace, cfg: EditConfig, oracle, rng: np.random.Generator):
    """Forward relabeling over each stage segment. Returns (columns, skipped)."""
    parts, skipped = [], 0
    for a, b in trace.segments():
        seq = np.arange(a, b + 1)
        cols, n_unreach = _relabel(trace, seq, trace.actions[a:b], cfg,
                                   _oracle_for(oracle, int(trace.stages[a])), rng)
        if cols is not None:
            parts.append(cols)
            skipped += n_unreach
    return _concat(parts), skipped


def edit_backward_arrays(trace: EpisodeTrace, inv: InverseModel, cfg: EditConfig, oracle,
                         rng: np.random.Generator):
    """Reverse each stage segment with inverse-model actions, then relabel.

    Blocked steps (self-transitions) are skipped: no action undoes a
    non-move distinguishably. Stage-crossing steps never appear because
    segments are per-stage.
    """
    if not inv.is_trained:
        raise NotTrainedError("inverse model has no training steps; cannot synthesize reverse trajectories")
    parts, skipped = [], 0
    for a, b in trace.segments():
        steps = np.arange(a, b)
        steps = steps[trace.events[a:b] != kernels.EV_BLOCKED]
        if steps.size == 0:
            continue
        # reversed walk: trace indices [b, then source of each non-blocked step, descending]
        seq = np.concatenate([[b], steps[::-1]])
        zero = np.zeros(len(seq), dtype=np.int64)
        enc = trace.encode_indices(seq, zero, zero)[:, : state_dim(trace.family)]
        actions = inv.predict_inverse(enc[:-1], enc[1:]).astype(np.int32)
        cols, n_unreach = _relabel(trace, seq, actions, cfg,
                                   _oracle_for(oracle, int(trace.stages[a])), rng)
        if cols is not None:
            parts.append(cols)
            skipped += n_unreach
    return _concat(parts), skipped


def _to_objects(cols: dict) -> list[GoalTransition]:
    return [
        GoalTransition(sg=cols["sg"][i], a=int(cols["a"][i]), r_shaped=float(cols["r"][i]),
                       sg_next=cols["sg_next"][i], done_g=bool(cols["done_g"][i]))
        for i in range(len(cols["a"]))
    ]


def _prepare(episode: list[Transition], oracle) -> EpisodeTrace:
    if not episode:
        raise ValueError("episode is empty")
    layout = oracle.layout if isinstance(oracle, DistanceOracle) else oracle[0].layout
    return trace_from_transitions(episode, None, layout.width, layout.height)


def edit_forward(episode: list[Transition], cfg: EditConfig, oracle,
                 rng: np.random.Generator | None = None) -> list[GoalTransition]:
    trace = _prepare(episode, oracle)
    cols, skipped = edit_forward_arrays(trace, cfg, oracle, rng or np.random.default_rng(cfg.seed))
    if skipped:
        warnings.warn(f"shaping skipped for {skipped} unreachable goals", RuntimeWarning, stacklevel=2)
    return _to_objects(cols)


def edit_backward(episode: list[Transition], inv: InverseModel, cfg: EditConfig, oracle,
                  rng: np.random.Generator | None = None) -> list[GoalTransition]:
    trace = _prepare(episode, oracle)
    cols, skipped = edit_backward_arrays(trace, inv, cfg, oracle, rng or np.random.default_rng(cfg.seed))
    if skipped:
        warnings.warn(f"shaping skipped for {skipped} unreachable goals", RuntimeWarning, stacklevel=2)
    return _to_objects(cols)


def edit_episode(episode: list[Transition], inv: InverseModel, cfg: EditConfig, oracle,
                 rng: np.random.Generator | None = None) -> EditedBatch:
    rng = rng or np.random.default_rng(cfg.seed)
    trace = _prepare(episode, oracle)
    fwd, sk_f = edit_forward_arrays(trace, cfg, oracle, rng)
    bwd, sk_b = edit_backward_arrays(trace, inv, cfg, oracle, rng)
    return EditedBatch(forward=_to_objects(fwd), backward=_to_objects(bwd),
                       n_shaping_skipped=sk_f + sk_b)


def dump_edited_jsonl(batch: EditedBatch, path) -> int:
    """Write an edited batch as JSON-lines for offline inspection.

    One object per relabeled transition with a direction tag; returns the
    number of lines written.
    """
    import json

    n = 0
    with open(path, "w") as fh:
        for direction, items in (("forward", batch.forward), ("backward", batch.backward)):
            for g in items:
                fh.write(json.dumps({
                    "dir": direction,
                    "sg": [round(v, 9) for v in g.sg.tolist()],
                    "a": g.a,
                    "r": round(g.r_shaped, 9),
                    "done_g": g.done_g,
                }) + "\n")
                n += 1
    return n
