"""Test-time missions: waypoint dispatch, metrics, and artifact export.

A scenario is an ordered set of user waypoints plus a final target. Dispatch
is nearest-first by BFS distance from the agent's current cell: pursue the
nearest unvisited sub-goal; on reach or budget exhaustion pick the next
nearest; after all sub-goals are consumed, pursue the final target. The same
MissionDriver backs batch scenario runs and the live control service, so a
scripted replay through the service reproduces run_scenario's trace exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gridgoal.grid import EnvState, Event, GridEnv, LayoutError, Pos
from gridgoal.layouts import resolve_env
from gridgoal.subgoal import SubgoalAgent

DEFAULT_BUDGET_FLOOR = 50
DEFAULT_BUDGET_FACTOR = 4


@dataclass
class Scenario:
    name: str
    layout: str = "simple20"
    start: Pos | None = None  # None: layout start
    subgoals: list[Pos] = field(default_factory=list)
    final_target: Pos | None = None  # None: layout target
    per_subgoal_budget: int | None = None  # None: max(50, 4 * BFS)
    total_horizon: int | None = None
    stage_subgoals: list[list[Pos]] | None = None  # key-door missions

    def to_dict(self, with_layout: bool = True) -> dict:
        obj = {
            "name": self.name,
            "start": list(self.start) if self.start else None,
            "subgoals": [list(g) for g in self.subgoals],
            "final_target": list(self.final_target) if self.final_target else None,
            "per_subgoal_budget": self.per_subgoal_budget,
            "total_horizon": self.total_horizon,
        }
        if with_layout:
            obj["layout"] = self.layout
        if self.stage_subgoals is not None:
            obj["stage_subgoals"] = [[list(g) for g in stage] for stage in self.stage_subgoals]
        return obj

    @classmethod
    def from_dict(cls, obj: dict, layout: str | None = None) -> "Scenario":
        return cls(
            name=obj["name"],
            layout=obj.get("layout", layout or "simple20"),
            start=tuple(obj["start"]) if obj.get("start") else None,
            subgoals=[tuple(g) for g in obj.get("subgoals", [])],
            final_target=tuple(obj["final_target"]) if obj.get("final_target") else None,
            per_subgoal_budget=obj.get("per_subgoal_budget"),
            total_horizon=obj.get("total_horizon"),
            stage_subgoals=[[tuple(g) for g in st] for st in obj["stage_subgoals"]]
            if obj.get("stage_subgoals") else None,
        )


@dataclass
class ScenarioResult:
    name: str
    seed: int
    reached: list[tuple[Pos, int | None]]  # (subgoal, step index) or None = timed out
    total_steps: int
    success: bool
    trace: list[Pos]
    visit_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "reached": [[list(g), step] for g, step in self.reached],
            "total_steps": self.total_steps,
            "success": self.success,
            "trace": [list(p) for p in self.trace],
        }


class MissionDriver:
    """Step-at-a-time goal pursuit over one environment instance.

    Owns the waypoint queue and the nearest-first dispatch rule; both the
    batch runner and the control service advance it one step() at a time.
    """

    def __init__(self, env: GridEnv, agent: SubgoalAgent, start: Pos | None = None,
                 final_target: Pos | None = None, per_subgoal_budget: int | None = None,
                 total_horizon: int | None = None, greedy: bool = True, seed: int = 0):
        self.env = env
        self.agent = agent
        self.greedy = greedy
        self._rng = np.random.default_rng(seed)
        layout = env.stages[0]
        self.state = EnvState(pos=tuple(start) if start else layout.start, stage=1)
        self._validate_pos(self.state.pos, "start")
        self.final_target = tuple(final_target) if final_target else None
        if self.final_target:
            self._validate_pos(self.final_target, "final_target")
        self.per_subgoal_budget = per_subgoal_budget
        self.total_horizon = total_horizon if total_horizon is not None else env.horizon
        self.queue: list[Pos] = []
        self.current: Pos | None = None
        self._budget_left = 0
        self.steps = 0
        self.trace: list[Pos] = [self.state.pos]
        self.reached: list[tuple[Pos, int | None]] = []
        self.final_reached_at: int | None = None
        self._final_dispatched = False

    def _validate_pos(self, pos: Pos, what: str, stage: int | None = None) -> None:
        layout = self.env.layout_for(stage or self.state.stage)
        if not layout.in_bounds(pos):
            raise ValueError(f"{what} {pos} is outside the grid")
        if pos in layout.walls:
            raise ValueError(f"{what} {pos} is a wall")

    @property
    def done(self) -> bool:
        if self.steps >= self.total_horizon:
            return True
        if self.env.family == "keydoor":
            return self.env.is_done(self.state)
        return (self.final_reached_at is not None and not self.queue and self.current is None)

    @property
    def success(self) -> bool:
        if self.env.family == "keydoor":
            return self.env.is_done(self.state) and self.steps <= self.total_horizon
        return self.final_reached_at is not None

    def place_goal(self, g: Pos) -> None:
        g = (int(g[0]), int(g[1]))
        self._validate_pos(g, "goal")
        self.queue.append(g)

    def clear_goals(self) -> None:
        self.queue.clear()
        self.current = None

    def _dispatch(self) -> None:
        """Select the nearest pending sub-goal (then the final target)."""
        oracle = self.env.oracle(self.state.stage)
        while self.current is None and self.queue:
            dists = [oracle.dist(self.state.pos, g) for g in self.queue]
            best = min(range(len(self.queue)), key=lambda i: (dists[i] < 0, dists[i], i))
            g = self.queue.pop(best)
            d = dists[best]
            if d < 0:
                warnings.warn(f"sub-goal {g} unreachable from {self.state.pos}; marked timed out",
                              RuntimeWarning, stacklevel=3)
                self.reached.append((g, None))
            elif d == 0:
                self.reached.append((g, self.steps))
            else:
                self.current = g
                self._budget_left = self.per_subgoal_budget if self.per_subgoal_budget \
                    else max(DEFAULT_BUDGET_FLOOR, DEFAULT_BUDGET_FACTOR * d)
        if (self.current is None and not self.queue and self.final_target
                and not self._final_dispatched and self.env.family != "keydoor"):
            d = oracle.dist(self.state.pos, self.final_target)
            if d == 0:
                self.final_reached_at = self.steps
                self._final_dispatched = True
            elif d < 0:
                warnings.warn(f"final target {self.final_target} unreachable", RuntimeWarning, stacklevel=3)
                self._final_dispatched = True
            else:
                self.current = self.final_target
                self._budget_left = self.total_horizon - self.steps
                self._final_dispatched = True

    def step(self) -> dict:
        """Advance one tick; returns what happened (idle / moved / reach events)."""
        if self.done:
            raise RuntimeError("mission is finished")
        if self.current is None:
            self._dispatch()
        if self.current is None:
            return {"idle": True, "step": self.steps, "pos": self.state.pos}

        probs = self.agent.sil.action_probs(self.agent.encode(self.env, self.state, self.current))
        if self.greedy:
            a = int(np.argmax(probs))
        else:
            a = int(self._rng.choice(len(probs), p=probs / probs.sum()))
        out = self.env.step(self.state, a)
        self.state = out.next
        self.steps += 1
        self.trace.append(self.state.pos)
        info = {"idle": False, "step": self.steps, "pos": self.state.pos,
                "action": int(a), "event": int(out.event), "goal": self.current}

        goal_hit = self.state.pos == self.current or (
            self.env.family == "keydoor" and out.event == Event.GOAL)
        if goal_hit:
            if self.current == self.final_target and self.env.family != "keydoor":
                self.final_reached_at = self.steps
            else:
                self.reached.append((self.current, self.steps))
            info["reached_goal"] = self.current
            self.current = None
        else:
            self._budget_left -= 1
            if self._budget_left <= 0:
                self.reached.append((self.current, None))
                info["timed_out_goal"] = self.current
                self.current = None
        return info

    def run_to_completion(self) -> None:
        while not self.done:
            info = self.step()
            if info.get("idle") and self.current is None and not self.queue:
                break  # nothing left to pursue

    def visit_counts(self) -> np.ndarray:
        grid = np.zeros((self.env.height, self.env.width), dtype=np.int64)
        for x, y in self.trace:
            grid[y, x] += 1
        return grid


def scenario_env(scenario: Scenario) -> GridEnv:
    """Environment for mission runs: no terminal cell, horizon past the mission's."""
    base = resolve_env(scenario.layout, terminal_on_target=False)
    horizon = max(base.horizon, (scenario.total_horizon or 0) + 1)
    return resolve_env(scenario.layout, horizon=horizon, terminal_on_target=False)


def run_scenario(agent: SubgoalAgent, scenario: Scenario, seed: int = 0,
                 env: GridEnv | None = None, greedy: bool = False) -> ScenarioResult:
    """Execute a full waypoint mission and collect metrics."""
    if env is None:
        env = scenario_env(scenario)
    if env.family == "keydoor":
        return _run_keydoor(agent, scenario, seed, env, greedy)
    driver = MissionDriver(env, agent, start=scenario.start,
                           final_target=scenario.final_target or env.stages[0].target,
                           per_subgoal_budget=scenario.per_subgoal_budget,
                           total_horizon=scenario.total_horizon or env.horizon,
                           greedy=greedy, seed=seed)
    for g in scenario.subgoals:
        driver.place_goal(g)
    driver.run_to_completion()
    return ScenarioResult(name=scenario.name, seed=seed, reached=driver.reached,
                          total_steps=driver.steps, success=driver.success,
                          trace=driver.trace, visit_counts=driver.visit_counts())


def _run_keydoor(agent: SubgoalAgent, scenario: Scenario, seed: int, env: GridEnv,
                 greedy: bool) -> ScenarioResult:
    """Key-door mission: per stage, user sub-goals first, then the bonus
    point, then the door; the env's own dynamics advance the stages.
    """
    driver = MissionDriver(env, agent, start=scenario.start, final_target=None,
                           per_subgoal_budget=scenario.per_subgoal_budget,
                           total_horizon=scenario.total_horizon or env.horizon,
                           greedy=greedy, seed=seed)
    stage_subgoals = scenario.stage_subgoals or [list(scenario.subgoals) for _ in env.stages]
    phase = None  # (stage, "user"|"bonus"|"door")
    while not driver.done:
        stage = driver.state.stage
        layout = env.layout_for(stage)
        if driver.current is None and not driver.queue:
            user = stage_subgoals[stage - 1] if stage - 1 < len(stage_subgoals) else []
            if phase is None or phase[0] != stage:
                phase = (stage, "user")
                for g in user:
                    try:
                        driver.place_goal(g)
                    except ValueError:
                        warnings.warn(f"stage {stage} waypoint {g} invalid; skipped",
                                      RuntimeWarning, stacklevel=2)
                if not user:
                    phase = (stage, "bonus")
            elif phase[1] == "user":
                phase = (stage, "bonus")
            if phase[1] in ("bonus", "door"):
                # the door only opens once the key is held: keep retrying the
                # bonus cell until then, even if an attempt timed out
                if layout.bonus is not None and not driver.state.has_bonus:
                    phase = (stage, "bonus")
                    driver.place_goal(layout.bonus)
                else:
                    phase = (stage, "door")
                    driver.place_goal(layout.target)
        info = driver.step()
        if info.get("idle") and driver.current is None and not driver.queue:
            break
    return ScenarioResult(name=scenario.name, seed=seed, reached=driver.reached,
                          total_steps=driver.steps, success=driver.success,
                          trace=driver.trace, visit_counts=driver.visit_counts())


# -- suites and comparison ------------------------------------------------


def compare_shaping(agent_shaped: SubgoalAgent, agent_unshaped: SubgoalAgent,
                    scenarios: list[Scenario], seeds: list[int],
                    env: GridEnv | None = None) -> dict:
    """Paired step counts over a scenario suite; failures cost the horizon."""
    if not scenarios:
        raise ValueError("scenario suite is empty")
    rows = []
    for sc in scenarios:
        for seed in seeds:
            res_s = run_scenario(agent_shaped, sc, seed=seed, env=env)
            res_u = run_scenario(agent_unshaped, sc, seed=seed, env=env)
            rows.append({
                "scenario": sc.name,
                "seed": seed,
                "steps_shaped": res_s.total_steps if res_s.success else _horizon(sc, env),
                "steps_unshaped": res_u.total_steps if res_u.success else _horizon(sc, env),
                "success_shaped": res_s.success,
                "success_unshaped": res_u.success,
            })
    mean_s = float(np.mean([r["steps_shaped"] for r in rows]))
    mean_u = float(np.mean([r["steps_unshaped"] for r in rows]))
    return {
        "rows": rows,
        "mean_steps_shaped": mean_s,
        "mean_steps_unshaped": mean_u,
        "relative_reduction": (mean_u - mean_s) / mean_u if mean_u > 0 else 0.0,
        "success_rate_shaped": float(np.mean([r["success_shaped"] for r in rows])),
        "success_rate_unshaped": float(np.mean([r["success_unshaped"] for r in rows])),
    }


def _horizon(sc: Scenario, env: GridEnv | None) -> int:
    if sc.total_horizon:
        return sc.total_horizon
    return env.horizon if env is not None else 1000


def make_suite(env: GridEnv, n: int = 20, seed: int = 2024, layout_name: str = "simple20") -> list[Scenario]:
    """Generate a mixed suite: corner tours, reversed start/target, round trips."""
    rng = np.random.default_rng(seed)
    layout = env.stages[0]
    w, h = layout.width, layout.height
    corners = [(1, 1), (w - 2, 1), (1, h - 2), (w - 2, h - 2)]
    free = [(x, y) for y in range(h) for x in range(w) if (x, y) not in layout.walls]

    def sample_cells(k: int, avoid: set[Pos]) -> list[Pos]:
        out: list[Pos] = []
        while len(out) < k:
            c = free[rng.integers(len(free))]
            if c not in avoid and all(abs(c[0] - o[0]) + abs(c[1] - o[1]) >= 3 for o in out):
                out.append(c)
        return out

    scenarios = []
    for i in range(n):
        kind = i % 4
        if kind == 0:  # corner-to-corner tour
            start, target = corners[i % 4], corners[(i + 2) % 4]
            goals = sample_cells(3, {start, target})
        elif kind == 1:  # reversed start/target
            start, target = layout.target, layout.start
            goals = sample_cells(3, {start, target})
        elif kind == 2:  # round trip
            start = corners[(i + 1) % 4]
            target = start
            goals = sample_cells(4, {start})
        else:  # random tour
            cells = sample_cells(5, set())
            start, target = cells[0], cells[1]
            goals = cells[2:]
        scenarios.append(Scenario(
            name=f"scenario_{i:02d}_{['tour', 'reversed', 'roundtrip', 'random'][kind]}",
            layout=layout_name, start=start, subgoals=goals, final_target=target,
            total_horizon=60 * (len(goals) + 1),
        ))
    return scenarios


def round_trip_scenario(env: GridEnv, n_waypoints: int = 4, seed: int = 7,
                        layout_name: str = "simple20") -> Scenario:
    rng = np.random.default_rng(seed)
    layout = env.stages[0]
    start = layout.start
    free = [(x, y) for y in range(layout.height) for x in range(layout.width)
            if (x, y) not in layout.walls and abs(x - start[0]) + abs(y - start[1]) >= 5]
    goals: list[Pos] = []
    while len(goals) < n_waypoints:
        c = free[rng.integers(len(free))]
        if all(abs(c[0] - o[0]) + abs(c[1] - o[1]) >= 4 for o in goals):
            goals.append(c)
    return Scenario(name="round_trip", layout=layout_name, start=start, subgoals=goals,
                    final_target=start, total_horizon=80 * (n_waypoints + 1))


# -- persistence -----------------------------------------------------------


BUILTIN_SUITES = ("simple20_suite", "simple20_roundtrip", "keydoor_mission")


def load_scenarios(path: str | Path) -> list[Scenario]:
    if isinstance(path, str) and path in BUILTIN_SUITES:
        from importlib import resources
        obj = json.loads(resources.files("gridgoal").joinpath(
            f"data/scenarios/{path}.json").read_text())
    else:
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise LayoutError(f"cannot read scenario file {path}: {exc}") from exc
    if isinstance(obj, dict) and "scenarios" in obj:
        layout = obj.get("layout", "simple20")
        return [Scenario.from_dict(o, layout=layout) for o in obj["scenarios"]]
    if isinstance(obj, list):
        return [Scenario.from_dict(o) for o in obj]
    return [Scenario.from_dict(obj)]


def builtin_suite_names() -> tuple[str, ...]:
    return BUILTIN_SUITES


def save_scenarios(path: str | Path, scenarios: list[Scenario], layout: str | None = None) -> None:
    if layout is not None:
        payload = {"layout": layout,
                   "scenarios": [sc.to_dict(with_layout=False) for sc in scenarios]}
    else:
        payload = [sc.to_dict() for sc in scenarios]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def export_artifacts(results: list[ScenarioResult], out_dir: str | Path) -> list[Path]:
    """Write trace JSON + heatmap CSV per result and one summary CSV.

    Field order and formatting are fixed so re-exports are byte-identical.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create artifact directory {out}: {exc}") from exc
    written = []
    for res in results:
        stem = f"{res.name}_s{res.seed}"
        trace_path = out / f"{stem}_trace.json"
        trace_path.write_text(json.dumps(res.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
        heat_path = out / f"{stem}_heatmap.csv"
        lines = [",".join(str(v) for v in row) for row in res.visit_counts]
        heat_path.write_text("\n".join(lines) + "\n")
        written.extend([trace_path, heat_path])
    summary = out / "summary.csv"
    rows = ["name,seed,total_steps,success,n_reached,n_timed_out"]
    for res in sorted(results, key=lambda r: (r.name, r.seed)):
        timed_out = sum(1 for _, s in res.reached if s is None)
        rows.append(f"{res.name},{res.seed},{res.total_steps},{int(res.success)},"
                    f"{len(res.reached) - timed_out},{timed_out}")
    summary.write_text("\n".join(rows) + "\n")
    written.append(summary)
    return written
