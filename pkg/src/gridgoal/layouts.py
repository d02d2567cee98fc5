"""Layout JSON files and the builtin environments.

A layout file is a JSON object (width, height, walls, start, target, optional
bonus/penalty, rewards map); a stage set for the key-door family is a JSON
array of such objects. Builtin names: "simple20" (20x20 open grid) and
"keydoor4" (four 10x10 stages), shipped as package data. The shipped key-door
stages are an approximation: the reference drawing gives no coordinates, only
the kind of per-stage arrangement (start, bonus, wall bar, door).
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from gridgoal.grid import GridEnv, GridLayout, LayoutError

_REQUIRED = ("width", "height", "start", "target")
_OPTIONAL = ("walls", "bonus", "penalty", "rewards")
BUILTIN_LAYOUTS = ("simple20", "keydoor4")


def _as_pos(value, name: str) -> tuple[int, int]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(c, int) for c in value)):
        raise LayoutError(f"{name} must be an [x, y] pair of integers, got {value!r}")
    return (value[0], value[1])


def layout_from_dict(obj: dict) -> GridLayout:
    if not isinstance(obj, dict):
        raise LayoutError(f"layout must be a JSON object, got {type(obj).__name__}")
    for key in _REQUIRED:
        if key not in obj:
            raise LayoutError(f"missing required field {key!r}")
    for key in obj:
        if key not in _REQUIRED + _OPTIONAL:
            raise LayoutError(f"unknown field {key!r}")
    for key in ("width", "height"):
        if not isinstance(obj[key], int) or obj[key] <= 0:
            raise LayoutError(f"{key} must be a positive integer, got {obj[key]!r}")
    walls = obj.get("walls", [])
    if not isinstance(walls, list):
        raise LayoutError(f"walls must be a list of [x, y] pairs, got {type(walls).__name__}")
    rewards = obj.get("rewards", {})
    if not isinstance(rewards, dict):
        raise LayoutError(f"rewards must be an object, got {type(rewards).__name__}")
    layout = GridLayout(
        width=obj["width"],
        height=obj["height"],
        start=_as_pos(obj["start"], "start"),
        target=_as_pos(obj["target"], "target"),
        walls=frozenset(_as_pos(w, f"walls[{i}]") for i, w in enumerate(walls)),
        bonus=_as_pos(obj["bonus"], "bonus") if obj.get("bonus") is not None else None,
        penalty=_as_pos(obj["penalty"], "penalty") if obj.get("penalty") is not None else None,
        rewards={str(k): float(v) for k, v in rewards.items()},
    )
    layout.validate()
    return layout


def layout_to_dict(layout: GridLayout) -> dict:
    obj = {
        "width": layout.width,
        "height": layout.height,
        "start": list(layout.start),
        "target": list(layout.target),
        "walls": sorted([list(w) for w in layout.walls]),
        "rewards": dict(sorted(layout.rewards.items())),
    }
    if layout.bonus is not None:
        obj["bonus"] = list(layout.bonus)
    if layout.penalty is not None:
        obj["penalty"] = list(layout.penalty)
    return obj


def load_stages(source: str | Path | dict | list) -> list[GridLayout]:
    """Load one layout or a stage array from a path, dict, or list."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            obj = json.loads(path.read_text())
        except OSError as exc:
            raise LayoutError(f"cannot read layout file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise LayoutError(f"layout file {path} is not valid JSON: {exc}") from exc
    else:
        obj = source
    if isinstance(obj, list):
        if not obj:
            raise LayoutError("stage array is empty")
        return [layout_from_dict(o) for o in obj]
    return [layout_from_dict(obj)]


def save_stages(path: str | Path, stages: list[GridLayout]) -> None:
    objs = [layout_to_dict(s) for s in stages]
    payload = objs[0] if len(objs) == 1 else objs
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _builtin_json(name: str):
    ref = resources.files("gridgoal").joinpath(f"data/layouts/{name}.json")
    return json.loads(ref.read_text())


def resolve_env(source: str | Path, horizon: int | None = None, terminal_on_target: bool = True) -> GridEnv:
    """Build a GridEnv from a builtin name or a layout file path."""
    if isinstance(source, str) and source in BUILTIN_LAYOUTS:
        stages = load_stages(_builtin_json(source))
        family = "keydoor" if source.startswith("keydoor") else "simple"
    else:
        stages = load_stages(source)
        family = "keydoor" if len(stages) > 1 else "simple"
    return GridEnv(stages, family=family, horizon=horizon, terminal_on_target=terminal_on_target)
