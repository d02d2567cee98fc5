"""Episode records and FIFO replay memories.

Two replay buffers live in the trainer: D holds return-annotated transitions
for the final-goal policy, D_s holds goal-relabeled transitions for the
subgoal network. Both are column-oriented rings so minibatches come out as
ready-to-use arrays. Snapshots serialize to a small versioned binary file
(little-endian) for resumable training.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gridgoal import kernels
from gridgoal.grid import Pos

SNAPSHOT_MAGIC = b"GGRB"
SNAPSHOT_VERSION = 1


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool
    pos: Pos
    pos_next: Pos


@dataclass
class ReturnTransition:
    s: np.ndarray
    a: int
    R: float


@dataclass
class GoalTransition:
    sg: np.ndarray
    a: int
    r_shaped: float
    sg_next: np.ndarray
    done_g: bool


def compute_returns(episode: list[Transition], gamma: float) -> list[ReturnTransition]:
    """Backward discounted returns R_t = r_t + gamma * R_{t+1}, R_T = r_T."""
    if not episode:
        raise ValueError("compute_returns requires a non-empty episode")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    rewards = np.asarray([tr.r for tr in episode], dtype=np.float64)
    returns = kernels.discounted_returns(rewards, gamma)
    return [ReturnTransition(s=tr.s, a=tr.a, R=float(R)) for tr, R in zip(episode, returns)]


class ReplayBuffer:
    """Fixed-capacity FIFO ring over named columns with seeded sampling."""

    def __init__(self, capacity: int, schema: dict[str, tuple[tuple[int, ...], np.dtype]], seed: int = 0):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.schema = {name: (tuple(shape), np.dtype(dt)) for name, (shape, dt) in schema.items()}
        self._cols = {
            name: np.zeros((self.capacity, *shape), dtype=dt)
            for name, (shape, dt) in self.schema.items()
        }
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)
        self._head = 0  # next write slot
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, items: dict[str, np.ndarray]) -> None:
        """Append rows FIFO; evicts the oldest rows once at capacity."""
        if set(items) != set(self.schema):
            raise ValueError(f"columns {sorted(items)} do not match schema {sorted(self.schema)}")
        arrays = {k: np.asarray(v) for k, v in items.items()}
        counts = {a.shape[0] for a in arrays.values()}
        if len(counts) != 1:
            raise ValueError(f"ragged push: row counts {sorted(counts)}")
        n = counts.pop()
        if n == 0:
            return
        if n >= self.capacity:
            # only the newest `capacity` rows survive
            for k, a in arrays.items():
                self._cols[k][:] = a[n - self.capacity :]
            self._head = 0
            self._size = self.capacity
            return
        first = min(n, self.capacity - self._head)
        for k, a in arrays.items():
            self._cols[k][self._head : self._head + first] = a[:first]
            if first < n:
                self._cols[k][: n - first] = a[first:]
        self._head = (self._head + n) % self.capacity
        self._size = min(self._size + n, self.capacity)

    def sample(self, n: int) -> dict[str, np.ndarray]:
        """n uniform-with-replacement draws; deterministic for a fixed seed."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if n <= 0:
            raise ValueError("sample size must be positive")
        idx = self._rng.integers(0, self._size, size=n)
        return {k: col[idx] for k, col in self._cols.items()}

    def save(self, path: str | Path) -> None:
        header = {
            "capacity": self.capacity,
            "size": self._size,
            "head": self._head,
            "seed": self.seed,
            "rng_state": self._rng.bit_generator.state,
            "schema": {k: [list(shape), dt.str] for k, (shape, dt) in self.schema.items()},
            "columns": sorted(self.schema),
        }
        blob = json.dumps(header).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<I", SNAPSHOT_VERSION))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for name in header["columns"]:
                data = np.ascontiguousarray(self._cols[name])
                if data.dtype.byteorder == ">":
                    data = data.astype(data.dtype.newbyteorder("<"))
                fh.write(data.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBuffer":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != SNAPSHOT_MAGIC:
                raise ValueError(f"not a replay snapshot (magic {magic!r})")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {version}")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            schema = {k: (tuple(shape), np.dtype(dt)) for k, (shape, dt) in header["schema"].items()}
            buf = cls(header["capacity"], schema, seed=header["seed"])
            for name in header["columns"]:
                col = buf._cols[name]
                raw = fh.read(col.nbytes)
                if len(raw) != col.nbytes:
                    raise ValueError(f"snapshot truncated in column {name!r}")
                col[:] = np.frombuffer(raw, dtype=col.dtype).reshape(col.shape)
        buf._size = header["size"]
        buf._head = header["head"]
        buf._rng.bit_generator.state = header["rng_state"]
        return buf


def policy_buffer(capacity: int, state_dim: int, seed: int = 0) -> ReplayBuffer:
    """Replay D: (state, action, return) rows."""
    return ReplayBuffer(capacity, {
        "s": ((state_dim,), np.float64),
        "a": ((), np.int64),
        "R": ((), np.float64),
    }, seed=seed)


def subgoal_buffer(capacity: int, sg_dim: int, seed: int = 0) -> ReplayBuffer:
    """Replay D_s: goal-conditioned rows (state-goal, action, relabeled return)."""
    return ReplayBuffer(capacity, {
        "sg": ((sg_dim,), np.float64),
        "a": ((), np.int64),
        "r": ((), np.float64),
        "sg_next": ((sg_dim,), np.float64),
        "done_g": ((), np.bool_),
    }, seed=seed)
