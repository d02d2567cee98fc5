import numpy as np
import pytest

from gridgoal.grid import GridEnv, GridLayout


@pytest.fixture
def open_grid() -> GridLayout:
    return GridLayout(20, 20, start=(17, 17), target=(2, 2))


@pytest.fixture
def small_grid() -> GridLayout:
    return GridLayout(6, 6, start=(5, 5), target=(0, 0))


@pytest.fixture
def walled_grid() -> GridLayout:
    # vertical bar with a gap at the bottom
    walls = frozenset((3, y) for y in range(0, 5))
    return GridLayout(7, 7, start=(0, 0), target=(6, 0), walls=walls)


@pytest.fixture
def split_grid() -> GridLayout:
    # full wall, two disconnected halves (start/target on the same side)
    walls = frozenset((3, y) for y in range(7))
    return GridLayout(7, 7, start=(0, 0), target=(1, 5), walls=walls)


@pytest.fixture
def env(open_grid) -> GridEnv:
    return GridEnv(open_grid, horizon=1000)


def bfs_reference(layout: GridLayout, src, dst):
    """Independent BFS oracle (dict + deque, no shared code with the package)."""
    from collections import deque

    if src == dst:
        return 0
    seen = {tuple(src): 0}
    q = deque([tuple(src)])
    while q:
        x, y = q.popleft()
        for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nxt = (x + dx, y + dy)
            if not (0 <= nxt[0] < layout.width and 0 <= nxt[1] < layout.height):
                continue
            if nxt in layout.walls or nxt in seen:
                continue
            seen[nxt] = seen[(x, y)] + 1
            if nxt == tuple(dst):
                return seen[nxt]
            q.append(nxt)
    return None


def finite_difference_grads(loss_fn, params: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss over a flat parameter vector."""
    grads = np.zeros_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + eps
        hi = loss_fn()
        params[i] = orig - eps
        lo = loss_fn()
        params[i] = orig
        grads[i] = (hi - lo) / (2 * eps)
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return float(np.max(np.abs(a - b) / denom))
