"""Hot-kernel backend selection.

The loop-heavy kernels (episode rollout, BFS fields, return recursion, Adam)
are numba-compiled by default. Set GRIDGOAL_NO_NUMBA=1 to run the pure-numpy
fallback instead; both backends share contracts and seed-for-seed rollout
behavior. Batched MLP math stays vectorized numpy in either mode (BLAS wins
there — see benchmarks/kernel_bench.py).
"""

import os

_DISABLED = os.environ.get("GRIDGOAL_NO_NUMBA", "0") == "1"

if not _DISABLED:
    try:
        from gridgoal._kernels_numba import (  # noqa: F401
            EV_BLOCKED,
            EV_BONUS,
            EV_GOAL,
            EV_NONE,
            EV_PENALTY,
            adam_step,
            backend_name,
            bfs_fill,
            discounted_returns,
            simulate_episode,
        )
    except ImportError:
        _DISABLED = True

if _DISABLED:
    from gridgoal._kernels_numpy import (  # noqa: F401
        EV_BLOCKED,
        EV_BONUS,
        EV_GOAL,
        EV_NONE,
        EV_PENALTY,
        adam_step,
        backend_name,
        bfs_fill,
        discounted_returns,
        simulate_episode,
    )
