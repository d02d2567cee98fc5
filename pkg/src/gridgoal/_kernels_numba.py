"""Numba-compiled hot kernels.

Loop-style implementations of the per-step episode rollout, BFS distance
fields, discounted returns, and the flat Adam update. The numpy fallback in
``_kernels_numpy`` implements the same contracts (including the legacy
MT19937 draw sequence, which numba's np.random reproduces exactly).
"""

import numpy as np
from numba import njit

backend_name = "numba"

# event codes shared with grid.Event
EV_NONE = 0
EV_BONUS = 1
EV_PENALTY = 2
EV_GOAL = 3
EV_BLOCKED = 4

# action deltas, index = Action value (UP, DOWN, LEFT, RIGHT)
_DX = np.array([0, 0, -1, 1], dtype=np.int32)
_DY = np.array([-1, 1, 0, 0], dtype=np.int32)


@njit(cache=True)
def bfs_fill(walls, sx, sy):
    """4-connected BFS distances from (sx, sy); -1 marks unreachable cells."""
    h, w = walls.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if walls[sy, sx] != 0:
        return dist
    qx = np.empty(h * w, dtype=np.int32)
    qy = np.empty(h * w, dtype=np.int32)
    qx[0] = sx
    qy[0] = sy
    dist[sy, sx] = 0
    head = 0
    tail = 1
    while head < tail:
        x = qx[head]
        y = qy[head]
        head += 1
        d = dist[y, x] + 1
        for k in range(4):
            nx = x + _DX[k]
            ny = y + _DY[k]
            if 0 <= nx < w and 0 <= ny < h and walls[ny, nx] == 0 and dist[ny, nx] < 0:
                dist[ny, nx] = d
                qx[tail] = nx
                qy[tail] = ny
                tail += 1
    return dist


@njit(cache=True)
def discounted_returns(rewards, gamma):
    n = rewards.shape[0]
    out = np.empty(n, dtype=np.float64)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


@njit(cache=True)
def adam_step(params, grads, m, v, step, lr, beta1, beta2, eps):
    b1t = 1.0 - beta1 ** step
    b2t = 1.0 - beta2 ** step
    for i in range(params.shape[0]):
        g = grads[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        params[i] -= lr * (m[i] / b1t) / (np.sqrt(v[i] / b2t) + eps)


@njit(cache=True, inline="always")
def _forward1(params, sizes, woff, boff, act_tag, x, buf_a, buf_b):
    """Single-sample MLP forward over flat params; linear output head.

    Writes the output into buf_a[:sizes[-1]] and returns its width.
    """
    n_in = sizes[0]
    for i in range(n_in):
        buf_a[i] = x[i]
    src = buf_a
    dst = buf_b
    n_layers = sizes.shape[0] - 1
    flips = 0
    for li in range(n_layers):
        fan_in = sizes[li]
        fan_out = sizes[li + 1]
        wo = woff[li]
        bo = boff[li]
        for j in range(fan_out):
            acc = params[bo + j]
            base = wo + j
            for k in range(fan_in):
                acc += src[k] * params[base + k * fan_out]
            if li < n_layers - 1:
                if act_tag == 0:
                    acc = np.tanh(acc)
                elif acc < 0.0:
                    acc = 0.0
            dst[j] = acc
        tmp = src
        src = dst
        dst = tmp
        flips += 1
    if flips % 2 == 1:
        # result currently lives in buf_b; move it to buf_a
        for j in range(sizes[n_layers]):
            buf_a[j] = buf_b[j]
    return sizes[n_layers]


@njit(cache=True, inline="always")
def _encode1(family, x, y, key, stage, width, height, out):
    out[0] = x / width
    out[1] = y / height
    if family == 1:
        out[2] = 1.0 if key != 0 else 0.0
        for s in range(4):
            out[3 + s] = 1.0 if stage == s + 1 else 0.0
        return 7
    return 2


@njit(cache=True)
def simulate_episode(
    pol_params, pol_sizes, pol_woff, pol_boff, pol_act,
    rt_params, rp_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act,
    rnd_scale,
    walls, starts, targets, bonuses, penalties,
    reward_goal, reward_bonus, reward_penalty,
    family, horizon, seed, greedy,
):
    """Run one episode: sample actions from the softmax policy, step the grid
    dynamics, and attach the prediction-error exploration bonus of each
    arrived-at state. Returns the full trace plus per-step annotations.

    Trace arrays have length n+1 (state before each step, plus the final
    state); per-step arrays have length n.
    """
    np.random.seed(seed)
    n_stages = walls.shape[0]
    height = walls.shape[1]
    width = walls.shape[2]

    xs = np.empty(horizon + 1, dtype=np.int32)
    ys = np.empty(horizon + 1, dtype=np.int32)
    stages = np.empty(horizon + 1, dtype=np.int32)
    keys = np.empty(horizon + 1, dtype=np.uint8)
    actions = np.empty(horizon, dtype=np.int32)
    r_ext = np.empty(horizon, dtype=np.float64)
    r_bonus = np.empty(horizon, dtype=np.float64)
    events = np.empty(horizon, dtype=np.int8)

    max_w = 0
    for i in range(pol_sizes.shape[0]):
        if pol_sizes[i] > max_w:
            max_w = pol_sizes[i]
    for i in range(rnd_sizes.shape[0]):
        if rnd_sizes[i] > max_w:
            max_w = rnd_sizes[i]
    buf_a = np.empty(max_w, dtype=np.float64)
    buf_b = np.empty(max_w, dtype=np.float64)
    buf_t = np.empty(max_w, dtype=np.float64)
    enc = np.empty(16, dtype=np.float64)
    probs = np.empty(4, dtype=np.float64)

    stage = 1
    x = starts[0, 0]
    y = starts[0, 1]
    key = 0
    penalty_hit = 0
    xs[0] = x
    ys[0] = y
    stages[0] = stage
    keys[0] = key
    reached = False
    t = 0

    while t < horizon:
        si = stage - 1
        enc_n = _encode1(family, x, y, key, stage, width, height, enc)
        _forward1(pol_params, pol_sizes, pol_woff, pol_boff, pol_act, enc[:enc_n], buf_a, buf_b)
        # softmax with max-shift
        mx = buf_a[0]
        for j in range(1, 4):
            if buf_a[j] > mx:
                mx = buf_a[j]
        z = 0.0
        for j in range(4):
            probs[j] = np.exp(buf_a[j] - mx)
            z += probs[j]
        for j in range(4):
            probs[j] /= z
        if greedy:
            a = 0
            best = probs[0]
            for j in range(1, 4):
                if probs[j] > best:
                    best = probs[j]
                    a = j
        else:
            u = np.random.random()
            acc = 0.0
            a = 3
            for j in range(4):
                acc += probs[j]
                if u < acc:
                    a = j
                    break

        nx = x + _DX[a]
        ny = y + _DY[a]
        ev = EV_NONE
        rew = 0.0
        done = False
        if nx < 0 or nx >= width or ny < 0 or ny >= height or walls[si, ny, nx] != 0:
            ev = EV_BLOCKED
        else:
            if family == 0:
                x = nx
                y = ny
                if nx == targets[si, 0] and ny == targets[si, 1]:
                    rew += reward_goal
                    ev = EV_GOAL
                    done = True
                    reached = True
                elif nx == bonuses[si, 0] and ny == bonuses[si, 1] and key == 0:
                    rew += reward_bonus
                    key = 1
                    ev = EV_BONUS
                elif nx == penalties[si, 0] and ny == penalties[si, 1] and penalty_hit == 0:
                    rew += reward_penalty
                    penalty_hit = 1
                    ev = EV_PENALTY
            else:
                if nx == targets[si, 0] and ny == targets[si, 1]:
                    if key != 0:
                        rew += reward_goal
                        ev = EV_GOAL
                        if stage == n_stages:
                            x = nx
                            y = ny
                            done = True
                            reached = True
                        else:
                            stage += 1
                            x = starts[stage - 1, 0]
                            y = starts[stage - 1, 1]
                            key = 0
                            penalty_hit = 0
                    else:
                        ev = EV_BLOCKED  # door without key: no transition
                else:
                    x = nx
                    y = ny
                    if nx == bonuses[si, 0] and ny == bonuses[si, 1] and key == 0:
                        rew += reward_bonus
                        key = 1
                        ev = EV_BONUS
                    elif nx == penalties[si, 0] and ny == penalties[si, 1] and penalty_hit == 0:
                        rew += reward_penalty
                        penalty_hit = 1
                        ev = EV_PENALTY

        enc_n = _encode1(family, x, y, key, stage, width, height, enc)
        _forward1(rt_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act, enc[:enc_n], buf_a, buf_b)
        out_n = rnd_sizes[rnd_sizes.shape[0] - 1]
        for j in range(out_n):
            buf_t[j] = buf_a[j]
        _forward1(rp_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act, enc[:enc_n], buf_a, buf_b)
        err = 0.0
        for j in range(out_n):
            d = buf_t[j] - buf_a[j]
            err += d * d
        bonus = rnd_scale * err / out_n

        actions[t] = a
        r_ext[t] = rew
        r_bonus[t] = bonus
        events[t] = ev
        t += 1
        xs[t] = x
        ys[t] = y
        stages[t] = stage
        keys[t] = key
        if done:
            break

    return xs[: t + 1], ys[: t + 1], stages[: t + 1], keys[: t + 1], actions[:t], r_ext[:t], r_bonus[:t], events[:t], t, reached
