"""Pure-numpy fallback for the hot kernels.

Selected by GRIDGOAL_NO_NUMBA=1 (or when numba is unavailable). Matches the
numba backend's contracts: same arguments, same outputs, and the same legacy
MT19937 draw sequence for the rollout so a fixed seed produces the same
episode on either backend.
"""

import numpy as np

backend_name = "numpy"

EV_NONE = 0
EV_BONUS = 1
EV_PENALTY = 2
EV_GOAL = 3
EV_BLOCKED = 4

_DX = np.array([0, 0, -1, 1], dtype=np.int32)
_DY = np.array([-1, 1, 0, 0], dtype=np.int32)


def bfs_fill(walls, sx, sy):
    """4-connected BFS distances from (sx, sy); -1 marks unreachable cells."""
    h, w = walls.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    open_ = walls == 0
    if not open_[sy, sx]:
        return dist
    dist[sy, sx] = 0
    frontier = np.zeros((h, w), dtype=bool)
    frontier[sy, sx] = True
    d = 0
    while frontier.any():
        d += 1
        nxt = np.zeros((h, w), dtype=bool)
        nxt[1:, :] |= frontier[:-1, :]
        nxt[:-1, :] |= frontier[1:, :]
        nxt[:, 1:] |= frontier[:, :-1]
        nxt[:, :-1] |= frontier[:, 1:]
        nxt &= open_ & (dist < 0)
        dist[nxt] = d
        frontier = nxt
    return dist


def discounted_returns(rewards, gamma):
    n = rewards.shape[0]
    out = np.empty(n, dtype=np.float64)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def adam_step(params, grads, m, v, step, lr, beta1, beta2, eps):
    b1t = 1.0 - beta1 ** step
    b2t = 1.0 - beta2 ** step
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    params -= lr * (m / b1t) / (np.sqrt(v / b2t) + eps)


def _forward1(params, sizes, woff, boff, act_tag, x):
    h = x
    n_layers = len(sizes) - 1
    for li in range(n_layers):
        fan_in = int(sizes[li])
        fan_out = int(sizes[li + 1])
        w = params[woff[li] : woff[li] + fan_in * fan_out].reshape(fan_in, fan_out)
        b = params[boff[li] : boff[li] + fan_out]
        h = h @ w + b
        if li < n_layers - 1:
            h = np.tanh(h) if act_tag == 0 else np.maximum(h, 0.0)
    return h


def _encode1(family, x, y, key, stage, width, height):
    if family == 1:
        out = np.zeros(7, dtype=np.float64)
        out[0] = x / width
        out[1] = y / height
        out[2] = 1.0 if key else 0.0
        out[2 + stage] = 1.0
        return out
    return np.array([x / width, y / height], dtype=np.float64)


def simulate_episode(
    pol_params, pol_sizes, pol_woff, pol_boff, pol_act,
    rt_params, rp_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act,
    rnd_scale,
    walls, starts, targets, bonuses, penalties,
    reward_goal, reward_bonus, reward_penalty,
    family, horizon, seed, greedy,
):
    rng = np.random.RandomState(seed)
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

    rnd_out = int(rnd_sizes[-1])
    stage = 1
    x, y = int(starts[0, 0]), int(starts[0, 1])
    key = 0
    penalty_hit = 0
    xs[0], ys[0], stages[0], keys[0] = x, y, stage, key
    reached = False
    t = 0

    while t < horizon:
        si = stage - 1
        enc = _encode1(family, x, y, key, stage, width, height)
        logits = _forward1(pol_params, pol_sizes, pol_woff, pol_boff, pol_act, enc)
        e = np.exp(logits - logits.max())
        probs = e / e.sum()
        if greedy:
            a = int(np.argmax(probs))
        else:
            u = rng.random_sample()
            acc = 0.0
            a = 3
            for j in range(4):
                acc += probs[j]
                if u < acc:
                    a = j
                    break

        nx, ny = x + int(_DX[a]), y + int(_DY[a])
        ev = EV_NONE
        rew = 0.0
        done = False
        if nx < 0 or nx >= width or ny < 0 or ny >= height or walls[si, ny, nx] != 0:
            ev = EV_BLOCKED
        elif family == 0:
            x, y = nx, ny
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
                        x, y = nx, ny
                        done = True
                        reached = True
                    else:
                        stage += 1
                        x, y = int(starts[stage - 1, 0]), int(starts[stage - 1, 1])
                        key = 0
                        penalty_hit = 0
                else:
                    ev = EV_BLOCKED  # door without key: no transition
            else:
                x, y = nx, ny
                if nx == bonuses[si, 0] and ny == bonuses[si, 1] and key == 0:
                    rew += reward_bonus
                    key = 1
                    ev = EV_BONUS
                elif nx == penalties[si, 0] and ny == penalties[si, 1] and penalty_hit == 0:
                    rew += reward_penalty
                    penalty_hit = 1
                    ev = EV_PENALTY

        enc = _encode1(family, x, y, key, stage, width, height)
        tgt = _forward1(rt_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act, enc)
        pred = _forward1(rp_params, rnd_sizes, rnd_woff, rnd_boff, rnd_act, enc)
        diff = tgt - pred
        bonus = rnd_scale * float(diff @ diff) / rnd_out

        actions[t] = a
        r_ext[t] = rew
        r_bonus[t] = bonus
        events[t] = ev
        t += 1
        xs[t], ys[t], stages[t], keys[t] = x, y, stage, key
        if done:
            break

    return xs[: t + 1], ys[: t + 1], stages[: t + 1], keys[: t + 1], actions[:t], r_ext[:t], r_bonus[:t], events[:t], t, reached
