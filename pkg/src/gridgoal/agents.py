"""Base RL agent: softmax policy + value net trained by self-imitation.

The update imitates only stored transitions whose return beats the current
value estimate: with advantage clip (x)+ = max(x, 0),

    L = E[ -log pi(a|s) * (R - V(s))+  +  beta * 0.5 * ((R - V(s))+)^2 ]

The clipped advantage is treated as a constant weight inside the policy term
(no gradient flows through V there). An exploration bonus comes from a
random-distillation pair: a frozen random target net and a predictor trained
toward it; the bonus is their scaled mean squared output difference.
"""

from __future__ import annotations

import numpy as np

from gridgoal.grid import Action
from gridgoal.nets import Adam, Mlp


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class SilAgent:
    """Stochastic policy over the 4 grid actions plus a scalar value net."""

    def __init__(self, state_dim: int, hidden=(64, 64), beta: float = 0.01,
                 lr: float = 3e-4, value_lr: float | None = None, seed: int = 0):
        if beta < 0 or not np.isfinite(beta):
            raise ValueError(f"beta must be finite and >= 0, got {beta}")
        ss = np.random.SeedSequence(seed)
        s_pol, s_val, s_act = ss.spawn(3)
        self.policy = Mlp([state_dim, *hidden, len(Action)], hidden="tanh", head="softmax",
                          seed=int(s_pol.generate_state(1)[0]), zero_head=True)
        self.value = Mlp([state_dim, *hidden, 1], hidden="tanh", head="linear",
                         seed=int(s_val.generate_state(1)[0]), zero_head=True)
        self.beta = float(beta)
        # the clipped value loss only ever pushes V upward (function smoothness
        # then drags it past the return ceiling), and Adam's scale invariance
        # makes beta irrelevant to step size; a much slower value rate keeps V
        # below the returns so the imitation weights stay alive for the run
        self.opt_policy = Adam(self.policy, lr=lr)
        self.opt_value = Adam(self.value, lr=value_lr if value_lr is not None else lr / 3000.0)
        self._rng = np.random.default_rng(s_act)

    def action_probs(self, s: np.ndarray) -> np.ndarray:
        return self.policy.forward(s)

    def act(self, s: np.ndarray, greedy: bool = False) -> tuple[Action, float]:
        """Sample an action (argmax in greedy mode); returns its log-probability."""
        probs = self.policy.forward(np.asarray(s, dtype=np.float64))
        if greedy:
            a = int(np.argmax(probs))
        else:
            u = self._rng.random()
            acc = 0.0
            a = len(probs) - 1
            for j, p in enumerate(probs):
                acc += p
                if u < acc:
                    a = j
                    break
        return Action(a), float(np.log(max(probs[a], 1e-300)))

    def sil_loss(self, s: np.ndarray, a: np.ndarray, R: np.ndarray):
        """Clipped self-imitation loss and flat gradients for both nets.

        Samples with R <= V(s) contribute zero loss and zero gradient.
        """
        s = np.atleast_2d(np.asarray(s, dtype=np.float64))
        a = np.asarray(a, dtype=np.int64).ravel()
        R = np.asarray(R, dtype=np.float64).ravel()
        if s.shape[0] == 0:
            raise ValueError("sil_loss requires a non-empty batch")
        n = s.shape[0]

        probs, pol_cache = self.policy.forward_cached(s)
        v, val_cache = self.value.forward_cached(s)
        v = v[:, 0]
        adv = np.maximum(R - v, 0.0)  # constant weight: V not differentiated here

        logp = log_softmax(pol_cache[0][-1])[np.arange(n), a]
        loss_policy = float(np.mean(-logp * adv))
        loss_value = float(np.mean(0.5 * adv * adv))
        loss = loss_policy + self.beta * loss_value

        dlogits = probs.copy()
        dlogits[np.arange(n), a] -= 1.0
        dlogits *= (adv / n)[:, None]
        grad_policy = self.policy.backward_logits(pol_cache, dlogits)

        dv = (-self.beta * adv / n)[:, None]
        grad_value = self.value.backward_logits(val_cache, dv)
        return loss, (grad_policy, grad_value)

    def update(self, s: np.ndarray, a: np.ndarray, R: np.ndarray) -> float:
        loss, (gp, gv) = self.sil_loss(s, a, R)
        self.opt_policy.step(self.policy, gp)
        self.opt_value.step(self.value, gv)
        return loss


class RndPair:
    """Frozen random target net and a predictor distilled toward it."""

    def __init__(self, state_dim: int, hidden=(64,), out_dim: int = 32,
                 scale: float = 0.1, lr: float = 3e-4, seed: int = 0):
        if scale < 0:
            raise ValueError("bonus scale must be >= 0")
        ss = np.random.SeedSequence(seed)
        s_t, s_p = ss.spawn(2)
        self.target = Mlp([state_dim, *hidden, out_dim], hidden="tanh", head="linear",
                          seed=int(s_t.generate_state(1)[0]))
        self.predictor = Mlp([state_dim, *hidden, out_dim], hidden="tanh", head="linear",
                             seed=int(s_p.generate_state(1)[0]))
        self.scale = float(scale)
        self.opt = Adam(self.predictor, lr=lr)

    def bonus(self, s: np.ndarray) -> float:
        diff = self.target.forward(s) - self.predictor.forward(s)
        return self.scale * float(np.mean(diff * diff))

    def bonus_many(self, s: np.ndarray) -> np.ndarray:
        diff = self.target.forward(np.atleast_2d(s)) - self.predictor.forward(np.atleast_2d(s))
        return self.scale * np.mean(diff * diff, axis=1)

    def predictor_loss(self, s: np.ndarray) -> float:
        s = np.atleast_2d(np.asarray(s, dtype=np.float64))
        diff = self.predictor.forward(s) - self.target.forward(s)
        return float(np.mean(diff * diff))

    def update(self, s: np.ndarray) -> float:
        """One predictor step toward the frozen target on a state batch."""
        s = np.atleast_2d(np.asarray(s, dtype=np.float64))
        if s.shape[0] == 0:
            raise ValueError("rnd update requires a non-empty batch")
        tgt = self.target.forward(s)
        pred, cache = self.predictor.forward_cached(s)
        diff = pred - tgt
        loss = float(np.mean(diff * diff))
        dout = 2.0 * diff / diff.size
        self.opt.step(self.predictor, self.predictor.backward_logits(cache, dout))
        return loss
