"""Inverse-dynamics model: which action moves one state to an adjacent one.

Trained supervised on forward transitions ((s_t, s_{t+1}) -> a_t). Reverse
trajectories query it with the arguments swapped — predict_inverse(s_next, s)
feeds the pair (s_next, s) to the forward-trained net, so the argmax is the
action predicted to transport s_next back to s. On a deterministic
4-connected grid that converges to the geometric inverse (Up<->Down,
Left<->Right), which the tests use as the oracle.
"""

from __future__ import annotations

import numpy as np

from gridgoal.agents import log_softmax
from gridgoal.grid import Action
from gridgoal.nets import Adam, Mlp


class NotTrainedError(RuntimeError):
    """The inverse model has not seen any training step yet."""


class InverseModel:
    def __init__(self, state_dim: int, hidden=(64, 64), lr: float = 3e-4, seed: int = 0):
        self.state_dim = int(state_dim)
        self.net = Mlp([2 * state_dim, *hidden, len(Action)], hidden="tanh", head="softmax", seed=seed, zero_head=True)
        self.opt = Adam(self.net, lr=lr)
        self.train_steps = 0

    @property
    def is_trained(self) -> bool:
        return self.train_steps > 0

    def _pair(self, s_from: np.ndarray, s_to: np.ndarray) -> np.ndarray:
        s_from = np.atleast_2d(np.asarray(s_from, dtype=np.float64))
        s_to = np.atleast_2d(np.asarray(s_to, dtype=np.float64))
        if s_from.shape != s_to.shape or s_from.shape[1] != self.state_dim:
            raise ValueError(f"state pair shapes {s_from.shape}/{s_to.shape} do not match state_dim {self.state_dim}")
        return np.concatenate([s_from, s_to], axis=1)

    def train_step(self, s_from: np.ndarray, s_to: np.ndarray, actions: np.ndarray) -> float:
        """One cross-entropy step on ((s_t, s_{t+1}) -> a_t) pairs."""
        actions = np.asarray(actions, dtype=np.int64).ravel()
        if actions.size == 0:
            raise ValueError("train_step requires a non-empty batch")
        x = self._pair(s_from, s_to)
        probs, cache = self.net.forward_cached(x)
        n = x.shape[0]
        logp = log_softmax(cache[0][-1])[np.arange(n), actions]
        loss = float(np.mean(-logp))
        dlogits = probs.copy()
        dlogits[np.arange(n), actions] -= 1.0
        dlogits /= n
        self.opt.step(self.net, self.net.backward_logits(cache, dlogits))
        self.train_steps += 1
        return loss

    def predict_proba(self, s_from: np.ndarray, s_to: np.ndarray) -> np.ndarray:
        return self.net.forward(self._pair(s_from, s_to))

    def predict_inverse(self, s_next: np.ndarray, s: np.ndarray, return_confidence: bool = False):
        """Action predicted to transport s_next to s (arguments intentionally
        reversed relative to the forward training pairs). Low-confidence
        predictions are still returned; pass return_confidence for the
        probability.
        """
        single = np.asarray(s_next).ndim == 1
        probs = np.atleast_2d(self.predict_proba(s_next, s))
        idx = np.argmax(probs, axis=1)
        if single:
            a = Action(int(idx[0]))
            return (a, float(probs[0, idx[0]])) if return_confidence else a
        if return_confidence:
            return idx.astype(np.int64), probs[np.arange(len(idx)), idx]
        return idx.astype(np.int64)

    def accuracy(self, s_from: np.ndarray, s_to: np.ndarray, actions: np.ndarray) -> float:
        probs = self.predict_proba(s_from, s_to)
        pred = np.argmax(np.atleast_2d(probs), axis=1)
        return float(np.mean(pred == np.asarray(actions).ravel()))
