"""Minimal feed-forward networks with analytic gradients.

All five networks in the engine (policy, value, subgoal policy/value, inverse
model, and the exploration-bonus pair) are instances of one Mlp shape: flat
float64 parameter vector, tanh/relu hidden layers, linear or softmax head.
The flat layout is shared with the rollout kernels, so a net trained here can
be handed to `kernels.simulate_episode` without copying.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from gridgoal import kernels

_HIDDEN_TAGS = {"tanh": 0, "relu": 1}
_HEADS = ("linear", "softmax")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Mlp:
    """Fully-connected network over a flat float64 parameter vector.

    Weights for layer i occupy params[woff[i] : woff[i] + fan_in*fan_out]
    (row-major, shape (fan_in, fan_out)); biases follow at boff[i].
    """

    def __init__(self, sizes, hidden: str = "tanh", head: str = "linear", seed: int = 0,
                 zero_head: bool = False):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if hidden not in _HIDDEN_TAGS:
            raise ValueError(f"hidden activation must be one of {sorted(_HIDDEN_TAGS)}")
        if head not in _HEADS:
            raise ValueError(f"head must be one of {_HEADS}")
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.hidden = hidden
        self.head = head
        self.zero_head = zero_head
        self._hidden_tag = _HIDDEN_TAGS[hidden]

        woff, boff = [], []
        off = 0
        for fi, fo in zip(sizes[:-1], sizes[1:]):
            woff.append(off)
            off += fi * fo
            boff.append(off)
            off += fo
        self.woff = np.asarray(woff, dtype=np.int64)
        self.boff = np.asarray(boff, dtype=np.int64)
        self.params = np.zeros(off, dtype=np.float64)
        if seed is not None:
            self.init_params(seed)

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    @property
    def in_dim(self) -> int:
        return int(self.sizes[0])

    @property
    def out_dim(self) -> int:
        return int(self.sizes[-1])

    def init_params(self, seed: int) -> None:
        """Scaled uniform fan-in init U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
        biases. With zero_head the output layer starts at zero, so a softmax
        head opens as the exactly-uniform distribution (a randomly initialized
        head carries a persistent action bias that cripples early exploration).
        """
        rng = np.random.default_rng(seed)
        last = len(self.sizes) - 2
        for li, (fi, fo) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if self.zero_head and li == last:
                w = np.zeros((int(fi), int(fo)))
            else:
                bound = 1.0 / np.sqrt(float(fi))
                w = rng.uniform(-bound, bound, size=(int(fi), int(fo)))
            self.params[self.woff[li] : self.woff[li] + fi * fo] = w.ravel()
            self.params[self.boff[li] : self.boff[li] + fo] = 0.0

    def weight(self, li: int) -> np.ndarray:
        fi, fo = int(self.sizes[li]), int(self.sizes[li + 1])
        return self.params[self.woff[li] : self.woff[li] + fi * fo].reshape(fi, fo)

    def bias(self, li: int) -> np.ndarray:
        fo = int(self.sizes[li + 1])
        return self.params[self.boff[li] : self.boff[li] + fo]

    def forward(self, x) -> np.ndarray:
        squeeze = np.asarray(x).ndim == 1
        out, _ = self.forward_cached(x)
        return out[0] if squeeze else out

    def forward_cached(self, x):
        """Forward pass keeping per-layer activations for backward().

        Returns (output, cache); output has softmax applied when the head is
        softmax. cache holds [input, h1, ..., logits] plus the output.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"input shape {x.shape} does not match in_dim {self.in_dim}")
        acts = [x]
        h = x
        n_layers = len(self.sizes) - 1
        for li in range(n_layers):
            h = h @ self.weight(li) + self.bias(li)
            if li < n_layers - 1:
                h = np.tanh(h) if self._hidden_tag == 0 else np.maximum(h, 0.0)
            acts.append(h)
        logits = acts[-1]
        out = softmax(logits) if self.head == "softmax" else logits
        return out, (acts, out)

    def backward(self, cache, dout) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. all parameters, given dL/d(output).

        For a softmax head the gradient is chained through the softmax
        Jacobian; use backward_logits() to supply dL/d(logits) directly.
        """
        if cache is None:
            raise ValueError("backward requires the cache from forward_cached")
        acts, out = cache
        dout = np.asarray(dout, dtype=np.float64)
        if dout.ndim == 1:
            dout = dout[None, :]
        if dout.shape != acts[-1].shape:
            raise ValueError(f"dout shape {dout.shape} does not match output {acts[-1].shape}")
        if self.head == "softmax":
            inner = (dout * out).sum(axis=1, keepdims=True)
            dlogits = out * (dout - inner)
        else:
            dlogits = dout
        return self.backward_logits(cache, dlogits)

    def backward_logits(self, cache, dlogits) -> np.ndarray:
        if cache is None:
            raise ValueError("backward requires the cache from forward_cached")
        acts, _ = cache
        dz = np.asarray(dlogits, dtype=np.float64)
        if dz.ndim == 1:
            dz = dz[None, :]
        if dz.shape != acts[-1].shape:
            raise ValueError(f"dlogits shape {dz.shape} does not match logits {acts[-1].shape}")
        grads = np.zeros_like(self.params)
        n_layers = len(self.sizes) - 1
        for li in range(n_layers - 1, -1, -1):
            h_in = acts[li]
            fi, fo = int(self.sizes[li]), int(self.sizes[li + 1])
            gw = h_in.T @ dz
            gb = dz.sum(axis=0)
            grads[self.woff[li] : self.woff[li] + fi * fo] = gw.ravel()
            grads[self.boff[li] : self.boff[li] + fo] = gb
            if li > 0:
                dh = dz @ self.weight(li).T
                h = acts[li]
                dz = dh * (1.0 - h * h) if self._hidden_tag == 0 else dh * (h > 0.0)
        return grads

    def copy(self) -> "Mlp":
        other = Mlp(self.sizes.tolist(), self.hidden, self.head, seed=None)
        other.params[:] = self.params
        return other

    def to_jsonable(self) -> dict:
        return {
            "version": 1,
            "sizes": self.sizes.tolist(),
            "hidden": self.hidden,
            "head": self.head,
            "params": self.params.tolist(),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Mlp":
        if obj.get("version") != 1:
            raise ValueError(f"unsupported net version {obj.get('version')!r}")
        net = cls(obj["sizes"], obj["hidden"], obj["head"], seed=None)
        params = np.asarray(obj["params"], dtype=np.float64)
        if params.shape != net.params.shape:
            raise ValueError("params length does not match sizes")
        net.params[:] = params
        return net


class Adam:
    """Adaptive-moment optimizer over a net's flat parameter vector."""

    def __init__(self, net: Mlp, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros_like(net.params)
        self.v = np.zeros_like(net.params)
        self.t = 0

    def step(self, net: Mlp, grads: np.ndarray) -> None:
        if grads.shape != net.params.shape:
            raise ValueError("gradient shape does not match parameters")
        if not np.all(np.isfinite(grads)):
            warnings.warn("non-finite gradient: update skipped", RuntimeWarning, stacklevel=2)
            return
        self.t += 1
        kernels.adam_step(net.params, np.ascontiguousarray(grads, dtype=np.float64),
                          self.m, self.v, self.t, self.lr, self.beta1, self.beta2, self.eps)


def save_mlp(path: str | Path, net: Mlp) -> None:
    Path(path).write_text(json.dumps(net.to_jsonable()))


def load_mlp(path: str | Path) -> Mlp:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot load network from {path}: {exc}") from exc
    return Mlp.from_jsonable(obj)
