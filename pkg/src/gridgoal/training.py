"""End-to-end training loop.

Per episode: roll out the stochastic policy (with the exploration bonus folded
into collected rewards), train the inverse model online, relabel the episode
in both directions into the subgoal replay, then run the self-imitation
updates — N on the final-goal policy from D, P on the subgoal network from
D_s. Ablation switches cover forward-only editing, no editing at all, and
contaminating the policy with goal-stripped subgoal data.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from gridgoal import kernels
from gridgoal.agents import RndPair, SilAgent
from gridgoal.editing import EditConfig, EpisodeTrace, edit_backward_arrays, edit_forward_arrays
from gridgoal.grid import DistanceOracle, GridEnv, state_dim
from gridgoal.inverse import InverseModel
from gridgoal.layouts import layout_to_dict, load_stages, resolve_env
from gridgoal.nets import Mlp, load_mlp, save_mlp
from gridgoal.replay import ReplayBuffer, policy_buffer, subgoal_buffer
from gridgoal.subgoal import SubgoalAgent

CHECKPOINT_VERSION = 1
NET_FILES = ("policy", "value", "subgoal_policy", "subgoal_value", "inverse", "rnd_target", "rnd_predictor")

# key-door needs deeper exploration and a post-hoc subgoal fit on the final
# episode window; the mechanism ablations need sharp one-directional routes
# (fast value filter, then a greedy collection era) to expose their effects
KEYDOOR_PROFILE = dict(
    env="keydoor4", episodes=2_000, horizon=2_000, rnd_scale=0.5,
    capacity_policy=400_000, capacity_subgoal=1_500_000,
    value_lr_policy=3e-5, subgoal_schedule="posthoc", posthoc_updates=50_000,
    ds_window_episodes=300,
)
ABLATION_PROFILE = dict(
    value_lr_policy=3e-5, greedy_collect_after=8_000, ds_window_episodes=2_000,
    subgoal_schedule="posthoc", posthoc_updates=30_000,
)


def default_config(env: str = "simple20", **overrides) -> "TrainConfig":
    """TrainConfig with per-domain defaults (key-door gets its profile)."""
    base = dict(KEYDOOR_PROFILE) if env.startswith("keydoor") else {"env": env}
    base["env"] = env
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainConfig:
    env: str = "simple20"
    episodes: int = 10_000
    horizon: int | None = None
    seed: int = 0
    gamma: float = 0.99
    policy_updates: int = 4
    subgoal_updates: int = 8
    minibatch: int = 64
    lr: float = 3e-4
    # value rates diverge on purpose: a fast value filter sharpens the rollout
    # policy toward deterministic routes (and starves wrong-direction relabels),
    # while the subgoal value must stay low so imitation weights survive the run
    value_lr_policy: float = 1e-7
    value_lr_subgoal: float = 1e-7
    beta: float = 0.01
    hidden: tuple = (64, 64)
    rnd_scale: float = 0.1
    rnd_out: int = 32
    rnd_hidden: tuple = (64,)
    capacity_policy: int = 100_000
    capacity_subgoal: int = 400_000
    k_goals: int = 4
    reach_reward: float = 1.0
    shaping: bool = True
    edit_gamma: float = 0.99
    inverse_warmup_steps: int = 4_000
    inverse_interval: int = 32
    inverse_batch: int = 64
    inverse_fifo: int = 4096
    subgoal_schedule: str = "interleaved"  # interleaved | posthoc
    greedy_collect_after: int | None = None  # switch rollouts to greedy from this episode
    posthoc_updates: int | None = None
    ds_window_episodes: int = 0  # 0 = every episode feeds D_s
    subgoal_polish_updates: int = 20_000  # extra subgoal updates after the loop
    forward_only: bool = False
    no_editing: bool = False
    contaminate_policy: bool = False
    log_every: int = 0  # episodes between stderr progress lines; 0 = silent

    def validate(self) -> None:
        if self.episodes < 0 or self.policy_updates < 0 or self.subgoal_updates < 0:
            raise ValueError("episodes and update counts must be >= 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.subgoal_schedule not in ("interleaved", "posthoc"):
            raise ValueError(f"unknown subgoal_schedule {self.subgoal_schedule!r}")
        if self.minibatch <= 0:
            raise ValueError("minibatch must be positive")


class _InverseFifo:
    """Small ring of recent (enc_from, enc_to, action) rows."""

    def __init__(self, capacity: int, dim: int):
        self.cap = capacity
        self.s_from = np.zeros((capacity, dim))
        self.s_to = np.zeros((capacity, dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.head = 0
        self.size = 0

    def add(self, s_from: np.ndarray, s_to: np.ndarray, a: np.ndarray) -> None:
        for i in range(len(a)):
            self.s_from[self.head] = s_from[i]
            self.s_to[self.head] = s_to[i]
            self.a[self.head] = a[i]
            self.head = (self.head + 1) % self.cap
            self.size = min(self.size + 1, self.cap)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.s_from[idx], self.s_to[idx], self.a[idx]


class Trainer:
    def __init__(self, config: TrainConfig, env: GridEnv | None = None):
        config.validate()
        self.config = config
        self.env = env if env is not None else resolve_env(config.env, horizon=config.horizon)
        ss = np.random.SeedSequence(config.seed)
        s_pol, s_sub, s_inv, s_rnd, s_edit, s_misc, s_bufp, s_bufs = ss.spawn(8)

        dim = self.env.state_dim
        self.policy_agent = SilAgent(dim, hidden=config.hidden, beta=config.beta, lr=config.lr,
                                     value_lr=config.value_lr_policy,
                                     seed=int(s_pol.generate_state(1)[0]))
        self.subgoal_agent = SubgoalAgent(self.env.family, hidden=config.hidden, beta=config.beta,
                                          lr=config.lr, value_lr=config.value_lr_subgoal,
                                          seed=int(s_sub.generate_state(1)[0]))
        self.inverse = InverseModel(dim, hidden=config.hidden, lr=config.lr,
                                    seed=int(s_inv.generate_state(1)[0]))
        self.rnd = RndPair(dim, hidden=config.rnd_hidden, out_dim=config.rnd_out,
                           scale=config.rnd_scale, lr=config.lr, seed=int(s_rnd.generate_state(1)[0]))
        self.replay_policy = policy_buffer(config.capacity_policy, dim, seed=int(s_bufp.generate_state(1)[0]))
        self.replay_subgoal = subgoal_buffer(config.capacity_subgoal, dim + 2,
                                             seed=int(s_bufs.generate_state(1)[0]))
        self.edit_cfg = EditConfig(k_goals=config.k_goals, reach_reward=config.reach_reward,
                                   shaping=config.shaping, gamma=config.edit_gamma)
        self._edit_rng = np.random.default_rng(s_edit)
        self._rng = np.random.default_rng(s_misc)
        self._fifo = _InverseFifo(config.inverse_fifo, dim)
        self.oracles = [DistanceOracle(layout) for layout in self.env.stages]

        n_stages = len(self.env.stages)
        self.visits = np.zeros((n_stages, self.env.height, self.env.width), dtype=np.int64)
        self.success_history: list[bool] = []
        self.steps_history: list[int] = []
        self.global_steps = 0
        self.shaping_skipped = 0
        self._pack = self.env.pack()
        self._episode_seeds = np.random.default_rng(s_misc.spawn(1)[0]).integers(
            0, 2**31 - 1, size=max(config.episodes, 1))

    # -- rollout ---------------------------------------------------------

    def _rollout(self, ep_seed: int, greedy: bool = False):
        pol = self.policy_agent.policy
        p = self._pack
        return kernels.simulate_episode(
            pol.params, pol.sizes, pol.woff, pol.boff, 0,
            self.rnd.target.params, self.rnd.predictor.params,
            self.rnd.target.sizes, self.rnd.target.woff, self.rnd.target.boff, 0,
            self.rnd.scale,
            p["walls"], p["starts"], p["targets"], p["bonuses"], p["penalties"],
            p["reward_goal"], p["reward_bonus"], p["reward_penalty"],
            p["family"], self.env.horizon, ep_seed, greedy,
        )

    def _encode_trace(self, xs, ys, stages, keys) -> np.ndarray:
        n = len(xs)
        d = state_dim(self.env.family)
        out = np.zeros((n, d))
        out[:, 0] = xs / self.env.width
        out[:, 1] = ys / self.env.height
        if self.env.family == "keydoor":
            out[:, 2] = keys
            out[np.arange(n), 2 + stages] = 1.0
        return out

    def _inverse_updates_due(self, n_steps: int) -> int:
        cfg = self.config
        lo, hi = self.global_steps, self.global_steps + n_steps
        warm = min(max(cfg.inverse_warmup_steps - lo, 0), n_steps)
        after_lo = max(lo, cfg.inverse_warmup_steps)
        thinned = 0
        if hi > after_lo and cfg.inverse_interval > 0:
            first = after_lo + (-(after_lo - cfg.inverse_warmup_steps)) % cfg.inverse_interval
            if first < hi:
                thinned = (hi - 1 - first) // cfg.inverse_interval + 1
        return warm + thinned

    def run_episode(self, episode_index: int) -> dict:
        cfg = self.config
        greedy = (cfg.greedy_collect_after is not None
                  and episode_index >= cfg.greedy_collect_after)
        xs, ys, stages, keys, actions, r_ext, r_bonus, events, n, reached = self._rollout(
            int(self._episode_seeds[episode_index]), greedy)
        if n == 0:
            return {"episode": episode_index, "steps": 0, "success": bool(reached)}
        trace = EpisodeTrace(xs, ys, stages, keys, actions, events, self.env.family,
                             self.env.width, self.env.height)
        enc = self._encode_trace(xs, ys, stages, keys)
        np.add.at(self.visits, (stages[:-1] - 1, ys[:-1], xs[:-1]), 1)

        # replay D: per-step returns over extrinsic + exploration rewards
        r_total = r_ext + r_bonus
        returns = kernels.discounted_returns(r_total, cfg.gamma)
        self.replay_policy.push({"s": enc[:-1], "a": actions.astype(np.int64), "R": returns})

        # inverse model: forward pairs, excluding self-transitions and door teleports
        keep = (events != kernels.EV_BLOCKED)
        if self.env.family == "keydoor":
            keep &= (events != kernels.EV_GOAL)
        if keep.any():
            idx = np.flatnonzero(keep)
            self._fifo.add(enc[idx], enc[idx + 1], actions[idx].astype(np.int64))
        inv_losses = []
        if self._fifo.size > 0:
            for _ in range(self._inverse_updates_due(n)):
                sf, st, aa = self._fifo.sample(cfg.inverse_batch, self._rng)
                inv_losses.append(self.inverse.train_step(sf, st, aa))
        self.global_steps += n

        # exploration predictor distilled on the states this episode visited
        for lo in range(1, len(enc), 256):
            self.rnd.update(enc[lo : lo + 256])

        # bi-directional relabeling into D_s
        n_fwd = n_bwd = 0
        in_window = (cfg.ds_window_episodes <= 0
                     or episode_index >= cfg.episodes - cfg.ds_window_episodes)
        if not cfg.no_editing and in_window:
            fwd, sk_f = edit_forward_arrays(trace, self.edit_cfg, self.oracles, self._edit_rng)
            self.replay_subgoal.push(fwd)
            n_fwd = len(fwd["a"])
            self.shaping_skipped += sk_f
            if not cfg.forward_only and self.inverse.is_trained:
                bwd, sk_b = edit_backward_arrays(trace, self.inverse, self.edit_cfg,
                                                 self.oracles, self._edit_rng)
                self.replay_subgoal.push(bwd)
                n_bwd = len(bwd["a"])
                self.shaping_skipped += sk_b

        # learning stage
        pol_losses = []
        for _ in range(cfg.policy_updates):
            if cfg.contaminate_policy:
                # negative control: the policy net learns the relabeled subgoal
                # data itself (goal dims stripped), which hands it contradictory
                # action targets at the same state
                if len(self.replay_subgoal) == 0:
                    break
                mixed = self.replay_subgoal.sample(cfg.minibatch)
                s = mixed["sg"][:, : self.env.state_dim]
                a, R = mixed["a"], mixed["r"]
            else:
                if len(self.replay_policy) == 0:
                    break
                batch = self.replay_policy.sample(cfg.minibatch)
                s, a, R = batch["s"], batch["a"], batch["R"]
            pol_losses.append(self.policy_agent.update(s, a, R))
        sub_losses = []
        if cfg.subgoal_schedule == "interleaved" and not cfg.no_editing:
            for _ in range(cfg.subgoal_updates):
                if len(self.replay_subgoal) == 0:
                    break
                batch = self.replay_subgoal.sample(cfg.minibatch)
                sub_losses.append(self.subgoal_agent.sil.update(batch["sg"], batch["a"], batch["r"]))

        self.success_history.append(bool(reached))
        self.steps_history.append(int(n))
        return {
            "episode": episode_index,
            "steps": int(n),
            "success": bool(reached),
            "return_ext": float(r_ext.sum()),
            "return_total": float(r_total.sum()),
            "bonus_mean": float(r_bonus.mean()),
            "edited_forward": n_fwd,
            "edited_backward": n_bwd,
            "loss_policy": float(np.mean(pol_losses)) if pol_losses else None,
            "loss_subgoal": float(np.mean(sub_losses)) if sub_losses else None,
            "loss_inverse": float(np.mean(inv_losses)) if inv_losses else None,
        }

    def run(self, metrics_path: str | Path | None = None) -> dict:
        cfg = self.config
        fh = open(metrics_path, "w") if metrics_path else None
        t0 = time.perf_counter()
        try:
            for ep in range(cfg.episodes):
                rec = self.run_episode(ep)
                if fh:
                    fh.write(json.dumps(rec) + "\n")
                if cfg.log_every and (ep + 1) % cfg.log_every == 0:
                    recent = self.success_history[-cfg.log_every:]
                    print(f"[train] episode {ep + 1}/{cfg.episodes} "
                          f"success={np.mean(recent):.2f} steps={rec['steps']} "
                          f"elapsed={time.perf_counter() - t0:.0f}s", file=sys.stderr)
        finally:
            if fh:
                fh.close()
        if not cfg.no_editing and len(self.replay_subgoal) > 0:
            if cfg.subgoal_schedule == "posthoc":
                updates = cfg.posthoc_updates
                if updates is None:
                    updates = cfg.subgoal_updates * cfg.episodes
            else:
                # tail polish: late replay data comes from the converged policy,
                # and training on it sharpens greedy goal pursuit considerably
                updates = cfg.subgoal_polish_updates
            if updates:
                self.subgoal_agent.train(self.replay_subgoal, updates, cfg.minibatch)
        return {
            "episodes": cfg.episodes,
            "success_rate_last_500": self.success_rate(500),
            "wall_time_s": time.perf_counter() - t0,
            "subgoal_size": len(self.replay_subgoal),
            "policy_size": len(self.replay_policy),
        }

    def success_rate(self, last: int) -> float:
        if not self.success_history:
            return 0.0
        window = self.success_history[-last:]
        return float(np.mean(window))

    # -- checkpointing ---------------------------------------------------

    def save_checkpoint(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        nets = {
            "policy": self.policy_agent.policy,
            "value": self.policy_agent.value,
            "subgoal_policy": self.subgoal_agent.policy,
            "subgoal_value": self.subgoal_agent.value,
            "inverse": self.inverse.net,
            "rnd_target": self.rnd.target,
            "rnd_predictor": self.rnd.predictor,
        }
        for name, net in nets.items():
            save_mlp(out / f"{name}.json", net)
        meta = {
            "version": CHECKPOINT_VERSION,
            "family": self.env.family,
            "horizon": self.env.horizon,
            "stages": [layout_to_dict(layout) for layout in self.env.stages],
            "inverse_train_steps": self.inverse.train_steps,
            "config": _config_to_jsonable(self.config),
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        np.savetxt(out / "visits.csv", self.visits.reshape(-1, self.env.width),
                   fmt="%d", delimiter=",")
        return out


def _config_to_jsonable(cfg: TrainConfig) -> dict:
    obj = asdict(cfg)
    obj["hidden"] = list(cfg.hidden)
    obj["rnd_hidden"] = list(cfg.rnd_hidden)
    return obj


@dataclass
class Checkpoint:
    """A trained run reloaded from disk: env plus all nets, ready for eval."""

    env: GridEnv
    policy_agent: SilAgent
    subgoal_agent: SubgoalAgent
    inverse: InverseModel
    rnd: RndPair
    meta: dict = field(repr=False)


def load_checkpoint(path: str | Path, seed: int = 0) -> Checkpoint:
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot load checkpoint meta from {path}: {exc}") from exc
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    nets = {}
    for name in NET_FILES:
        nets[name] = load_mlp(path / f"{name}.json")
    stages = load_stages(meta["stages"])
    env = GridEnv(stages, family=meta["family"], horizon=meta["horizon"])
    cfg = meta.get("config", {})
    dim = env.state_dim

    policy_agent = SilAgent(dim, hidden=tuple(cfg.get("hidden", (64, 64))),
                            beta=cfg.get("beta", 0.01), lr=cfg.get("lr", 3e-4), seed=seed)
    policy_agent.policy = nets["policy"]
    policy_agent.value = nets["value"]
    subgoal_agent = SubgoalAgent(env.family, hidden=tuple(cfg.get("hidden", (64, 64))),
                                 beta=cfg.get("beta", 0.01), lr=cfg.get("lr", 3e-4), seed=seed + 1)
    subgoal_agent.sil.policy = nets["subgoal_policy"]
    subgoal_agent.sil.value = nets["subgoal_value"]
    inverse = InverseModel(dim, hidden=tuple(cfg.get("hidden", (64, 64))), seed=seed)
    inverse.net = nets["inverse"]
    inverse.train_steps = int(meta.get("inverse_train_steps", 0))
    rnd = RndPair(dim, hidden=tuple(cfg.get("rnd_hidden", (64,))),
                  out_dim=cfg.get("rnd_out", 32), scale=cfg.get("rnd_scale", 0.1), seed=seed)
    rnd.target = nets["rnd_target"]
    rnd.predictor = nets["rnd_predictor"]
    return Checkpoint(env=env, policy_agent=policy_agent, subgoal_agent=subgoal_agent,
                      inverse=inverse, rnd=rnd, meta=meta)


def train(config: TrainConfig, out_dir: str | Path | None = None) -> tuple[Trainer, dict]:
    """Run a full training and optionally write checkpoints + metrics."""
    trainer = Trainer(config)
    metrics_path = Path(out_dir) / "metrics.jsonl" if out_dir else None
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    summary = trainer.run(metrics_path)
    if out_dir:
        trainer.save_checkpoint(out_dir)
    return trainer, summary
