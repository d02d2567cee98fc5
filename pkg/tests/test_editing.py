import numpy as np
import pytest

from gridgoal.editing import (
    EditConfig,
    dump_edited_jsonl,
    edit_backward,
    edit_episode,
    edit_forward,
    shape_reward,
)
from gridgoal.grid import Action, DistanceOracle, EnvState, GridEnv, GridLayout
from gridgoal.inverse import InverseModel, NotTrainedError
from gridgoal.replay import Transition


def geometric_inverse_model(width=20, height=20, seed=0):
    """Inverse model trained to convergence on uniform open-grid transitions."""
    model = InverseModel(2, seed=seed)
    rng = np.random.default_rng(seed + 1)
    for _ in range(1500):
        xs = rng.integers(1, width - 1, 64)
        ys = rng.integers(1, height - 1, 64)
        acts = rng.integers(0, 4, 64)
        dx = np.array([0, 0, -1, 1])[acts]
        dy = np.array([-1, 1, 0, 0])[acts]
        s_from = np.stack([xs / width, ys / height], axis=1)
        s_to = np.stack([(xs + dx) / width, (ys + dy) / height], axis=1)
        model.train_step(s_from, s_to, acts)
    return model


def rollout_episode(env: GridEnv, actions) -> list[Transition]:
    state = env.reset()
    episode = []
    for a in actions:
        out = env.step(state, a)
        episode.append(Transition(
            s=env.encode(state), a=int(a), r=out.reward, s_next=env.encode(out.next),
            done=out.done, pos=state.pos, pos_next=out.next.pos))
        state = out.next
        if out.done:
            break
    return episode


def random_walk_episode(env: GridEnv, n: int, seed: int) -> list[Transition]:
    rng = np.random.default_rng(seed)
    actions = [Action(int(a)) for a in rng.integers(0, 4, n)]
    return rollout_episode(env, actions)


@pytest.fixture
def walk_env(open_grid):
    return GridEnv(open_grid, horizon=10_000, terminal_on_target=False)


@pytest.fixture(scope="module")
def inverse():
    return geometric_inverse_model()


class TestShapeReward:
    def test_shortest_segment_keeps_full_reward(self):
        assert shape_reward(1.0, 4, 4) == 1.0

    def test_penalty_example(self):
        assert shape_reward(1.0, 5, 9) == -3.0

    def test_zero_distance(self):
        assert shape_reward(0.0, 0, 0) == 0.0

    def test_penalty_strictly_monotone_in_path_length(self):
        vals = [shape_reward(1.0, 3, d) for d in range(3, 12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_never_exceeds_base_reward(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            short = int(rng.integers(0, 20))
            st = short + int(rng.integers(0, 30))
            assert shape_reward(1.0, short, st) <= 1.0

    def test_invalid_arguments_rejected(self):
        with pytest.raises(ValueError):
            shape_reward(1.0, -1, 3)
        with pytest.raises(ValueError):
            shape_reward(1.0, 5, 3)


class TestForwardEdit:
    def test_volume_is_steps_times_k(self, walk_env):
        episode = random_walk_episode(walk_env, 100, seed=1)
        assert len(episode) == 100
        cfg = EditConfig(k_goals=4, seed=0)
        out = edit_forward(episode, cfg, walk_env.oracle(1))
        assert len(out) == 400

    def test_reach_flag_and_reward(self, walk_env):
        episode = random_walk_episode(walk_env, 60, seed=2)
        cfg = EditConfig(k_goals=4, seed=1)
        out = edit_forward(episode, cfg, walk_env.oracle(1))
        hits = [g for g in out if g.done_g]
        assert hits, "future sampling should hit adjacent goals somewhere"
        for g in hits:
            # goal slice equals next position slice
            assert np.allclose(g.sg_next[:2], g.sg[2:])

    def test_one_step_episode_goal_is_terminal(self, walk_env):
        episode = rollout_episode(walk_env, [Action.UP])
        out = edit_forward(episode, EditConfig(k_goals=1, seed=0), walk_env.oracle(1))
        assert len(out) == 1
        assert np.allclose(out[0].sg[2:], episode[0].s_next)
        assert out[0].done_g

    def test_goal_slice_identical_in_sg_and_sg_next(self, walk_env):
        episode = random_walk_episode(walk_env, 40, seed=3)
        out = edit_forward(episode, EditConfig(k_goals=2, seed=2), walk_env.oracle(1))
        for g in out:
            assert np.array_equal(g.sg[2:], g.sg_next[2:])

    def test_shaping_never_exceeds_base_and_disabled_reproduces_plain(self, walk_env):
        episode = random_walk_episode(walk_env, 80, seed=4)
        shaped = edit_forward(episode, EditConfig(k_goals=3, shaping=True, seed=5),
                              walk_env.oracle(1))
        plain = edit_forward(episode, EditConfig(k_goals=3, shaping=False, seed=5),
                             walk_env.oracle(1))
        assert all(g.r_shaped <= 1.0 + 1e-12 for g in shaped)
        assert all(g.r_shaped == 1.0 for g in plain)
        # same sampled goals under the same seed
        for a, b in zip(shaped, plain):
            assert np.array_equal(a.sg, b.sg)

    def test_dist_st_matches_trace_indexing(self, walk_env):
        episode = random_walk_episode(walk_env, 50, seed=6)
        positions = [episode[0].pos] + [tr.pos_next for tr in episode]
        oracle = walk_env.oracle(1)
        cfg = EditConfig(k_goals=2, shaping=True, gamma=1.0, seed=7)
        out = edit_forward(episode, cfg, oracle)
        k = cfg.k_goals
        for i, g in enumerate(out):
            t = i // k
            gx, gy = round(g.sg[2] * 20), round(g.sg[3] * 20)
            dist_short = oracle.dist(positions[t], (gx, gy))
            dist_st = 1.0 + dist_short - g.r_shaped  # invert the shaping formula
            j = t + int(round(dist_st))
            assert positions[j] == (gx, gy)
            assert dist_st >= dist_short

    def test_discounting_applies_over_segment_length(self, walk_env):
        episode = rollout_episode(walk_env, [Action.UP, Action.UP, Action.UP])
        cfg = EditConfig(k_goals=1, shaping=False, gamma=0.5, seed=3)
        out = edit_forward(episode, cfg, walk_env.oracle(1))
        for i, g in enumerate(out):
            gx, gy = round(g.sg[2] * 20), round(g.sg[3] * 20)
            sx, sy = round(g.sg[0] * 20), round(g.sg[1] * 20)
            dist = abs(gx - sx) + abs(gy - sy)
            assert g.r_shaped == pytest.approx(0.5 ** (dist - 1))

    def test_empty_episode_rejected(self, walk_env):
        with pytest.raises(ValueError, match="empty"):
            edit_forward([], EditConfig(), walk_env.oracle(1))


class TestBackwardEdit:
    def test_untrained_inverse_refused(self, walk_env):
        episode = random_walk_episode(walk_env, 10, seed=1)
        with pytest.raises(NotTrainedError):
            edit_backward(episode, InverseModel(2), EditConfig(), walk_env.oracle(1))

    def test_volume_matches_forward_when_no_blocked(self, walk_env, inverse):
        # a zig-zag staying away from the borders never blocks
        actions = ([Action.LEFT, Action.UP] * 7 + [Action.RIGHT, Action.DOWN] * 7) * 4
        episode = rollout_episode(walk_env, actions[:100])
        assert len(episode) == 100
        assert all(tr.pos != tr.pos_next for tr in episode)
        cfg = EditConfig(k_goals=4, seed=9)
        batch = edit_episode(episode, inverse, cfg, walk_env.oracle(1))
        assert batch.counts == (400, 400)

    def test_blocked_steps_excluded_from_backward(self, walk_env, inverse):
        # hug the top wall: UP from y=0 blocks
        episode = rollout_episode(walk_env, [Action.UP] * 30)  # start y=17 -> blocks after 17
        n_blocked = sum(tr.pos == tr.pos_next for tr in episode)
        assert n_blocked > 0
        cfg = EditConfig(k_goals=2, seed=11)
        batch = edit_episode(episode, inverse, cfg, walk_env.oracle(1))
        assert len(batch.forward) == len(episode) * 2
        assert len(batch.backward) == (len(episode) - n_blocked) * 2

    def test_backward_goals_include_original_start(self, walk_env, inverse):
        episode = rollout_episode(walk_env, [Action.LEFT] * 8)
        start = episode[0].pos
        out = edit_backward(episode, inverse, EditConfig(k_goals=4, seed=13),
                            walk_env.oracle(1))
        goals = {(round(g.sg[2] * 20), round(g.sg[3] * 20)) for g in out}
        assert start in goals

    def test_backward_actions_are_geometric_inverses(self, walk_env, inverse):
        episode = rollout_episode(walk_env, [Action.LEFT, Action.LEFT, Action.UP, Action.LEFT])
        out = edit_backward(episode, inverse, EditConfig(k_goals=1, seed=14),
                            walk_env.oracle(1))
        # reversed walk: inverse of the original actions, in reverse order
        expect = [a.inverse for a in [Action.LEFT, Action.UP, Action.LEFT, Action.LEFT]]
        assert [Action(g.a) for g in out] == expect


class TestDirectionCoverage:
    def test_bidirectional_covers_all_actions(self, walk_env, inverse):
        # leftward/upward-biased corpus, like a policy that walks toward (2,2)
        rng = np.random.default_rng(15)
        all_batches = []
        for seed in range(12):
            actions = [Action(int(a)) for a in
                       rng.choice(4, size=60, p=[0.45, 0.05, 0.45, 0.05])]
            episode = rollout_episode(walk_env, actions)
            batch = edit_episode(episode, inverse, EditConfig(k_goals=2, seed=seed),
                                 walk_env.oracle(1))
            all_batches.append(batch)
        fwd_actions = np.concatenate([[g.a for g in b.forward] for b in all_batches])
        both_actions = np.concatenate([
            np.concatenate([[g.a for g in b.forward] for b in all_batches]),
            np.concatenate([[g.a for g in b.backward] for b in all_batches])])
        fwd_freq = np.bincount(fwd_actions, minlength=4) / len(fwd_actions)
        both_freq = np.bincount(both_actions, minlength=4) / len(both_actions)
        assert np.all(both_freq >= 0.10), both_freq
        assert not np.all(fwd_freq >= 0.10), fwd_freq


class TestUnreachableGoals:
    def test_shaping_skipped_with_warning(self):
        # goals come from the walked trajectory, so unreachability only occurs
        # when the shaping oracle disagrees with the walked plane (a key-door
        # stage oracle, for instance); emulate that with a mismatched oracle
        layout = GridLayout(6, 6, start=(5, 0), target=(0, 0))
        env = GridEnv(layout, horizon=100, terminal_on_target=False)
        episode = rollout_episode(env, [Action.LEFT] * 5)
        blocked = GridLayout(6, 6, start=(5, 0), target=(0, 5),
                             walls=frozenset({(3, 0)}))
        oracle = DistanceOracle(blocked)
        cfg = EditConfig(k_goals=2, shaping=True, seed=2)
        with pytest.warns(RuntimeWarning, match="unreachable"):
            out = edit_forward(episode, cfg, oracle)
        # samples from or onto the walled cell keep the plain reach reward
        for g in out:
            src = (round(g.sg[0] * 6), round(g.sg[1] * 6))
            goal = (round(g.sg[2] * 6), round(g.sg[3] * 6))
            if (3, 0) in (src, goal):
                assert g.r_shaped == 1.0


class TestJsonlDump:
    def test_dump_counts_and_schema(self, walk_env, inverse, tmp_path):
        import json

        episode = rollout_episode(walk_env, [Action.LEFT, Action.UP] * 4)
        batch = edit_episode(episode, inverse, EditConfig(k_goals=2, seed=0),
                             walk_env.oracle(1))
        path = tmp_path / "edits.jsonl"
        n = dump_edited_jsonl(batch, path)
        lines = path.read_text().splitlines()
        assert n == len(lines) == len(batch.forward) + len(batch.backward)
        first, last = json.loads(lines[0]), json.loads(lines[-1])
        assert first["dir"] == "forward" and last["dir"] == "backward"
        assert set(first) == {"dir", "sg", "a", "r", "done_g"}
