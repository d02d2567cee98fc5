import numpy as np
import pytest

from gridgoal.agents import RndPair, SilAgent

from conftest import finite_difference_grads, relative_error


class TestAct:
    def test_uniform_policy_frequencies(self):
        agent = SilAgent(2, seed=0)  # zero head -> exactly uniform policy
        counts = np.zeros(4)
        s = np.array([0.3, 0.7])
        for _ in range(100_000):
            a, _ = agent.act(s)
            counts[a] += 1
        assert np.all(np.abs(counts / 100_000 - 0.25) <= 0.01)

    def test_dominant_logit_wins(self):
        agent = SilAgent(2, seed=0)
        # force logits (10, 0, 0, 0) via the head bias
        agent.policy.bias(len(agent.policy.sizes) - 2)[0] = 10.0
        picks = sum(agent.act(np.zeros(2))[0] == 0 for _ in range(2000))
        assert picks / 2000 > 0.999

    def test_greedy_is_deterministic(self):
        agent = SilAgent(3, seed=4)
        agent.policy.init_params(123)
        s = np.array([0.1, 0.5, 0.9])
        actions = {agent.act(s, greedy=True)[0] for _ in range(20)}
        assert len(actions) == 1

    def test_logp_matches_distribution(self):
        agent = SilAgent(2, seed=1)
        a, logp = agent.act(np.array([0.2, 0.4]))
        probs = agent.action_probs(np.array([0.2, 0.4]))
        assert logp == pytest.approx(np.log(probs[a]))


class TestSilLoss:
    def test_hand_example(self):
        # R=3, V(s)=1, log pi(a|s)=-0.5, beta=0.01 -> L = 1.0 + 0.02
        agent = SilAgent(2, beta=0.01, seed=0)
        agent.value.bias(len(agent.value.sizes) - 2)[0] = 1.0
        probs = agent.action_probs(np.zeros(2))
        assert np.allclose(probs, 0.25)  # log 0.25 != -0.5, so set the head bias
        # make action 0 carry probability e^-0.5 by solving the two-level logit
        target_p = np.exp(-0.5)
        rest = (1 - target_p) / 3
        logits = np.log([target_p, rest, rest, rest])
        head = len(agent.policy.sizes) - 2
        agent.policy.bias(head)[:] = logits
        loss, (gp, gv) = agent.sil_loss(np.zeros((1, 2)), np.array([0]), np.array([3.0]))
        assert loss == pytest.approx(1.0 + 0.01 * 0.5 * 4.0)

    def test_below_value_contributes_nothing(self):
        agent = SilAgent(2, seed=3)
        agent.value.bias(len(agent.value.sizes) - 2)[0] = 3.0
        loss, (gp, gv) = agent.sil_loss(np.random.default_rng(0).random((8, 2)),
                                        np.zeros(8, dtype=np.int64),
                                        np.full(8, 2.0))  # R=2 < V=3 everywhere
        assert loss == 0.0
        assert np.all(gp == 0.0) and np.all(gv == 0.0)

    def test_empty_batch_rejected(self):
        agent = SilAgent(2, seed=0)
        with pytest.raises(ValueError, match="non-empty"):
            agent.sil_loss(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0))

    def test_policy_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        agent = SilAgent(4, hidden=(8,), seed=2)
        agent.policy.init_params(77)  # non-degenerate head
        agent.value.init_params(78)
        s = rng.random((6, 4))
        a = rng.integers(0, 4, 6)
        R = rng.random(6) * 4 - 1

        # freeze the advantage weights: the policy term treats (R - V)+ as constant
        v = agent.value.forward(s)[:, 0]
        w = np.maximum(R - v, 0.0)

        def policy_loss():
            probs = agent.policy.forward(s)
            logp = np.log(probs[np.arange(6), a])
            return float(np.mean(-logp * w))

        _, (gp, _) = agent.sil_loss(s, a, R)
        numeric = finite_difference_grads(policy_loss, agent.policy.params)
        assert relative_error(gp, numeric) < 1e-4

    def test_value_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        agent = SilAgent(4, hidden=(8,), beta=0.01, seed=2)
        agent.value.init_params(79)
        s = rng.random((6, 4))
        a = rng.integers(0, 4, 6)
        R = agent.value.forward(s)[:, 0] + rng.uniform(0.5, 2.0, 6)  # keep off the kink

        def value_loss():
            v = agent.value.forward(s)[:, 0]
            clipped = np.maximum(R - v, 0.0)
            return float(np.mean(0.01 * 0.5 * clipped**2))

        _, (_, gv) = agent.sil_loss(s, a, R)
        numeric = finite_difference_grads(value_loss, agent.value.params)
        assert relative_error(gv, numeric) < 1e-4

    def test_masking_only_above_value_samples_move_the_loss(self):
        rng = np.random.default_rng(2)
        agent = SilAgent(2, seed=1)
        s = rng.random((4, 2))
        a = np.array([0, 1, 2, 3])
        below = np.full(4, -1.0)
        above = np.full(4, 1.0)
        _, (gp_below, _) = agent.sil_loss(s, a, below)
        _, (gp_above, _) = agent.sil_loss(s, a, above)
        assert np.all(gp_below == 0.0)
        assert np.any(gp_above != 0.0)


class TestRnd:
    def test_identical_nets_zero_bonus(self):
        pair = RndPair(3, seed=0)
        pair.predictor.params[:] = pair.target.params
        assert pair.bonus(np.array([0.1, 0.2, 0.3])) == 0.0

    def test_zero_scale_zero_bonus(self):
        pair = RndPair(3, scale=0.0, seed=1)
        assert pair.bonus(np.array([0.5, 0.5, 0.5])) == 0.0

    def test_target_frozen_under_updates(self):
        pair = RndPair(2, seed=2)
        before = pair.target.params.copy()
        for _ in range(50):
            pair.update(np.random.default_rng(0).random((16, 2)))
        assert np.array_equal(pair.target.params, before)

    def test_predictor_loss_nonincreasing_averaged(self):
        pair = RndPair(2, seed=3, lr=1e-3)
        rng = np.random.default_rng(1)
        batch = rng.random((32, 2))
        losses = [pair.update(batch) for _ in range(100)]
        assert np.mean(losses[50:]) < np.mean(losses[:50])

    def test_bonus_decays_on_trained_state_and_novel_state_retains(self):
        pair = RndPair(2, seed=4, lr=3e-3)
        trained = np.array([0.25, 0.25])
        novel = np.array([0.9, 0.9])
        initial = pair.bonus(trained)
        for _ in range(500):
            pair.update(trained[None, :])
        residual = pair.bonus(trained)
        assert residual <= 0.1 * initial
        assert pair.bonus(novel) > 5 * residual

    def test_rnd_gradient_matches_finite_differences(self):
        pair = RndPair(3, hidden=(8,), out_dim=4, seed=5)
        rng = np.random.default_rng(9)
        s = rng.random((5, 3))
        tgt = pair.target.forward(s)

        def loss():
            diff = pair.predictor.forward(s) - tgt
            return float(np.mean(diff * diff))

        pred, cache = pair.predictor.forward_cached(s)
        diff = pred - tgt
        analytic = pair.predictor.backward_logits(cache, 2.0 * diff / diff.size)
        numeric = finite_difference_grads(loss, pair.predictor.params)
        assert relative_error(analytic, numeric) < 1e-4

    def test_empty_update_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            RndPair(2, seed=0).update(np.zeros((0, 2)))
