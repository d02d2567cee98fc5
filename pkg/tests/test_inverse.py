import numpy as np
import pytest

from gridgoal.grid import Action, GridEnv, GridLayout
from gridgoal.inverse import InverseModel


def transition_dataset(n, seed, width=20, height=20):
    """Uniform random non-blocked moves on an open grid, encoded like the env."""
    rng = np.random.default_rng(seed)
    s_from, s_to, acts = [], [], []
    while len(acts) < n:
        x = int(rng.integers(width))
        y = int(rng.integers(height))
        a = Action(int(rng.integers(4)))
        dx, dy = a.delta
        nx, ny = x + dx, y + dy
        if not (0 <= nx < width and 0 <= ny < height):
            continue
        s_from.append([x / width, y / height])
        s_to.append([nx / width, ny / height])
        acts.append(int(a))
    return np.array(s_from), np.array(s_to), np.array(acts)


@pytest.fixture(scope="module")
def trained_model():
    model = InverseModel(2, seed=0)
    s_from, s_to, acts = transition_dataset(4000, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(2000):
        idx = rng.integers(0, 4000, 64)
        model.train_step(s_from[idx], s_to[idx], acts[idx])
    return model


class TestTraining:
    def test_loss_converges_on_deterministic_grid(self, trained_model):
        s_from, s_to, acts = transition_dataset(512, seed=3)
        x = trained_model._pair(s_from, s_to)
        probs = trained_model.net.forward(x)
        loss = float(np.mean(-np.log(probs[np.arange(512), acts] + 1e-12)))
        assert loss < 0.05

    def test_single_sample_overfit_is_monotone(self):
        model = InverseModel(2, seed=1)
        s_from = np.array([[0.2, 0.2]])
        s_to = np.array([[0.25, 0.2]])
        a = np.array([int(Action.RIGHT)])
        probs = []
        for _ in range(300):
            model.train_step(s_from, s_to, a)
            probs.append(float(model.predict_proba(s_from, s_to)[0, a[0]]))
        # overall rise with a strictly higher final quarter
        assert probs[-1] > 0.95
        assert np.mean(probs[-75:]) > np.mean(probs[:75])

    def test_contradictory_labels_bounded_by_entropy(self):
        model = InverseModel(2, seed=2)
        s_from = np.array([[0.5, 0.5], [0.5, 0.5]])
        s_to = np.array([[0.55, 0.5], [0.55, 0.5]])
        acts = np.array([0, 1])  # same pair, conflicting labels, 50/50 mix
        losses = [model.train_step(s_from, s_to, acts) for _ in range(1500)]
        assert losses[-1] >= np.log(2.0) - 1e-6

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            InverseModel(2).train_step(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def test_untrained_flag(self):
        model = InverseModel(2)
        assert not model.is_trained
        model.train_step(np.array([[0.1, 0.1]]), np.array([[0.15, 0.1]]), np.array([0]))
        assert model.is_trained


class TestPrediction:
    def test_reversed_query_gives_geometric_inverse(self, trained_model):
        # forward move (5,5) -> Up -> (5,4); querying (s_next, s) must say Down
        s = np.array([5 / 20, 5 / 20])
        s_next = np.array([5 / 20, 4 / 20])
        assert trained_model.predict_inverse(s_next, s) is Action.DOWN

    def test_holdout_agreement_with_geometric_inverse(self, trained_model):
        s_from, s_to, acts = transition_dataset(1000, seed=9)
        pred = trained_model.predict_inverse(s_to, s_from)
        expect = np.array([int(Action(a).inverse) for a in acts])
        assert np.mean(pred == expect) >= 0.95

    def test_involution_by_simulation(self, trained_model):
        layout = GridLayout(20, 20, start=(0, 0), target=(19, 19))
        env = GridEnv(layout, horizon=10**6, terminal_on_target=False)
        s_from, s_to, acts = transition_dataset(400, seed=10)
        ok = 0
        for i in range(400):
            pos = (round(s_from[i, 0] * 20), round(s_from[i, 1] * 20))
            pos_next = (round(s_to[i, 0] * 20), round(s_to[i, 1] * 20))
            a_hat = trained_model.predict_inverse(s_to[i], s_from[i])
            from gridgoal.grid import EnvState
            out = env.step(EnvState(pos=pos_next), a_hat)
            ok += out.next.pos == pos
        assert ok / 400 >= 0.95

    def test_degenerate_pair_still_returns_action_with_confidence(self, trained_model):
        s = np.array([0.5, 0.5])
        action, conf = trained_model.predict_inverse(s, s, return_confidence=True)
        assert action in list(Action)
        assert 0.0 <= conf <= 1.0

    def test_accuracy_helper(self, trained_model):
        s_from, s_to, acts = transition_dataset(200, seed=11)
        assert trained_model.accuracy(s_from, s_to, acts) >= 0.95
