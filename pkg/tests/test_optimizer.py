import numpy as np
import pytest

from stba.fixtures import make_fixture_dataset, make_fixture_model
from stba.imagecore import LabeledImage
from stba.optimizer import (
    AttackConfig,
    ScheduleState,
    adversarial_margin_loss,
    decode_array_f32,
    nes_gradient,
    result_to_dict,
    run_attack,
    sample_flows,
    total_loss,
)
from stba.oracle import MlpOracle


class FixedOracle:
    """Stub scorer returning a constant score vector."""

    def __init__(self, scores, input_shape=(1, 2, 2)):
        self.scores = np.asarray(scores, dtype=np.float64)
        self.num_classes = len(scores)
        self.input_shape = input_shape
        self.calls = 0

    def predict(self, img):
        self.calls += 1
        return self.scores.copy()


class TestMarginLoss:
    def test_correctly_classified(self):
        assert adversarial_margin_loss(np.array([0.7, 0.2, 0.1]), 0) == pytest.approx(0.5)

    def test_already_misclassified_floor(self):
        assert adversarial_margin_loss(np.array([0.2, 0.7, 0.1]), 0) == pytest.approx(0.0)

    def test_uniform_tie(self):
        assert adversarial_margin_loss(np.full(4, 0.25), 2) == pytest.approx(0.0)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            adversarial_margin_loss(np.array([0.5, 0.5]), 3)


class TestTotalLoss:
    def test_lambda_zero(self):
        cfg = AttackConfig(smooth_weight=0.0, seed=0)
        flow = np.random.default_rng(0).normal(0, 1, (2, 4, 4))
        total, adv, _ = total_loss(np.array([0.7, 0.3]), 0, flow, cfg)
        assert total == pytest.approx(adv)

    def test_misclassified_zero_flow(self):
        cfg = AttackConfig()
        total, _, _ = total_loss(np.array([0.2, 0.8]), 0, np.zeros((2, 4, 4)), cfg)
        # both terms at their floors; the flow term sits at the eps-stabilizer level
        assert total == pytest.approx(0.0, abs=1e-3)

    def test_composed_hand_value(self):
        cfg = AttackConfig(smooth_weight=5.0)
        flow = np.zeros((2, 1, 2))
        flow[0, 0, 1] = 1.0
        total, adv, smooth = total_loss(np.array([0.7, 0.2, 0.1]), 0, flow, cfg)
        assert adv == pytest.approx(0.5)
        assert smooth == pytest.approx(2.0, abs=1e-9)
        assert total == pytest.approx(10.5, abs=1e-8)


class TestSchedule:
    def test_hand_arithmetic(self):
        cfg = AttackConfig(q_max=1000, n_sample=10, xi_init=0.1, xi_max=3.0)
        st = ScheduleState.from_config(cfg)
        assert st.alpha == pytest.approx(0.029)
        assert st.xi == pytest.approx(0.1)
        st.step()
        assert st.xi == pytest.approx(0.129)

    def test_cap_after_total_steps(self):
        cfg = AttackConfig(q_max=1000, n_sample=10, xi_init=0.1, xi_max=3.0)
        st = ScheduleState.from_config(cfg)
        for _ in range(100):
            st.step()
        assert st.xi == pytest.approx(3.0)
        st.step()
        assert st.xi == pytest.approx(3.0)

    def test_rescaled_alpha_reaches_max(self):
        cfg = AttackConfig(
            q_max=1000, n_sample=10, adjust_num=20, rescale_alpha=True
        )
        st = ScheduleState.from_config(cfg)
        for _ in range(100 // 20):
            st.step()
        assert st.xi == pytest.approx(3.0)


class TestSampleFlows:
    def test_degenerate_sigma(self):
        mu = np.random.default_rng(0).normal(0, 1, (2, 3, 3))
        flows, _ = sample_flows(mu, 1e-30, np.random.default_rng(1), 5)
        assert np.max(np.abs(flows - mu)) < 1e-20

    def test_deterministic_streams(self):
        mu = np.zeros((2, 3, 3))
        f1, e1 = sample_flows(mu, 0.2, np.random.default_rng(42), 4)
        f2, e2 = sample_flows(mu, 0.2, np.random.default_rng(42), 4)
        assert np.array_equal(f1, f2)
        assert np.array_equal(e1, e2)

    def test_sample_mean_clt(self):
        mu = np.full((2, 1, 1), 0.3)
        sigma = 0.5
        flows, _ = sample_flows(mu, sigma, np.random.default_rng(7), 10**5)
        err = abs(flows[:, 0, 0, 0].mean() - 0.3)
        assert err < 4 * sigma / np.sqrt(10**5)


class TestNesGradient:
    def test_equal_losses_zero(self):
        eps = np.random.default_rng(0).normal(0, 1, (5, 2, 3, 3))
        grad = nes_gradient(np.full(5, 2.7), eps)
        assert np.all(grad == 0.0)

    def test_two_sample_hand_value(self):
        eps = np.random.default_rng(1).normal(0, 1, (2, 2, 2, 2))
        grad = nes_gradient(np.array([1.0, -1.0]), eps)
        assert np.allclose(grad, (eps[0] - eps[1]) / 2.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(2)
        losses = rng.normal(0, 1, 10)
        eps = rng.normal(0, 1, (10, 2, 4, 4))
        base = nes_gradient(losses, eps)
        assert np.allclose(nes_gradient(losses + 13.0, eps), base, atol=1e-9)
        assert np.allclose(nes_gradient(losses * 4.2, eps), base, atol=1e-9)

    def test_quadratic_oracle_cosine(self):
        rng = np.random.default_rng(3)
        f_star = rng.normal(0, 1, (2, 4, 4))
        mu = np.zeros((2, 4, 4))
        analytic = 2 * (mu - f_star)
        sigma = 0.1
        estimates = []
        for seed in range(20):
            flows, eps = sample_flows(mu, sigma, np.random.default_rng(seed), 50)
            losses = np.sum((flows - f_star) ** 2, axis=(1, 2, 3))
            estimates.append(nes_gradient(losses, eps))
        est = np.mean(estimates, axis=0)
        cos = np.sum(est * analytic) / (np.linalg.norm(est) * np.linalg.norm(analytic))
        assert cos >= 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nes_gradient(np.zeros(3), np.zeros((4, 2, 2, 2)))


class TestRunAttack:
    def test_budget_too_small(self):
        oracle = FixedOracle([0.9, 0.1])
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        cfg = AttackConfig(q_max=5, n_sample=5, seed=0)
        res = run_attack(oracle, item, cfg)
        assert not res.success
        assert res.iterations == 0
        assert res.queries_used == 0

    def test_immediate_success(self):
        oracle = FixedOracle([0.1, 0.9])  # always misclassifies class 0
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        cfg = AttackConfig(q_max=100, n_sample=4, seed=0)
        res = run_attack(oracle, item, cfg)
        assert res.success
        assert res.queries_used == 5
        assert np.max(np.abs(res.final_flow)) <= cfg.xi_init + 1e-12

    def test_query_accounting_per_iteration(self):
        oracle = FixedOracle([0.9, 0.1])  # never misclassifies: runs out budget
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        cfg = AttackConfig(q_max=100, n_sample=10, seed=0)
        res = run_attack(oracle, item, cfg)
        assert not res.success
        assert res.queries_used == res.iterations * (cfg.n_sample + 1)
        assert res.queries_used <= cfg.q_max
        assert oracle.calls == res.queries_used

    def test_determinism(self):
        model = make_fixture_model()
        oracle = MlpOracle(model)
        item = make_fixture_dataset(1, seed=5, model=model)[0]
        cfg = AttackConfig(q_max=300, seed=11)
        r1 = run_attack(oracle, item, cfg)
        r2 = run_attack(oracle, item, cfg)
        assert r1.success == r2.success
        assert r1.queries_used == r2.queries_used
        assert np.array_equal(r1.adversarial, r2.adversarial)
        assert np.array_equal(r1.final_flow, r2.final_flow)
        assert r1.loss_trace == r2.loss_trace

    def test_success_predicate_reverifies(self):
        model = make_fixture_model()
        oracle = MlpOracle(model)
        items = make_fixture_dataset(5, seed=2, model=model)
        for i, item in enumerate(items):
            res = run_attack(oracle, item, AttackConfig(q_max=1000, seed=i))
            if res.success:
                assert int(np.argmax(oracle.predict(res.adversarial))) != item.label

    def test_xi_trace_monotone(self):
        oracle = FixedOracle([0.9, 0.1])
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        res = run_attack(oracle, item, AttackConfig(q_max=500, n_sample=10, seed=1))
        xis = [x for _, x in res.xi_trace]
        assert all(b >= a for a, b in zip(xis, xis[1:]))
        assert xis[0] == pytest.approx(0.1)
        assert max(xis) <= 3.0 + 1e-12

    def test_shape_mismatch_before_query(self):
        oracle = FixedOracle([0.9, 0.1], input_shape=(1, 3, 3))
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        with pytest.raises(ValueError):
            run_attack(oracle, item, AttackConfig(q_max=100, n_sample=4))
        assert oracle.calls == 0

    def test_result_serialization_round_trip(self):
        oracle = FixedOracle([0.1, 0.9])
        item = LabeledImage(np.full((1, 2, 2), 0.5), 0)
        res = run_attack(oracle, item, AttackConfig(q_max=100, n_sample=4, seed=3))
        doc = result_to_dict(res)
        adv = decode_array_f32(doc["adversarial"])
        assert np.allclose(adv, res.adversarial, atol=1e-6)
