import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpae.data import LabeledDataset, one_hot
from qpae.eraser import (InvalidClassError, QuantumLoss, UnlearnConfig,
                         apply_mixing, build_mixing_matrix,
                         interference_transform, quantum_loss,
                         quantum_loss_logit_grad, run_qp_audio_eraser,
                         superpose_labels, suppression_check)
from qpae.model import Classifier, TrainConfig, forward, predict_probs, softmax
from qpae.rng import Rng

distributions = st.lists(st.floats(min_value=1e-6, max_value=1.0),
                         min_size=2, max_size=12).map(
    lambda w: np.array(w) / np.sum(w))


def linear_model(w, b):
    return Classifier([], np.asarray(w, dtype=float), np.asarray(b, dtype=float))


class TestInterferenceTransform:
    def test_phi_pi_example_values(self):
        m = linear_model([[0.8, 1.0], [-0.4, 2.0]], [0.5, 3.0])
        interference_transform(m, {0}, math.pi)
        assert m.final_w[:, 0] == pytest.approx([-0.565685424949238, 0.282842712474619], abs=1e-12)
        assert m.final_b[0] == -0.5

    def test_phi_half_pi_zeroes_column(self):
        m = linear_model([[0.8, 1.0], [-0.4, 2.0]], [0.5, 3.0])
        interference_transform(m, {0}, math.pi / 2.0)
        assert np.all(m.final_w[:, 0] == 0.0)
        assert m.final_b[0] == 0.0

    def test_retained_parameters_bit_identical(self):
        rng = Rng(1)
        for s in range(50):
            m = Classifier.random_init(6, [5], 4, Rng(s))
            before = m.copy()
            forget = {int(rng.randbelow(4))}
            interference_transform(m, forget, math.pi)
            retained = [j for j in range(4) if j not in forget]
            assert np.array_equal(m.final_w[:, retained], before.final_w[:, retained])
            assert np.array_equal(m.final_b[retained], before.final_b[retained])
            for (w, b), (w0, b0) in zip(m.hidden, before.hidden):
                assert np.array_equal(w, w0) and np.array_equal(b, b0)

    def test_phi_pi_is_negated_over_sqrt2_within_2ulp(self):
        for s in range(20):
            m = Classifier.random_init(5, [], 3, Rng(100 + s))
            ref = -m.final_w[:, 1] / np.sqrt(2.0)
            interference_transform(m, {1}, math.pi)
            diff = np.abs(m.final_w[:, 1] - ref)
            assert np.all(diff <= 2.0 * np.spacing(np.abs(ref)))

    def test_invalid_class(self):
        m = linear_model([[1.0, 0.0]], [0.0, 0.0])
        with pytest.raises(InvalidClassError):
            interference_transform(m, {5}, math.pi)
        with pytest.raises(InvalidClassError):
            interference_transform(m, {0, 1}, math.pi)  # nothing retained


class TestSuppressionCheck:
    def _forget_samples(self):
        x = np.array([[2.0, 0.1], [1.5, -0.2]])
        labels = np.stack([one_hot(0, 2)] * 2)
        return LabeledDataset(x, labels, np.zeros(2, dtype=np.int64), 2)

    def test_confident_model_drops(self):
        m = linear_model([[4.0, -4.0], [0.0, 0.0]], [0.0, 0.0])
        after = m.copy()
        interference_transform(after, {0}, math.pi)
        drop = suppression_check(m, after, self._forget_samples())
        assert drop > 0.0

    def test_identical_models_zero_drop(self):
        m = linear_model([[4.0, -4.0], [0.0, 0.0]], [0.0, 0.0])
        assert suppression_check(m, m.copy(), self._forget_samples()) == 0.0

    def test_zero_column_is_noop(self):
        m = linear_model([[0.0, 1.0], [0.0, 1.0]], [0.0, 0.5])
        after = m.copy()
        interference_transform(after, {0}, math.pi)
        assert suppression_check(m, after, self._forget_samples()) == 0.0

    def test_monotone_when_margin_positive(self):
        # whenever the model genuinely prefers the forgotten class on its own
        # samples, phase 1 never raises that probability
        for s in range(20):
            rng = Rng(500 + s)
            m = Classifier.random_init(4, [], 3, Rng(s))
            m.final_w[:, 0] += 1.0  # bias the margin toward class 0
            x = np.abs(rng.normal(4 * 6).reshape(6, 4))
            data = LabeledDataset(x, np.stack([one_hot(0, 3)] * 6),
                                  np.zeros(6, dtype=np.int64), 3)
            probs = predict_probs(m, data.features)
            if np.mean(probs[:, 0]) <= 1.0 / 3.0:
                continue
            after = m.copy()
            interference_transform(after, {0}, math.pi)
            assert suppression_check(m, after, data) >= 0.0


class TestSuperposeLabels:
    def test_forget_labels_become_uniform(self):
        data = LabeledDataset(np.zeros((3, 2)),
                              np.stack([one_hot(2, 4), one_hot(1, 4), one_hot(2, 4)]),
                              np.array([2, 1, 2]), 4)
        out = superpose_labels(data, {2})
        assert out.labels[0].tolist() == [0.25, 0.25, 0.25, 0.25]
        assert out.labels[2].tolist() == [0.25, 0.25, 0.25, 0.25]

    def test_retained_labels_bit_identical_and_bookkeeping_kept(self):
        data = LabeledDataset(np.zeros((2, 2)),
                              np.stack([one_hot(1, 4), one_hot(3, 4)]),
                              np.array([1, 3]), 4)
        out = superpose_labels(data, {3})
        assert np.array_equal(out.labels[0], data.labels[0])
        assert np.array_equal(out.original_classes, data.original_classes)
        assert np.array_equal(data.labels[1], one_hot(3, 4))  # input untouched

    def test_multi_class_forget_set(self):
        labels = np.stack([one_hot(c, 10) for c in (0, 4, 7)])
        data = LabeledDataset(np.zeros((3, 2)), labels, np.array([0, 4, 7]), 10)
        out = superpose_labels(data, {0, 4})
        assert np.allclose(out.labels[0], 0.1) and np.allclose(out.labels[1], 0.1)
        assert np.array_equal(out.labels[2], one_hot(7, 10))

    def test_labels_still_sum_to_one(self):
        rng = Rng(9)
        raw = rng.uniform(20 * 5).reshape(20, 5) + 1e-3
        labels = raw / raw.sum(axis=1, keepdims=True)
        data = LabeledDataset(np.zeros((20, 3)), labels,
                              np.array([i % 5 for i in range(20)]), 5)
        out = superpose_labels(data, {1, 3})
        assert np.max(np.abs(out.labels.sum(axis=1) - 1.0)) <= 1e-9


class TestQuantumLoss:
    def test_retained_branch_is_cross_entropy(self):
        pred = np.full(10, 0.1)
        val = quantum_loss(pred, one_hot(3, 10), 3, {7}, 1.0)
        assert val == pytest.approx(math.log(10), abs=1e-9)

    def test_forget_branch_minimum_at_uniform(self):
        pred = np.full(10, 0.1)
        val = quantum_loss(pred, one_hot(7, 10), 7, {7}, 1.0)
        assert val == pytest.approx(-math.log(10), abs=1e-12)

    def test_forget_branch_near_onehot_is_near_zero(self):
        pred = np.array([1.0 - 9e-9] + [1e-9] * 9)
        val = quantum_loss(pred, one_hot(0, 10), 0, {0}, 1.0)
        assert -1e-6 < val <= 0.0
        assert val > -math.log(10)

    def test_bounded_below_and_attained_only_at_uniform(self):
        rng = Rng(77)
        k = 6
        floor = -math.log(k)
        for _ in range(500):
            p = rng.uniform(k) + 1e-9
            p /= p.sum()
            val = quantum_loss(p, one_hot(0, k), 0, {0}, 1.0)
            assert val >= floor - 1e-12
            if abs(val - floor) < 1e-9:
                assert np.max(np.abs(p - 1.0 / k)) < 1e-4
        at_uniform = quantum_loss(np.full(k, 1.0 / k), one_hot(0, k), 0, {0}, 1.0)
        assert at_uniform == pytest.approx(floor, abs=1e-12)

    def test_lambda_scales_forget_branch(self):
        p = np.array([0.6, 0.3, 0.1])
        v1 = quantum_loss(p, one_hot(0, 3), 0, {0}, 1.0)
        v2 = quantum_loss(p, one_hot(0, 3), 0, {0}, 2.5)
        assert v2 == pytest.approx(2.5 * v1, rel=1e-12)


def fd_entropy_grad(p, lam=1.0, h=1e-6):
    """Independent oracle: central differences of -lam*H(softmax(z))."""
    z = np.log(p)
    out = np.zeros_like(z)
    for k in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        def val(zz):
            q = softmax(zz)
            nz = q > 0
            return lam * float(np.sum(q[nz] * np.log(q[nz])))
        out[k] = (val(zp) - val(zm)) / (2.0 * h)
    return out


class TestQuantumLossLogitGrad:
    def test_uniform_is_exactly_stationary(self):
        for k in (2, 5, 10):
            g = quantum_loss_logit_grad(np.full(k, 1.0 / k), one_hot(0, k), 0, {0}, 1.0)
            assert np.max(np.abs(g)) <= 1e-15

    def test_frozen_oracle_value_07_03(self):
        # frozen from the central-difference oracle of -H(softmax(z))
        g = quantum_loss_logit_grad(np.array([0.7, 0.3]), one_hot(0, 2), 0, {0}, 1.0)
        assert g == pytest.approx([0.17793255, -0.17793255], abs=1e-7)
        assert g == pytest.approx(fd_entropy_grad(np.array([0.7, 0.3])), abs=1e-9)

    def test_retained_branch_is_softmax_minus_target(self):
        p = np.array([0.2, 0.5, 0.3])
        t = one_hot(1, 3)
        g = quantum_loss_logit_grad(p, t, 1, {0}, 1.0)
        assert np.allclose(g, p - t, atol=1e-15)

    def test_matches_finite_differences_1000_random(self):
        rng = Rng(404)
        worst = 0.0
        for _ in range(1000):
            k = 2 + rng.randbelow(9)
            lam = 0.25 + rng.uniform()
            p = rng.uniform(k) + 1e-4
            p /= p.sum()
            g = quantum_loss_logit_grad(p, one_hot(0, k), 0, {0}, lam)
            fd = fd_entropy_grad(p, lam)
            err = np.max(np.abs(g - fd) / np.maximum(1.0, np.maximum(np.abs(g), np.abs(fd))))
            worst = max(worst, float(err))
        assert worst <= 1e-4

    @given(distributions)
    @settings(max_examples=200)
    def test_gradient_sums_to_zero(self, p):
        g = quantum_loss_logit_grad(p, one_hot(0, len(p)), 0, {0}, 1.0)
        assert abs(float(np.sum(g))) <= 1e-12

    def test_batch_forms_match_scalar_ops(self):
        rng = Rng(21)
        loss = QuantumLoss({0, 2}, entropy_lambda=1.7)
        k = 5
        probs = rng.uniform(8 * k).reshape(8, k) + 1e-4
        probs /= probs.sum(axis=1, keepdims=True)
        targets = np.stack([one_hot(int(rng.randbelow(k)), k) for _ in range(8)])
        classes = np.array([int(rng.randbelow(k)) for _ in range(8)])
        values = loss.batch_values(probs, targets, classes)
        grads = loss.batch_logit_grads(probs, targets, classes)
        for i in range(8):
            assert values[i] == pytest.approx(
                quantum_loss(probs[i], targets[i], int(classes[i]), {0, 2}, 1.7), abs=1e-9)
            assert grads[i] == pytest.approx(
                quantum_loss_logit_grad(probs[i], targets[i], int(classes[i]), {0, 2}, 1.7),
                abs=1e-12)


class TestMixing:
    def test_k3_example(self):
        m = build_mixing_matrix(3, {1}, 0.3)
        assert m.tolist() == [[1.0, 0.3, 0.0], [0.3, 1.0, 0.3], [0.0, 0.3, 1.0]]

    def test_symmetric_unit_diagonal(self):
        rng = Rng(14)
        for _ in range(25):
            k = 3 + rng.randbelow(8)
            f = {int(rng.randbelow(k))}
            alpha = 0.2 + 0.6 * rng.uniform()
            m = build_mixing_matrix(k, f, alpha)
            assert np.array_equal(m, m.T)
            assert np.all(np.diag(m) == 1.0)

    def test_multi_class_no_mixing_between_forgotten(self):
        m = build_mixing_matrix(4, {0, 2}, 0.2)
        assert m[0, 2] == 0.0 and m[2, 0] == 0.0
        for i, j in ((0, 1), (1, 0), (0, 3), (2, 1), (2, 3)):
            assert m[i, j] == 0.2
        assert m[1, 3] == 0.0 and m[3, 1] == 0.0

    def test_apply_mixing_d1_example(self):
        model = linear_model([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0])
        apply_mixing(model, build_mixing_matrix(3, {0}, 0.5))
        assert model.final_w[0].tolist() == [3.5, 2.5, 3.5]
        _, logits = forward(model, np.array([1.0]))
        assert logits.tolist() == [3.5, 2.5, 3.5]

    def test_identity_matrix_is_noop(self):
        model = linear_model([[1.0, 2.0], [0.5, -0.5]], [0.1, 0.2])
        before = model.copy()
        apply_mixing(model, np.eye(2))
        assert model.equals_bits(before)

    def test_closed_form_identities_random(self):
        # oracle: Eq-style closed forms computed element by element
        rng = Rng(31)
        for _ in range(100):
            d, k = 8, 5
            w = rng.normal(d * k).reshape(d, k)
            h = rng.normal(d)
            f = int(rng.randbelow(k))
            alpha = 0.2 + 0.6 * rng.uniform()
            model = linear_model(w.copy(), np.zeros(k))
            apply_mixing(model, build_mixing_matrix(k, {f}, alpha))
            _, mixed = forward(model, h)
            base = w.T @ h
            for j in range(k):
                if j == f:
                    expected = base[f] + alpha * sum(base[i] for i in range(k) if i != f)
                else:
                    expected = base[j] + alpha * base[f]
                assert abs(mixed[j] - expected) <= 1e-10

    def test_bias_unchanged(self):
        model = linear_model([[1.0, 2.0, 3.0]], [0.4, 0.5, 0.6])
        apply_mixing(model, build_mixing_matrix(3, {0}, 0.3))
        assert model.final_b.tolist() == [0.4, 0.5, 0.6]

    def test_shape_mismatch(self):
        model = linear_model([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            apply_mixing(model, np.eye(4))


class TestUnlearnConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            UnlearnConfig(forget_set=frozenset())
        with pytest.raises(ValueError):
            UnlearnConfig(forget_set={0}, alpha=1.5)
        with pytest.raises(ValueError):
            UnlearnConfig(forget_set={0}, entropy_lambda=0.0)
        with pytest.raises(InvalidClassError):
            UnlearnConfig(forget_set={-1})


class TestPipeline:
    def test_all_phases_disabled_is_bit_identical(self, tiny_model, tiny_data):
        before = tiny_model.copy()
        cfg = UnlearnConfig(forget_set={0}, skip_weight_transform=True,
                            skip_uncertainty_max=True, skip_mixing=True,
                            train=TrainConfig(seed=1))
        model, log = run_qp_audio_eraser(tiny_model, tiny_data, cfg)
        assert model.equals_bits(before)
        assert [e["skipped"] for e in log] == [True, False, True, True]

    def test_tiny_run_erases_class(self, tiny_model, tiny_data):
        cfg = UnlearnConfig(forget_set={1}, epochs=5,
                            train=TrainConfig(learning_rate=0.05, epochs=5, seed=3))
        model, log = run_qp_audio_eraser(tiny_model, tiny_data, cfg)
        assert log[-1]["forget_accuracy"] == 0.0
        assert log[-1]["retain_accuracy"] >= 80.0

    def test_sequential_two_requests(self):
        from qpae.audio import synth_dataset
        from qpae.eraser import accuracy_snapshot
        from qpae.model import CrossEntropyLoss, train
        data = synth_dataset(6, 20, seed=13, n_mels=8, n_frames=8)
        model = Classifier.random_init(data.feature_dim, [24], 6, Rng(2))
        train(model, data, TrainConfig(learning_rate=0.01, epochs=3, seed=5),
              CrossEntropyLoss())
        cfg1 = UnlearnConfig(forget_set={0}, epochs=5,
                             train=TrainConfig(learning_rate=0.1, epochs=5, seed=3))
        model, _ = run_qp_audio_eraser(model, data, cfg1)
        data2 = superpose_labels(data, {0})
        cfg2 = UnlearnConfig(forget_set={1}, epochs=5,
                             train=TrainConfig(learning_rate=0.1, epochs=5, seed=4))
        model, _ = run_qp_audio_eraser(model, data2, cfg2)
        fa_union, ra = accuracy_snapshot(model, data, frozenset({0, 1}))
        assert fa_union == 0.0
        assert ra >= 50.0

    def test_phase_log_schema(self, tiny_model, tiny_data):
        cfg = UnlearnConfig(forget_set={2}, epochs=1, train=TrainConfig(seed=2))
        _, log = run_qp_audio_eraser(tiny_model, tiny_data, cfg)
        assert [e["phase"] for e in log] == ["interference", "superposition",
                                             "optimization", "mixing"]
        for entry in log:
            assert set(entry) == {"phase", "forget_accuracy", "retain_accuracy",
                                  "wall_ms", "skipped"}
            assert entry["wall_ms"] >= 0.0

    def test_side_phases_at_least_10x_faster_than_one_epoch(self, desk):
        from qpae import harness
        model = desk["model"].copy()
        ucfg = harness._unlearn_config(desk["cfg"])
        _, log = run_qp_audio_eraser(model, desk["train"], ucfg)
        entries = {e["phase"]: e for e in log}
        epoch_ms = entries["optimization"]["wall_ms"] / ucfg.epochs
        for phase in ("interference", "superposition", "mixing"):
            assert entries[phase]["wall_ms"] * 10.0 <= epoch_ms, (
                f"{phase} took {entries[phase]['wall_ms']:.3f} ms vs "
                f"{epoch_ms:.3f} ms per optimization epoch")
