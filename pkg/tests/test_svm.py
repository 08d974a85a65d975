"""SVM training, calibration, decoding, and persistence.

The dual solver is cross-checked against an independent dense-QP oracle
(scipy SLSQP on the same kernel matrix), which is feasible at the toy
problem sizes used here.
"""

import numpy as np
import pytest
from scipy.optimize import minimize

from stresskit.prosody import NucleusFeatures
from stresskit.svm import (
    Scaler,
    SvmModel,
    TrainInstance,
    decision_value,
    decision_values,
    grid_search,
    load_model,
    platt_fit,
    platt_probability,
    predict_word,
    save_model,
    smo_solve,
    train_svm,
    word_accuracy_on_instances,
)


def _nf(vec):
    return NucleusFeatures(*[float(v) for v in vec])


def _pad10(xy):
    return list(xy) + [0.0] * 7 + [1.0]


def _instances(X2, labels):
    return [TrainInstance(_nf(_pad10(x)), int(l), f"w{i}", 0)
            for i, (x, l) in enumerate(zip(X2, labels))]


def _blobs(seed=0, n_per=10, gap=2.0):
    rng = np.random.default_rng(seed)
    a = rng.normal((-gap, 0), 0.3, size=(n_per, 2))
    b = rng.normal((+gap, 0), 0.3, size=(n_per, 2))
    X = np.vstack([a, b])
    y = np.array([0] * n_per + [1] * n_per)
    return X, y


def _xor(seed=1, n_per=10):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for cx, cy in [(-1, -1), (-1, 1), (1, -1), (1, 1)]:
        X.append(rng.normal((cx, cy), 0.15, size=(n_per, 2)))
        y += [int(cx * cy > 0)] * n_per
    return np.vstack(X), np.array(y)


def _qp_oracle(K, y, C):
    """Dense dual solve by SLSQP: max sum(a) - 0.5 a'Qa, 0<=a<=C, y'a=0."""
    Q = K * np.outer(y, y)
    n = len(y)
    res = minimize(
        lambda a: 0.5 * a @ Q @ a - a.sum(),
        x0=np.full(n, min(C / 2, 0.1)),
        jac=lambda a: Q @ a - 1.0,
        bounds=[(0.0, C)] * n,
        constraints=[{"type": "eq", "fun": lambda a: y @ a,
                      "jac": lambda a: y}],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-12},
    )
    assert res.success, res.message
    return res.x


def _oracle_decision(K_train, K_eval, y, alpha, C):
    yam = alpha * y
    free = (alpha > 1e-6 * C) & (alpha < C * (1 - 1e-6))
    if free.any():
        bias = float(np.mean(y[free] - K_train[free] @ yam))
    else:
        bias = 0.0
    return K_eval @ yam + bias


def _dual_objective(K, y, alpha):
    Q = K * np.outer(y, y)
    return alpha.sum() - 0.5 * alpha @ Q @ alpha


class TestSmoAgainstQpOracle:
    def test_separable_blobs_training_accuracy(self):
        X, labels = _blobs()
        data = _instances(X, labels)
        model = train_svm(data, C=10)
        acc = np.mean([
            (decision_value(model, d.features) > 0) == (d.label == 1)
            for d in data
        ])
        assert acc == 1.0

    def test_xor_all_correct_and_matches_oracle_signs(self):
        X, labels = _xor()
        data = _instances(X, labels)
        model = train_svm(data, C=10)
        f = decision_values(model, [d.features for d in data])
        assert np.all((f > 0) == (labels == 1))

        # Independent solve on the identical scaled kernel problem.
        Xs = model.scaler.transform(np.array([d.features.as_vector() for d in data]))
        sq = ((Xs[:, None] - Xs[None, :]) ** 2).sum(-1)
        K = np.exp(-model.gamma * sq)
        y = np.where(labels == 1, 1.0, -1.0)
        alpha = _qp_oracle(K, y, 10.0)
        f_oracle = _oracle_decision(K, K, y, alpha, 10.0)
        assert np.all(np.sign(f) == np.sign(f_oracle))

    def test_random_set_signs_and_objective(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 2))
        labels = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=30) > 0).astype(int)
        data = _instances(X, labels)
        model = train_svm(data, C=1.0)

        Xs = model.scaler.transform(np.array([d.features.as_vector() for d in data]))
        sq = ((Xs[:, None] - Xs[None, :]) ** 2).sum(-1)
        K = np.exp(-model.gamma * sq)
        y = np.where(labels == 1, 1.0, -1.0)

        alpha_smo, bias, _ = smo_solve(K, y, 1.0, tol=1e-4)
        alpha_qp = _qp_oracle(K, y, 1.0)
        assert abs(_dual_objective(K, y, alpha_smo)
                   - _dual_objective(K, y, alpha_qp)) <= 1e-3

        f_smo = K @ (alpha_smo * y) + bias
        f_qp = _oracle_decision(K, K, y, alpha_qp, 1.0)
        assert np.all(np.sign(f_smo) == np.sign(f_qp))

    def test_kkt_and_dual_constraints(self):
        X, labels = _xor(seed=3)
        data = _instances(X, labels)
        for C in (0.1, 1.0, 10.0):
            model = train_svm(data, C=C, tol=1e-3)
            assert abs(model.dual_coefs.sum()) <= 1e-6
            mags = np.abs(model.dual_coefs)
            assert np.all((mags > 0) & (mags <= C + 1e-9))

            Xs = model.scaler.transform(np.array([d.features.as_vector()
                                                  for d in data]))
            sq = ((Xs[:, None] - Xs[None, :]) ** 2).sum(-1)
            K = np.exp(-model.gamma * sq)
            y = np.where(labels == 1, 1.0, -1.0)
            alpha, _, _ = smo_solve(K, y, C, tol=1e-3)
            grad = (K * np.outer(y, y)) @ alpha - 1.0
            score = -y * grad
            up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
            low = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
            assert score[up].max() - score[low].min() <= 1e-3 + 1e-9

    def test_deterministic(self):
        X, labels = _xor(seed=9)
        data = _instances(X, labels)
        a = train_svm(data, C=10, seed=4)
        b = train_svm(data, C=10, seed=4)
        assert np.array_equal(a.dual_coefs, b.dual_coefs)
        assert np.array_equal(a.support_vectors, b.support_vectors)
        assert a.bias == b.bias

    def test_gamma_scale_is_one_tenth(self):
        # With every column varying, z-scoring makes the pooled variance 1,
        # so gamma = 1 / (10 features * 1).
        rng = np.random.default_rng(2)
        X10 = rng.normal(size=(40, 10)) * rng.uniform(0.1, 9, 10) + rng.normal(size=10)
        labels = (X10[:, 0] > X10[:, 0].mean()).astype(int)
        data = [TrainInstance(_nf(x), int(l), f"w{i}", 0)
                for i, (x, l) in enumerate(zip(X10, labels))]
        model = train_svm(data)
        assert model.gamma == pytest.approx(0.1, rel=1e-9)

    def test_standardization_invariance(self):
        rng = np.random.default_rng(31)
        X = rng.normal(size=(24, 2))
        labels = (X[:, 0] > 0).astype(int)
        data = _instances(X, labels)

        # Affinely rescale one raw feature column and refit.
        vecs = [d.features.as_vector() for d in data]
        for v in vecs:
            v[1] = 7.0 * v[1] + 5.0
        data2 = [TrainInstance(_nf(v), d.label, d.word_id, d.nucleus_index)
                 for v, d in zip(vecs, data)]

        m1 = train_svm(data, C=10, seed=0)
        m2 = train_svm(data2, C=10, seed=0)
        f1 = decision_values(m1, [d.features for d in data])
        f2 = decision_values(m2, [d.features for d in data2])
        assert np.allclose(f1, f2, atol=1e-9)

    def test_single_class_refused(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError, match="both classes"):
            train_svm(_instances(X, [1, 1, 1, 1]))

    def test_nonfinite_feature_names_word(self):
        X, labels = _blobs(n_per=3)
        data = _instances(X, labels)
        bad = data[2].features.as_vector()
        bad[4] = np.nan
        data[2] = TrainInstance(_nf(bad), data[2].label, "w_bad", 0)
        with pytest.raises(ValueError, match="w_bad"):
            train_svm(data)


def _identity_scaler(d=10):
    return Scaler(np.zeros(d), np.ones(d))


def _linear_probe_model():
    """decision(x) = x[0]: one linear 'support vector' on the first axis."""
    return SvmModel(
        kernel="linear",
        support_vectors=np.eye(10)[:1],
        dual_coefs=np.array([1.0]),
        bias=0.0,
        gamma=0.1,
        C=10.0,
        scaler=_identity_scaler(),
    )


class TestDecisionValue:
    def test_hand_expanded_kernel_sum(self):
        sv = np.zeros((2, 10))
        sv[0, 0] = 1.0
        sv[1, 1] = 1.0
        model = SvmModel("rbf", sv, np.array([0.7, -0.4]), 0.25, 0.3, 10.0,
                         _identity_scaler())
        x = _nf([0.2, -0.1] + [0.0] * 8)
        d1 = (0.2 - 1.0) ** 2 + (-0.1) ** 2          # 0.65
        d2 = 0.2 ** 2 + (-0.1 - 1.0) ** 2            # 1.25
        expected = 0.7 * np.exp(-0.3 * d1) - 0.4 * np.exp(-0.3 * d2) + 0.25
        assert decision_value(model, x) == pytest.approx(expected, abs=1e-12)

    def test_symmetric_pair_cancels_to_bias(self):
        sv = np.zeros((2, 10))
        sv[0, 0] = 1.0
        sv[1, 0] = -1.0
        model = SvmModel("rbf", sv, np.array([0.8, -0.8]), -0.35, 0.5, 10.0,
                         _identity_scaler())
        x = _nf([0.0] * 10)
        assert decision_value(model, x) == pytest.approx(-0.35, abs=1e-15)

    def test_positive_sv_far_from_negatives(self):
        X, labels = _blobs(gap=3.0)
        data = _instances(X, labels)
        model = train_svm(data, C=10)
        pos = [d for d in data if d.label == 1][0]
        assert decision_value(model, pos.features) > 0


class TestPlatt:
    def test_separated_direction(self):
        decisions = [-1.0] * 10 + [1.0] * 10
        labels = [0] * 10 + [1] * 10
        A, B = platt_fit(decisions, labels)
        assert A < 0
        p_hi = 1 / (1 + np.exp(A * 1.0 + B))
        p_lo = 1 / (1 + np.exp(A * -1.0 + B))
        assert p_hi > 0.9 > 0.1 > p_lo

    def test_independent_labels_give_prior(self):
        rng = np.random.default_rng(12)
        decisions = rng.normal(size=400)
        labels = (rng.random(400) < 0.3).astype(int)
        A, B = platt_fit(decisions, labels)
        p = 1 / (1 + np.exp(A * decisions + B))
        prior = labels.mean()
        assert np.all(np.abs(p - prior) < 0.05)

    def test_monotone_for_negative_A(self):
        decisions = np.linspace(-2, 2, 30)
        labels = (decisions > 0).astype(int)
        A, B = platt_fit(decisions, labels)
        assert A < 0
        p = 1 / (1 + np.exp(A * decisions + B))
        assert np.all(np.diff(p) >= 0)

    def test_constant_decisions(self):
        A, B = platt_fit([0.0] * 20, [1] * 8 + [0] * 12)
        p = 1 / (1 + np.exp(B))
        assert p == pytest.approx(8 / 20, abs=0.05)

    def test_single_class_refused(self):
        with pytest.raises(ValueError):
            platt_fit([0.1, 0.2], [1, 1])

    def test_probability_via_model(self):
        model = _linear_probe_model()
        model.platt = (-2.0, 0.1)
        f = 1.5
        expected = 1 / (1 + np.exp(-2.0 * f + 0.1))
        assert platt_probability(model, f) == pytest.approx(expected, rel=1e-12)

    def test_probability_requires_fit(self):
        with pytest.raises(ValueError):
            platt_probability(_linear_probe_model(), 0.0)


class TestPredictWord:
    def test_argmax(self):
        model = _linear_probe_model()
        feats = [_nf([v] + [0.0] * 9) for v in (-1.0, 0.5, -0.2)]
        idx, scores = predict_word(model, feats)
        assert idx == 1
        assert np.allclose(scores, [-1.0, 0.5, -0.2])

    def test_tie_goes_to_lowest_index(self):
        model = _linear_probe_model()
        feats = [_nf([0.3] + [0.0] * 9), _nf([0.3] + [0.0] * 9)]
        idx, _ = predict_word(model, feats)
        assert idx == 0

    def test_matches_independent_per_nucleus_calls(self):
        X, labels = _xor(seed=21)
        model = train_svm(_instances(X, labels), C=10)
        rng = np.random.default_rng(3)
        feats = [_nf(_pad10(rng.normal(size=2))) for _ in range(4)]
        idx, scores = predict_word(model, feats)
        singles = [decision_value(model, f) for f in feats]
        assert np.allclose(scores, singles, atol=1e-12)
        assert idx == int(np.argmax(singles))

    def test_empty_refused(self):
        with pytest.raises(ValueError):
            predict_word(_linear_probe_model(), [])

    def test_invariant_under_monotone_transform(self):
        # argmax over scores equals argmax over any increasing transform.
        model = _linear_probe_model()
        rng = np.random.default_rng(6)
        for _ in range(20):
            feats = [_nf([v] + [0.0] * 9) for v in rng.normal(size=3)]
            idx, scores = predict_word(model, feats)
            assert idx == int(np.argmax(np.tanh(scores) * 3 + 1))


class TestPersistence:
    def test_round_trip_decision_values(self, tmp_path):
        X, labels = _xor(seed=33)
        data = _instances(X, labels)
        model = train_svm(data, C=10)
        f_dec = decision_values(model, [d.features for d in data])
        model.platt = platt_fit(f_dec, labels)

        path = tmp_path / "model.json"
        save_model(model, path)
        again = load_model(path)
        f2 = decision_values(again, [d.features for d in data])
        assert np.max(np.abs(f2 - f_dec)) <= 1e-12
        assert again.platt == pytest.approx(model.platt)
        assert again.kernel == "rbf"

    def test_unknown_format_refused(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text('{"format": "other/9"}')
        with pytest.raises(ValueError, match="format"):
            load_model(path)


class TestGridSearch:
    def test_report_and_best(self):
        X, labels = _blobs(seed=14, n_per=8)
        data = _instances(X, labels)
        # Word-level eval needs one positive nucleus per word: pair up
        # instances into 8 two-nucleus words.
        words = []
        for w in range(8):
            neg = data[w]
            pos = data[8 + w]
            words.append(TrainInstance(neg.features, 0, f"word{w}", 0))
            words.append(TrainInstance(pos.features, 1, f"word{w}", 1))
        model, report = grid_search(words, words)
        assert len(report) == 8
        assert {r["kernel"] for r in report} == {"rbf", "linear"}
        assert sorted({r["C"] for r in report}) == [0.1, 1.0, 10.0, 100.0]
        best_acc = max(r["word_accuracy"] for r in report)
        assert word_accuracy_on_instances(model, words) == best_acc
        assert best_acc == 1.0
