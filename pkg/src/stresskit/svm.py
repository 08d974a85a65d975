"""RBF-kernel SVM trained by SMO, with word-level argmax decoding.

Each syllable nucleus is one binary instance (stressed vs not); at predict
time the nucleus with the largest decision value wins its word.  Features
are z-scored before the kernel; gamma defaults to 1/(n_features * pooled
variance) of the scaled matrix, i.e. 1/10 for the ten nucleus features.

The optimizer is sequential minimal optimization over the dual with
maximal-violating-pair selection: at each step the most KKT-violating
(up, low) index pair is updated analytically, keeping sum(alpha_i * y_i)
exactly zero.  Training stops when the maximal violation m - M falls
below tol.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .prosody import NucleusFeatures

DEFAULT_C = 10.0
GRID_CS = (0.1, 1.0, 10.0, 100.0)
GRID_KERNELS = ("rbf", "linear")
_TAU = 1e-12


@dataclass
class Scaler:
    means: np.ndarray
    sds: np.ndarray  # zero-variance columns carry sd = 1

    @classmethod
    def fit(cls, X):
        means = X.mean(axis=0)
        sds = X.std(axis=0)
        sds = np.where(sds > 0, sds, 1.0)
        return cls(means, sds)

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.means) / self.sds


@dataclass
class TrainInstance:
    features: NucleusFeatures
    label: int  # 1 = stressed nucleus, 0 = not
    word_id: str
    nucleus_index: int


@dataclass
class SvmModel:
    kernel: str  # "rbf" or "linear"
    support_vectors: np.ndarray  # scaled feature rows
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    scaler: Scaler
    platt: tuple[float, float] | None = None  # (A, B)


def _kernel_matrix(kernel, gamma, A, B=None):
    B = A if B is None else B
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def smo_solve(K, y, C, tol=1e-3, max_iter=None, seed=0):
    """Solve the SVM dual on a precomputed kernel matrix.

    Returns (alpha, bias, iterations).  `y` must be +-1.  Raises when the
    maximal KKT violation cannot be brought under tol within the iteration
    budget.
    """
    n = len(y)
    if max_iter is None:
        max_iter = max(200 * n, 10_000)
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective, (Q alpha)_i - 1
    rng = np.random.default_rng(seed)

    for it in range(max_iter):
        score = -y * grad
        up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        if not up.any() or not low.any():
            m = M = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        m, M = score[i], score[j]
        if m - M <= tol:
            break

        # Direction alpha_i += y_i t, alpha_j -= y_j t keeps sum(alpha*y)
        # exactly constant; t* is the unconstrained optimum along it.
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
        t = (m - M) / quad
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        if t <= 0.0:
            # Numerically stuck pair; try a shuffled scan for any progress.
            t, i, j = _shuffled_pair(K, y, alpha, score, up, low, C, rng)
            if t <= 0.0:
                break
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        grad += y * (K[:, i] - K[:, j]) * t
    else:
        raise RuntimeError(
            f"SMO did not converge in {max_iter} iterations (violation "
            f"{m - M:.3e} > tol {tol:.0e})")

    bias = (m + M) / 2.0
    return alpha, float(bias), it


def _shuffled_pair(K, y, alpha, score, up, low, C, rng):
    """Fallback pair search in random order when the best pair stalls."""
    ups = rng.permutation(np.flatnonzero(up))
    lows = np.flatnonzero(low)
    for i in ups:
        j = int(lows[np.argmin(score[lows])])
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
        t = (score[i] - score[j]) / quad
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        if t > 0.0:
            return t, int(i), j
    return 0.0, -1, -1


def train_svm(data, C=DEFAULT_C, gamma="scale", tol=1e-3, max_passes=200,
              seed=0, kernel="rbf"):
    """Fit an SVM on nucleus instances; deterministic for a fixed seed."""
    if len(data) < 2:
        raise ValueError(f"need >= 2 instances, have {len(data)}")
    X = np.array([inst.features.as_vector() for inst in data])
    labels = np.array([inst.label for inst in data])
    for inst, row in zip(data, X):
        if not np.all(np.isfinite(row)):
            raise ValueError(f"non-finite feature in word {inst.word_id!r} "
                             f"nucleus {inst.nucleus_index}")
    classes = set(labels.tolist())
    if classes != {0, 1}:
        raise ValueError(f"training needs both classes, got labels {sorted(classes)}")
    y = np.where(labels == 1, 1.0, -1.0)

    scaler = Scaler.fit(X)
    Xs = scaler.transform(X)
    if gamma == "scale":
        var = float(Xs.var())
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]
    if gamma <= 0 or C <= 0:
        raise ValueError(f"gamma and C must be positive, got {gamma}, {C}")

    K = _kernel_matrix(kernel, gamma, Xs)
    alpha, bias, _ = smo_solve(K, y, C, tol=tol, max_iter=max_passes * len(y),
                               seed=seed)

    sv = alpha > 1e-12
    return SvmModel(
        kernel=kernel,
        support_vectors=Xs[sv].copy(),
        dual_coefs=(alpha * y)[sv].copy(),
        bias=bias,
        gamma=float(gamma),
        C=float(C),
        scaler=scaler,
    )


def decision_values(model, features_list):
    """Raw decision values for a batch of NucleusFeatures."""
    X = np.array([f.as_vector() for f in features_list])
    Xs = model.scaler.transform(X)
    K = _kernel_matrix(model.kernel, model.gamma, Xs, model.support_vectors)
    return K @ model.dual_coefs + model.bias


def decision_value(model, features):
    return float(decision_values(model, [features])[0])


def platt_fit(decisions, labels, max_iter=100, min_step=1e-10, sigma=1e-12):
    """Calibrate p = 1/(1 + exp(A*f + B)) by Newton steps on cross-entropy.

    Targets are smoothed to (n_pos+1)/(n_pos+2) and 1/(n_neg+2) so the
    optimum stays finite even for separable inputs.
    """
    f = np.asarray(decisions, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required to fit the calibration sigmoid")
    hi, lo = (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)
    t = np.where(labels == 1, hi, lo)

    def objective(a, b):
        z = a * f + b
        # log(1 + exp(z)) - (1 - t) * z, written to avoid overflow
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1) * z + np.log1p(np.exp(z)))))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    obj = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        d2 = p * (1 - p)
        h11 = float((f * f * d2).sum()) + sigma
        h22 = float(d2.sum()) + sigma
        h21 = float((f * d2).sum())
        d1 = t - p
        g1, g2 = float((f * d1).sum()), float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            return float(A), float(B)
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        step = 1.0
        while step >= min_step:
            a2, b2 = A + step * dA, B + step * dB
            o2 = objective(a2, b2)
            if o2 < obj + 1e-4 * step * (g1 * dA + g2 * dB):
                A, B, obj = a2, b2, o2
                break
            step /= 2.0
        else:
            break
    grad_norm = float(np.hypot(g1, g2))
    if grad_norm < 1e-5:
        return float(A), float(B)
    raise RuntimeError(f"sigmoid fit did not converge after {max_iter} "
                       f"iterations; gradient norm {grad_norm:.3e}")


def platt_probability(model, decision):
    """Positive-class probability; requires a fitted (A, B) on the model."""
    if model.platt is None:
        raise ValueError("model has no calibration parameters")
    A, B = model.platt
    z = A * decision + B
    return float(1 / (1 + np.exp(z))) if z >= 0 else float(np.exp(-z) / (1 + np.exp(-z)))


def predict_word(model, nuclei_features):
    """(predicted_index, scores) for one word; ties go to the lowest index."""
    if len(nuclei_features) == 0:
        raise ValueError("word has no nuclei to score")
    scores = decision_values(model, nuclei_features)
    return int(np.argmax(scores)), scores


def word_groups(instances):
    """word_id -> instances sorted by nucleus_index."""
    groups = {}
    for inst in instances:
        groups.setdefault(inst.word_id, []).append(inst)
    return {w: sorted(g, key=lambda i: i.nucleus_index) for w, g in groups.items()}


def word_accuracy_on_instances(model, instances):
    """Share of words whose argmax nucleus carries the gold label 1."""
    groups = word_groups(instances)
    correct = 0
    for insts in groups.values():
        pred, _ = predict_word(model, [i.features for i in insts])
        if insts[pred].label == 1:
            correct += 1
    return correct / len(groups) if groups else 0.0


def grid_search(train_data, val_data, Cs=GRID_CS, kernels=GRID_KERNELS,
                seed=0, tol=1e-3):
    """Train every (kernel, C) combo; pick the best word accuracy on val.

    Returns (best_model, report) where report lists each combo's accuracy
    in evaluation order; ties keep the earliest combo.
    """
    best = None
    report = []
    for kernel in kernels:
        for C in Cs:
            model = train_svm(train_data, C=C, seed=seed, tol=tol, kernel=kernel)
            acc = word_accuracy_on_instances(model, val_data)
            report.append({"kernel": kernel, "C": C, "word_accuracy": acc})
            if best is None or acc > best[0]:
                best = (acc, model)
    return best[1], report


def save_model(model, path):
    doc = {
        "format": "stress-svm/1",
        "kernel": model.kernel,
        "C": model.C,
        "gamma": model.gamma,
        "bias": model.bias,
        "scaler_means": model.scaler.means.tolist(),
        "scaler_sds": model.scaler.sds.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "platt": list(model.platt) if model.platt is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "stress-svm/1":
        raise ValueError(f"{path}: unknown model format {doc.get('format')!r}")
    return SvmModel(
        kernel=doc["kernel"],
        support_vectors=np.array(doc["support_vectors"], dtype=np.float64),
        dual_coefs=np.array(doc["dual_coefs"], dtype=np.float64),
        bias=float(doc["bias"]),
        gamma=float(doc["gamma"]),
        C=float(doc["C"]),
        scaler=Scaler(np.array(doc["scaler_means"]), np.array(doc["scaler_sds"])),
        platt=tuple(doc["platt"]) if doc["platt"] is not None else None,
    )
