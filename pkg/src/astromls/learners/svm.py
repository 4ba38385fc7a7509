"""RBF support vector machine trained with simplified SMO, one-vs-one for multiclass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._util import frozen, make_rng
from ..dataset import LabeledDataset
from ..errors import ParameterError
from .base import Model, register, training_arrays

# smallest interior step in a multiplier that counts as progress
MIN_ALPHA_STEP = 1e-5


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SmoResult:
    alphas: np.ndarray
    bias: float
    passes: int
    converged: bool


def kkt_residuals(alphas, y, decision, c_penalty) -> np.ndarray:
    """How far each multiplier is from its KKT condition (0 when satisfied).

    With margin ``r = y * f(x) - 1``: ``alpha = 0`` needs ``r >= 0``,
    ``0 < alpha < C`` needs ``r = 0`` and ``alpha = C`` needs ``r <= 0``.
    """
    r = y * decision - 1.0
    at_zero = alphas <= 0
    at_c = alphas >= c_penalty
    return np.where(at_zero, np.maximum(-r, 0.0), np.where(at_c, np.maximum(r, 0.0), np.abs(r)))


def _take_step(i, j, alphas, errors, bias, y, kernel, diag, c_penalty) -> float | None:
    """Jointly optimize multipliers ``i`` and ``j`` in place; the new bias, or
    ``None`` when the pair cannot make progress."""
    e_i, e_j = errors[i], errors[j]
    a_i, a_j = alphas[i], alphas[j]
    if y[i] != y[j]:
        lo, hi = max(0.0, a_j - a_i), min(c_penalty, c_penalty + a_j - a_i)
    else:
        lo, hi = max(0.0, a_i + a_j - c_penalty), min(c_penalty, a_i + a_j)
    if lo >= hi:
        return None
    eta = 2.0 * kernel[i, j] - diag[i] - diag[j]
    if eta >= 0:
        return None
    new_j = min(hi, max(lo, a_j - y[j] * (e_i - e_j) / eta))
    # tiny steps are skipped unless they pin the multiplier to a bound
    if new_j == a_j or (abs(new_j - a_j) < MIN_ALPHA_STEP and lo < new_j < hi):
        return None
    new_i = min(c_penalty, max(0.0, a_i + y[i] * y[j] * (a_j - new_j)))
    d_i, d_j = new_i - a_i, new_j - a_j
    b1 = bias - e_i - y[i] * d_i * diag[i] - y[j] * d_j * kernel[i, j]
    b2 = bias - e_j - y[i] * d_i * kernel[i, j] - y[j] * d_j * diag[j]
    if 0 < new_i < c_penalty:
        new_bias = b1
    elif 0 < new_j < c_penalty:
        new_bias = b2
    else:
        new_bias = (b1 + b2) / 2.0
    errors += y[i] * d_i * kernel[:, i] + y[j] * d_j * kernel[:, j] + (new_bias - bias)
    alphas[i], alphas[j] = new_i, new_j
    return new_bias


def smo(kernel: np.ndarray, y: np.ndarray, c_penalty: float, tol: float,
        max_passes: int, rng: np.random.Generator) -> SmoResult:
    """Simplified Platt SMO on a precomputed kernel matrix.

    Every pass visits each multiplier in order.  A KKT violator (beyond
    ``tol``) is paired with partners taken in a fresh random order until one
    joint step makes progress.  Training stops after the first pass that
    finds no violator, or after ``max_passes`` passes.
    """
    n = y.size
    alphas = np.zeros(n)
    bias = 0.0
    errors = -y.astype(float)  # f(x_i) - y_i with f == 0
    diag = np.diag(kernel)
    passes = 0
    converged = False
    while passes < max_passes:
        violators = 0
        for i in range(n):
            r_i = y[i] * errors[i]
            if not ((r_i < -tol and alphas[i] < c_penalty) or (r_i > tol and alphas[i] > 0)):
                continue
            violators += 1
            for j in rng.permutation(n - 1).tolist():
                j += j >= i
                step = _take_step(i, j, alphas, errors, bias, y, kernel, diag, c_penalty)
                if step is not None:
                    bias = step
                    break
        passes += 1
        if violators == 0:
            converged = True
            break
    return SmoResult(alphas, bias, passes, converged)


@dataclass(frozen=True)
class BinaryMachine:
    """One pairwise machine: positive side is the lower class index."""

    pair: tuple[int, int]
    support_vectors: np.ndarray
    dual_coef: np.ndarray   # alpha_k * y_k
    bias: float
    passes: int
    converged: bool

    def decision(self, x: np.ndarray, gamma: float) -> np.ndarray:
        if self.dual_coef.size == 0:
            return np.full(x.shape[0], self.bias)
        return rbf_kernel(x, self.support_vectors, gamma) @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "passes": self.passes,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict, n_features: int) -> "BinaryMachine":
        sv = np.array(d["support_vectors"], dtype=float).reshape(-1, n_features)
        return cls(tuple(d["pair"]), frozen(sv), frozen(d["dual_coef"], float),
                   float(d["bias"]), int(d["passes"]), bool(d["converged"]))


@register
@dataclass(frozen=True, kw_only=True)
class SvmModel(Model):
    variant = "svm"

    gamma: float  # effective value after the auto rule
    c_penalty: float
    machines: tuple[BinaryMachine, ...]

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines)

    def decision_values(self, x) -> np.ndarray:
        values = self._check_x(x)
        if not self.machines:
            return np.zeros((values.shape[0], 0))
        return np.column_stack([m.decision(values, self.gamma) for m in self.machines])

    def predict_scores(self, x) -> np.ndarray:
        dec = self.decision_values(x)
        votes = np.zeros((dec.shape[0], self.class_count))
        for col, m in enumerate(self.machines):
            i, j = m.pair
            pos = dec[:, col] >= 0
            votes[:, i] += pos
            votes[:, j] += ~pos
        n_pairs = self.class_count * (self.class_count - 1) / 2
        return votes / n_pairs

    def _payload(self) -> dict:
        return {
            "gamma": self.gamma,
            "c_penalty": self.c_penalty,
            "converged": self.converged,
            "machines": [m.to_dict() for m in self.machines],
        }

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "SvmModel":
        machines = tuple(BinaryMachine.from_dict(m, common["feature_count"]) for m in d["machines"])
        return cls(gamma=float(d["gamma"]), c_penalty=float(d["c_penalty"]),
                   machines=machines, **common)


def fit_svm(
    data: LabeledDataset,
    c: float = 1.0,
    gamma: float = 0.0,
    coef0: float = 0.0,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
) -> SvmModel:
    """One-vs-one RBF SVM.

    ``gamma <= 0`` selects ``1 / n_features``.  ``coef0`` has no effect on the
    RBF kernel and is only echoed in ``params``.  A machine that hits
    ``max_passes`` before satisfying KKT within ``tol`` is kept and flagged
    ``converged=False``.
    """
    if not c > 0:
        raise ParameterError(f"penalty C must be positive, got {c}")
    if tol <= 0 or max_passes < 1:
        raise ParameterError("tol must be positive and max_passes >= 1")
    x, y = training_arrays(data)
    n_classes = data.n_classes
    d = x.shape[1]
    gamma_used = float(gamma) if gamma > 0 else 1.0 / d
    present = set(np.unique(y).tolist())

    machines = []
    for i in range(n_classes):
        for j in range(i + 1, n_classes):
            empty = frozen(np.zeros((0, d)))
            if i not in present or j not in present:
                # a class absent from training: the machine always votes for the other
                bias = 1.0 if i in present or j not in present else -1.0
                machines.append(BinaryMachine((i, j), empty, frozen(np.zeros(0)), bias, 0, True))
                continue
            rows = np.flatnonzero((y == i) | (y == j))
            xp = x[rows]
            yp = np.where(y[rows] == i, 1.0, -1.0)
            result = smo(rbf_kernel(xp, xp, gamma_used), yp, float(c), tol, max_passes,
                         make_rng(seed, i, j))
            sv = result.alphas > 0
            machines.append(
                BinaryMachine(
                    (i, j),
                    frozen(xp[sv]),
                    frozen(result.alphas[sv] * yp[sv]),
                    float(result.bias),
                    result.passes,
                    result.converged,
                )
            )
    return SvmModel(
        class_count=n_classes,
        feature_count=d,
        params={"c": c, "kernel": "rbf", "gamma": gamma, "coef0": coef0, "tol": tol,
                "max_passes": max_passes},
        seed=seed,
        gamma=gamma_used,
        c_penalty=float(c),
        machines=tuple(machines),
    )
