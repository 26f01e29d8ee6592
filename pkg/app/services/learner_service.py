import json
import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError
from scipy.special import expit
from sklearn.preprocessing import StandardScaler

from ..errors import DimensionMismatchError, SchemaMismatchError, TrainingError
from ..schemas.models import LinearModel, MlpConfig, MlpModel, Standardization, SvmConfig

logger = logging.getLogger(__name__)

# per-epoch loss increase tolerated before the step is halved
LOSS_SLACK = 1e-9
MAX_HALVINGS = 40


@dataclass(frozen=True)
class SvmFit:
    model: LinearModel
    alphas: np.ndarray
    # best primal objective so far, at (0, 0) and after every epoch
    objective_trace: List[float]


@dataclass
class MlpParameters:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def of(cls, m: MlpModel) -> "MlpParameters":
        return cls([np.array(w, dtype=float) for w in m.weights], [np.array(b, dtype=float) for b in m.biases])

    def axpy(self, scale: float, other: "MlpParameters") -> "MlpParameters":
        return MlpParameters(
            [w + scale * g for w, g in zip(self.weights, other.weights)],
            [b + scale * g for b, g in zip(self.biases, other.biases)],
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


@dataclass(frozen=True)
class MlpFit:
    model: MlpModel
    loss_history: List[float]


def _check_training_data(X, y, labels, require_both: bool = True):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(X.shape[0] if X.ndim == 2 else 0, y.shape[0], "labels")
    if X.shape[0] == 0:
        raise TrainingError("no training examples")
    if not np.isfinite(X).all():
        raise TrainingError("training features contain non-finite values")
    if not np.isin(y, labels).all():
        raise TrainingError(f"labels must be drawn from {labels}")
    if require_both and np.unique(y).size < 2:
        raise TrainingError("training data holds a single class")
    return X, y


def _check_width(n_features: int, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != n_features:
        raise DimensionMismatchError(n_features, X.shape[1])
    return X


class LearnerService:
    # -- standardization ---------------------------------------------------

    @staticmethod
    def fit_standardizer(X) -> Standardization:
        scaler = StandardScaler().fit(np.asarray(X, dtype=float))
        return Standardization(mean=scaler.mean_.tolist(), scale=scaler.scale_.tolist())

    @staticmethod
    def apply_standardizer(s: Standardization, X) -> np.ndarray:
        X = _check_width(len(s.mean), X)
        return (X - np.asarray(s.mean)) / np.asarray(s.scale)

    # -- linear soft-margin SVM --------------------------------------------

    @staticmethod
    def svm_objective(weights, bias: float, X, y, C: float) -> float:
        w = np.asarray(weights, dtype=float)
        margins = 1.0 - np.asarray(y) * (np.asarray(X) @ w + bias)
        return float(0.5 * w @ w + C * np.maximum(margins, 0.0).sum())

    @staticmethod
    def fit_linear_svm(X, y, cfg: SvmConfig, initial_alphas: Optional[np.ndarray] = None) -> SvmFit:
        """Dual coordinate ascent (SMO) on the linear kernel.

        The first index of each pair is the maximal violator; its partner is
        chosen by second-order gain. The returned model is the best primal
        iterate seen at epoch boundaries, so its objective never exceeds C*n,
        the value at w = 0, b = 0.
        """
        X, y = _check_training_data(X, y, (-1.0, 1.0))
        n, d = X.shape
        C = cfg.C
        order = np.random.default_rng(cfg.seed).permutation(n)
        Xp, yp = X[order], y[order]
        K = Xp @ Xp.T
        diagonal = np.diag(K).copy()
        positive = yp > 0
        if initial_alphas is None:
            alpha = np.zeros(n)
        else:
            alpha = np.clip(np.asarray(initial_alphas, dtype=float)[order], 0.0, C)
        # score = -y * gradient of the dual objective
        score = yp - K @ (alpha * yp)

        def index_sets():
            below, above = alpha < C, alpha > 0.0
            return np.where(positive, below, above), np.where(positive, above, below)

        def bias_of():
            free = (alpha > 0.0) & (alpha < C)
            if free.any():
                return float(score[free].mean())
            up, low = index_sets()
            m = score[up].max() if up.any() else 0.0
            M = score[low].min() if low.any() else 0.0
            return float((m + M) / 2.0)

        best_w, best_b = np.zeros(d), 0.0
        best_obj = LearnerService.svm_objective(best_w, best_b, Xp, yp, C)
        best_alpha = np.zeros(n)
        trace = [best_obj]

        def checkpoint():
            nonlocal best_w, best_b, best_obj, best_alpha
            w = Xp.T @ (alpha * yp)
            b = bias_of()
            obj = LearnerService.svm_objective(w, b, Xp, yp, C)
            if obj < best_obj:
                best_w, best_b, best_obj, best_alpha = w, b, obj, alpha.copy()
            trace.append(best_obj)

        converged = False
        steps = 0
        for epoch in range(cfg.epochs):
            for _ in range(n):
                up, low = index_sets()
                if not up.any() or not low.any():
                    converged = True
                    break
                i = int(np.argmax(np.where(up, score, -np.inf)))
                gain = score[i] - score
                if gain[low].max() < cfg.tolerance:
                    converged = True
                    break
                curvature = np.maximum(diagonal[i] + diagonal - 2.0 * K[i], 1e-12)
                j = int(np.argmax(np.where(low & (gain > 0.0), gain * gain / curvature, -np.inf)))
                t = gain[j] / curvature[j]
                t = min(t, C - alpha[i] if positive[i] else alpha[i])
                t = min(t, alpha[j] if positive[j] else C - alpha[j])
                alpha[i] += yp[i] * t
                alpha[j] -= yp[j] * t
                score -= t * (K[i] - K[j])
                steps += 1
            checkpoint()
            if converged:
                logger.debug("svm converged after %d steps", steps)
                break
        else:
            logger.debug("svm stopped at the epoch limit (%d)", cfg.epochs)

        if not np.isfinite(best_w).all() or not np.isfinite(best_b):
            raise TrainingError("svm produced non-finite weights")
        alphas = np.empty(n)
        alphas[order] = best_alpha
        model = LinearModel(
            weights=best_w.tolist(), bias=best_b, objective=best_obj, seed=cfg.seed, config=cfg,
        )
        return SvmFit(model=model, alphas=alphas, objective_trace=trace)

    @staticmethod
    def train_linear_svm(X, y, cfg: SvmConfig) -> LinearModel:
        return LearnerService.fit_linear_svm(X, y, cfg).model

    @staticmethod
    def decision_linear(m: LinearModel, X) -> np.ndarray:
        X = _check_width(m.n_features, X)
        return X @ np.asarray(m.weights) + m.bias

    @staticmethod
    def predict_linear(m: LinearModel, x) -> int:
        """Sign of the decision value; 0 counts as +1."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionMismatchError(m.n_features, x.size)
        return 1 if LearnerService.decision_linear(m, x)[0] >= 0.0 else -1

    @staticmethod
    def predict_linear_batch(m: LinearModel, X) -> np.ndarray:
        return np.where(LearnerService.decision_linear(m, X) >= 0.0, 1, -1)

    # -- feed-forward network ----------------------------------------------

    @staticmethod
    def init_mlp(layer_sizes: List[int], seed: int, config: Optional[MlpConfig] = None) -> MlpModel:
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.uniform(-0.5, 0.5, size=(fan_out, fan_in)).tolist())
            biases.append(rng.uniform(-0.5, 0.5, size=fan_out).tolist())
        return MlpModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases, seed=seed, config=config)

    @staticmethod
    def _forward(params: MlpParameters, X: np.ndarray):
        activations = [X]
        z = None
        for w, b in zip(params.weights, params.biases):
            z = activations[-1] @ w.T + b
            activations.append(expit(z))
        return activations, z[:, 0]

    @staticmethod
    def _loss(z: np.ndarray, y: np.ndarray) -> float:
        # mean cross-entropy of sigmoid(z), written stably in terms of z
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    @staticmethod
    def _gradient(params: MlpParameters, X: np.ndarray, y: np.ndarray):
        activations, z = LearnerService._forward(params, X)
        delta = ((activations[-1][:, 0] - y) / X.shape[0])[:, None]
        grad_w: List[np.ndarray] = [None] * len(params.weights)
        grad_b: List[np.ndarray] = [None] * len(params.biases)
        for layer in range(len(params.weights) - 1, -1, -1):
            grad_w[layer] = delta.T @ activations[layer]
            grad_b[layer] = delta.sum(axis=0)
            if layer:
                a = activations[layer]
                delta = (delta @ params.weights[layer]) * a * (1.0 - a)
        return MlpParameters(grad_w, grad_b), LearnerService._loss(z, y)

    @staticmethod
    def loss_gradient(m: MlpModel, X, y) -> MlpParameters:
        """Exact gradient of the mean cross-entropy with respect to every weight and bias."""
        X = _check_width(m.n_features, X)
        y = np.asarray(y, dtype=float)
        if y.shape != (X.shape[0],):
            raise DimensionMismatchError(X.shape[0], y.size, "labels")
        return LearnerService._gradient(MlpParameters.of(m), X, y)[0]

    @staticmethod
    def mlp_loss(m: MlpModel, X, y) -> float:
        X = _check_width(m.n_features, X)
        _, z = LearnerService._forward(MlpParameters.of(m), X)
        return LearnerService._loss(z, np.asarray(y, dtype=float))

    @staticmethod
    def fit_mlp(X, y, cfg: MlpConfig) -> MlpFit:
        """Full-batch gradient descent with a per-epoch backtracking step.

        A step that raises the loss by more than LOSS_SLACK is halved until it
        does not, so the recorded loss history is non-increasing.
        """
        X, y = _check_training_data(X, y, (0.0, 1.0), require_both=cfg.require_both_classes)
        sizes = [X.shape[1], *cfg.hidden_sizes, 1]
        initial = LearnerService.init_mlp(sizes, cfg.seed, cfg)
        params = MlpParameters.of(initial)
        gradient, loss = LearnerService._gradient(params, X, y)
        history = [loss]
        for epoch in range(1, cfg.epochs + 1):
            step = cfg.learning_rate
            for _ in range(MAX_HALVINGS):
                candidate = params.axpy(-step, gradient)
                _, z = LearnerService._forward(candidate, X)
                candidate_loss = LearnerService._loss(z, y)
                if not np.isfinite(candidate_loss):
                    raise TrainingError("mlp loss is not finite", epoch=epoch)
                if candidate_loss <= loss + LOSS_SLACK:
                    params, loss = candidate, candidate_loss
                    break
                step /= 2.0
            gradient, loss = LearnerService._gradient(params, X, y)
            history.append(loss)
        if cfg.epochs == 0:
            return MlpFit(model=initial, loss_history=history)
        model = MlpModel(
            layer_sizes=sizes,
            weights=[w.tolist() for w in params.weights],
            biases=[b.tolist() for b in params.biases],
            seed=cfg.seed,
            config=cfg,
        )
        logger.debug("mlp trained %d epochs, loss %.6f -> %.6f", cfg.epochs, history[0], history[-1])
        return MlpFit(model=model, loss_history=history)

    @staticmethod
    def train_mlp(X, y, cfg: MlpConfig) -> MlpModel:
        return LearnerService.fit_mlp(X, y, cfg).model

    @staticmethod
    def predict_mlp_batch(m: MlpModel, X) -> np.ndarray:
        X = _check_width(m.n_features, X)
        activations, _ = LearnerService._forward(MlpParameters.of(m), X)
        return activations[-1][:, 0]

    @staticmethod
    def predict_mlp(m: MlpModel, x) -> float:
        """Survival probability for one patient; >= 0.5 reads as Survive."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionMismatchError(m.n_features, x.size)
        return float(LearnerService.predict_mlp_batch(m, x)[0])

    # -- weight export -------------------------------------------------------

    @staticmethod
    def export_weights(m: MlpModel) -> str:
        return json.dumps(m.model_dump(mode="json"), indent=2) + "\n"

    @staticmethod
    def import_weights(text: str) -> MlpModel:
        try:
            return MlpModel.model_validate_json(text)
        except ValidationError as e:
            raise SchemaMismatchError(f"not a valid network weight file: {e}")

    @staticmethod
    def export_linear(m: LinearModel) -> str:
        return json.dumps(m.model_dump(mode="json"), indent=2) + "\n"

    @staticmethod
    def import_linear(text: str) -> LinearModel:
        try:
            return LinearModel.model_validate_json(text)
        except ValidationError as e:
            raise SchemaMismatchError(f"not a valid linear model file: {e}")

    @staticmethod
    def import_model(text: str) -> Union[LinearModel, MlpModel]:
        try:
            payload = json.loads(text)
        except ValueError as e:
            raise SchemaMismatchError(f"model file is not valid JSON: {e}")
        if isinstance(payload, dict) and payload.get("kind") == "linear":
            return LearnerService.import_linear(text)
        return LearnerService.import_weights(text)


learner_service = LearnerService()
