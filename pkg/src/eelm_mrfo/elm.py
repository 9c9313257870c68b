"""Single-hidden-layer feedforward network trained the ELM way.

Hidden parameters are fixed (random or chosen by an optimizer) and the
output weights come from a least-squares solve against the hidden matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

ACTIVATIONS = ("sigmoid", "tanh", "linear")

# Gram matrices with a Cholesky diagonal ratio above this are treated as
# too ill-conditioned for the normal-equation route.
_MAX_CHOLESKY_DIAG_RATIO = 1e5


class ShapeError(ValueError):
    """Raised when array dimensions do not line up."""


def sigmoid(z):
    z = np.clip(z, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(-z))


def activate(z, activation: str):
    if activation == "sigmoid":
        return sigmoid(z)
    if activation == "tanh":
        return np.tanh(z)
    if activation == "linear":
        return np.asarray(z, dtype=float)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


@dataclass(frozen=True)
class RegressionData:
    """Inputs of shape (P, N) paired with P scalar targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        t = np.asarray(self.targets, dtype=float).ravel()
        if x.shape[0] != t.shape[0]:
            raise ShapeError(f"inputs have {x.shape[0]} rows but targets have {t.shape[0]} entries")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ShapeError(f"need at least one sample and one feature, got shape {x.shape}")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "RegressionData":
        indices = np.asarray(indices, dtype=int)
        return RegressionData(self.inputs[indices], self.targets[indices])


@dataclass(frozen=True)
class ElmModel:
    """A trained (or partially trained) SLFN.

    Attributes
    ----------
    input_weights : ndarray, shape (M, N)
        Row k connects every input to hidden node k.
    hidden_biases : ndarray, shape (M,)
    output_weights : ndarray, shape (M,) or None
        None until the least-squares solve has been run.
    activation : str
        One of ``sigmoid``, ``tanh``, ``linear``.
    penalty : float
        Ridge penalty used for the output solve; 0 means plain pseudoinverse.
    """

    input_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray | None = None
    activation: str = "sigmoid"
    penalty: float = 0.0

    def __post_init__(self):
        w = np.array(self.input_weights, dtype=float, ndmin=2)
        b = np.array(self.hidden_biases, dtype=float).ravel()
        if w.shape[0] != b.shape[0]:
            raise ShapeError(f"{w.shape[0]} weight rows but {b.shape[0]} hidden biases")
        beta = None
        if self.output_weights is not None:
            beta = np.array(self.output_weights, dtype=float).ravel()
            if beta.shape[0] != w.shape[0]:
                raise ShapeError(f"{beta.shape[0]} output weights for {w.shape[0]} hidden nodes")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not self.penalty >= 0:
            raise ValueError(f"penalty must be nonnegative, got {self.penalty}")
        for arr in (w, b, beta):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "input_weights", w)
        object.__setattr__(self, "hidden_biases", b)
        object.__setattr__(self, "output_weights", beta)

    @property
    def n_hidden(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_weights.shape[1]

    def with_output_weights(self, beta, penalty: float | None = None) -> "ElmModel":
        return ElmModel(
            self.input_weights,
            self.hidden_biases,
            beta,
            self.activation,
            self.penalty if penalty is None else penalty,
        )

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "penalty": self.penalty,
            "input_weights": self.input_weights.tolist(),
            "hidden_biases": self.hidden_biases.tolist(),
            "output_weights": None if self.output_weights is None else self.output_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElmModel":
        return cls(
            d["input_weights"],
            d["hidden_biases"],
            d.get("output_weights"),
            d.get("activation", "sigmoid"),
            d.get("penalty", 0.0),
        )


def build_hidden_matrix(model: ElmModel, inputs) -> np.ndarray:
    """Return H with ``H[p, k] = h(w_k . x_p + b_k)``, shape (P, M)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != model.n_inputs:
        raise ShapeError(f"inputs have {x.shape[1]} columns but the model expects {model.n_inputs}")
    return activate(x @ model.input_weights.T + model.hidden_biases, model.activation)


def solve_output_weights(hidden, targets, penalty: float = 0.0) -> np.ndarray:
    """Least-squares output weights for ``hidden @ beta ~ targets``.

    Uses the normal equations ``(H^T H + penalty I) beta = H^T T`` (or the
    dual ``H^T (H H^T + penalty I)^-1 T`` when there are fewer samples than
    hidden nodes) through a Cholesky factorization. If the Gram matrix is
    singular or badly conditioned and ``penalty == 0``, falls back to an
    SVD-based minimum-norm solve.
    """
    h = np.atleast_2d(np.asarray(hidden, dtype=float))
    t = np.asarray(targets, dtype=float).ravel()
    if h.shape[0] != t.shape[0]:
        raise ShapeError(f"hidden matrix has {h.shape[0]} rows but targets have {t.shape[0]} entries")
    if penalty < 0:
        raise ValueError(f"penalty must be nonnegative, got {penalty}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(t))):
        raise ValueError("hidden matrix and targets must be finite")

    n_samples, n_hidden = h.shape
    primal = n_samples >= n_hidden
    gram = h.T @ h if primal else h @ h.T
    if penalty > 0:
        gram[np.diag_indices_from(gram)] += penalty
    try:
        factor, lower = scipy.linalg.cho_factor(gram, check_finite=False)
        diag = np.abs(np.diag(factor))
        well_posed = diag.min() > 0 and diag.max() / diag.min() < _MAX_CHOLESKY_DIAG_RATIO
    except np.linalg.LinAlgError:
        well_posed = False

    if well_posed:
        if primal:
            return scipy.linalg.cho_solve((factor, lower), h.T @ t, check_finite=False)
        return h.T @ scipy.linalg.cho_solve((factor, lower), t, check_finite=False)

    if penalty > 0:
        # ridge with an ill-conditioned Gram: solve the augmented system instead
        aug = np.vstack([h, np.sqrt(penalty) * np.eye(n_hidden)])
        rhs = np.concatenate([t, np.zeros(n_hidden)])
        return np.linalg.lstsq(aug, rhs, rcond=None)[0]
    return np.linalg.lstsq(h, t, rcond=None)[0]


def predict(model: ElmModel, inputs) -> np.ndarray:
    if model.output_weights is None:
        raise ValueError("model has no output weights; solve them first")
    return build_hidden_matrix(model, inputs) @ model.output_weights


def fit_output_weights(model: ElmModel, data: RegressionData, penalty: float | None = None) -> ElmModel:
    """Solve output weights of ``model`` on ``data`` and return the completed model."""
    penalty = model.penalty if penalty is None else penalty
    beta = solve_output_weights(build_hidden_matrix(model, data.inputs), data.targets, penalty)
    return model.with_output_weights(beta, penalty)


def random_model(n_inputs: int, n_hidden: int, rng: np.random.Generator,
                 activation: str = "sigmoid", low: float = -1.0, high: float = 1.0) -> ElmModel:
    """Hidden layer drawn uniformly from ``[low, high]``; output weights unset."""
    weights = rng.uniform(low, high, size=(n_hidden, n_inputs))
    biases = rng.uniform(low, high, size=n_hidden)
    return ElmModel(weights, biases, None, activation)
