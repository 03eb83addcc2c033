"""Single-hidden-layer bottleneck autoencoder.

The network maps a normalized record ``x`` to ``W2 @ tanh(W1 @ x + b1) + b2``.
It is trained full-batch with nonlinear conjugate gradient (Polak-Ribiere
directions, periodic restarts, backtracking line search) and early stopping
on a validation set.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError, NumericError, ParseError, TrainingError
from .schema import Dataset, NormalizationParams

logger = logging.getLogger(__name__)

MAGIC = "AEIMPUTE-AUTOENCODER 1"


@dataclass(frozen=True)
class NetworkConfig:
    n_in: int = 10
    n_hidden: int = 9
    n_out: int = 10
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    max_cycles: int = 1000
    early_stop_patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_hidden >= self.n_in:
            raise ConfigError(
                f"bottleneck violated: n_hidden={self.n_hidden} must be below n_in={self.n_in}"
            )
        if self.n_hidden < 1:
            raise ConfigError("n_hidden must be positive")
        if self.n_out != self.n_in:
            raise ConfigError("n_out must equal n_in")
        if self.hidden_activation != "tanh" or self.output_activation != "linear":
            raise ConfigError("only tanh hidden and linear output units are supported")
        if self.max_cycles < 0 or self.early_stop_patience < 1:
            raise ConfigError("max_cycles must be >= 0 and early_stop_patience >= 1")


@dataclass(frozen=True)
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])


@dataclass(frozen=True, eq=False)
class AutoencoderModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    config: NetworkConfig = field(default_factory=NetworkConfig)
    norm: NormalizationParams | None = None

    def __post_init__(self):
        c = self.config
        shapes = {
            "W1": (c.n_hidden, c.n_in), "b1": (c.n_hidden,),
            "W2": (c.n_out, c.n_hidden), "b2": (c.n_out,),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != shape:
                raise ConfigError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite weights")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_params(self) -> int:
        c = self.config
        return c.n_hidden * (c.n_in + 1) + c.n_out * (c.n_hidden + 1)

    def params(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def with_params(self, theta) -> "AutoencoderModel":
        c = self.config
        theta = np.asarray(theta, dtype=float)
        a = c.n_hidden * c.n_in
        b = a + c.n_hidden
        d = b + c.n_out * c.n_hidden
        return replace(
            self,
            W1=theta[:a].reshape(c.n_hidden, c.n_in),
            b1=theta[a:b],
            W2=theta[b:d].reshape(c.n_out, c.n_hidden),
            b2=theta[d:],
        )

    def __call__(self, X):
        """Batched forward pass; ``X`` is ``(n, n_in)`` or a single record."""
        return forward(self, X)

    def __eq__(self, other):
        if not isinstance(other, AutoencoderModel):
            return NotImplemented
        a, b = self.config, other.config
        return (
            (a.n_in, a.n_hidden, a.n_out) == (b.n_in, b.n_hidden, b.n_out)
            and self.norm == other.norm
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("W1", "b1", "W2", "b2"))
        )

    __hash__ = None


@dataclass
class TrainReport:
    cycles_run: int = 0
    train_mse_history: list[float] = field(default_factory=list)
    validation_mse_history: list[float] = field(default_factory=list)
    stopped_early: bool = False
    final_train_mse: float = float("nan")
    initial_validation_mse: float = float("nan")
    best_cycle: int = 0
    best_validation_mse: float = float("nan")


def init_model(config: NetworkConfig = NetworkConfig(), norm: NormalizationParams | None = None):
    """Uniform weights in +-1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(config.seed)
    r1 = 1.0 / np.sqrt(config.n_in)
    r2 = 1.0 / np.sqrt(config.n_hidden)
    W1 = rng.uniform(-r1, r1, size=(config.n_hidden, config.n_in))
    W2 = rng.uniform(-r2, r2, size=(config.n_out, config.n_hidden))
    return AutoencoderModel(W1, np.zeros(config.n_hidden), W2, np.zeros(config.n_out), config, norm)


def _as_batch(X):
    X = np.asarray(X, dtype=float)
    if isinstance(X, np.ndarray) and X.ndim == 1:
        return X[None, :], True
    return X, False


def forward(m: AutoencoderModel, X) -> np.ndarray:
    X, single = _as_batch(X.values if isinstance(X, Dataset) else X)
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite input to the network")
    out = np.tanh(X @ m.W1.T + m.b1) @ m.W2.T + m.b2
    return out[0] if single else out


def _training_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        if not data.normalized:
            raise DataError("network data must be normalized")
        X = data.values
    else:
        X = np.asarray(data, dtype=float)
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise DataError("empty dataset")
    if np.isnan(X).any():
        raise DataError("network data must be complete")
    return X


def loss_mse(m, data) -> float:
    """Mean over records and components of the squared reconstruction error.

    ``m`` may be any callable mapping an ``(n, d)`` batch to its reconstruction.
    """
    X = _training_matrix(data)
    R = m(X) - X
    return float(np.mean(R * R))


def gradient(m: AutoencoderModel, data) -> Gradients:
    """Backpropagated partial derivatives of ``loss_mse``."""
    X = _training_matrix(data)
    n = X.shape[0]
    H = np.tanh(X @ m.W1.T + m.b1)
    Y = H @ m.W2.T + m.b2
    dY = 2.0 * (Y - X) / (n * m.config.n_out)
    gW2 = dY.T @ H
    gb2 = dY.sum(axis=0)
    dA = (dY @ m.W2) * (1.0 - H * H)
    gW1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    return Gradients(gW1, gb1, gW2, gb2)


def _loss_and_grad(m: AutoencoderModel, theta, X):
    model = m.with_params(theta)
    n = X.shape[0]
    H = np.tanh(X @ model.W1.T + model.b1)
    R = H @ model.W2.T + model.b2 - X
    f = float(np.mean(R * R))
    dY = 2.0 * R / (n * R.shape[1])
    dA = (dY @ model.W2) * (1.0 - H * H)
    g = np.concatenate([(dA.T @ X).ravel(), dA.sum(axis=0), (dY.T @ H).ravel(), dY.sum(axis=0)])
    return f, g


def _loss_only(m, theta, X):
    model = m.with_params(theta)
    R = np.tanh(X @ model.W1.T + model.b1) @ model.W2.T + model.b2 - X
    return float(np.mean(R * R))


def _line_search(m, theta, X, f0, g0, d, alpha0, c1=1e-4, shrink=0.5, max_steps=40):
    """Backtracking with a quadratic-interpolation first guess."""
    slope = float(g0 @ d)
    alpha = alpha0
    for _ in range(max_steps):
        f = _loss_only(m, theta + alpha * d, X)
        if np.isfinite(f) and f <= f0 + c1 * alpha * slope:
            # try the minimizer of the interpolating parabola once
            curv = f - f0 - slope * alpha
            if curv > 0:
                alpha_q = -slope * alpha * alpha / (2.0 * curv)
                if alpha_q > alpha:
                    fq = _loss_only(m, theta + alpha_q * d, X)
                    if np.isfinite(fq) and fq < f:
                        return alpha_q, fq
            return alpha, f
        if np.isfinite(f):
            curv = f - f0 - slope * alpha
            alpha_q = -slope * alpha * alpha / (2.0 * curv) if curv > 0 else alpha * shrink
            alpha = min(max(alpha_q, 0.1 * alpha), shrink * alpha)
        else:
            alpha *= shrink
    return 0.0, f0


def train(m: AutoencoderModel, train_data, validation_data, max_cycles=None, patience=None):
    """Conjugate-gradient training with early stopping.

    Returns the snapshot with the lowest validation MSE (the initial model
    included) and a ``TrainReport`` whose histories hold one entry per cycle.
    """
    X = _training_matrix(train_data)
    V = _training_matrix(validation_data)
    max_cycles = m.config.max_cycles if max_cycles is None else max_cycles
    patience = m.config.early_stop_patience if patience is None else patience
    restart_every = m.n_params

    theta = m.params()
    f, g = _loss_and_grad(m, theta, X)
    if not np.isfinite(f):
        raise TrainingError("initial loss is not finite (cycle 0)")
    report = TrainReport()
    report.initial_validation_mse = best_val = _loss_only(m, theta, V)
    best_theta = theta.copy()
    since_best = 0
    d = -g
    alpha = 1.0
    k = 0

    for cycle in range(1, max_cycles + 1):
        if float(g @ d) >= 0:
            d = -g
            k = 0
        step, f_new = _line_search(m, theta, X, f, g, d, alpha)
        if step == 0.0 and k > 0:
            d = -g
            k = 0
            step, f_new = _line_search(m, theta, X, f, g, d, 1.0)
        theta = theta + step * d
        if step > 0:
            alpha = min(step * 2.0, 1e6)
        f_new, g_new = _loss_and_grad(m, theta, X)
        if not np.isfinite(f_new):
            raise TrainingError(f"training diverged at cycle {cycle}")

        k += 1
        if k >= restart_every:
            d = -g_new
            k = 0
        else:
            beta = max(0.0, float(g_new @ (g_new - g)) / max(float(g @ g), 1e-300))
            d = -g_new + beta * d
        f, g = f_new, g_new

        val = _loss_only(m, theta, V)
        report.train_mse_history.append(f)
        report.validation_mse_history.append(val)
        report.cycles_run = cycle
        if val < best_val:
            best_val, best_theta, since_best = val, theta.copy(), 0
            report.best_cycle = cycle
        else:
            since_best += 1
            if since_best >= patience:
                report.stopped_early = True
                logger.debug("early stop at cycle %d (best %d)", cycle, report.best_cycle)
                break
        if float(g @ g) == 0.0:
            break

    best = m.with_params(best_theta)
    report.best_validation_mse = best_val
    report.final_train_mse = loss_mse(best, X)
    return best, report


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def model_to_text(m: AutoencoderModel) -> str:
    c = m.config
    lines = [MAGIC, f"{c.n_in} {c.n_hidden} {c.n_out}"]
    lines += [_fmt(row) for row in m.W1]
    lines.append(_fmt(m.b1))
    lines += [_fmt(row) for row in m.W2]
    lines.append(_fmt(m.b2))
    if m.norm is None:
        lines.append("norm none")
    else:
        lines.append("norm")
        lines += [_fmt(pair) for pair in zip(m.norm.x_min, m.norm.x_max)]
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> AutoencoderModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(f"not a model file (expected {MAGIC!r})", 1)
    try:
        n_in, n_hidden, n_out = (int(t) for t in lines[1].split())
        config = NetworkConfig(n_in=n_in, n_hidden=n_hidden, n_out=n_out)

        def rows(start, count, width):
            out = np.array([[float(t) for t in lines[start + i].split()] for i in range(count)])
            if out.shape != (count, width):
                raise ParseError("row width mismatch", start + 1)
            return out

        pos = 2
        W1 = rows(pos, n_hidden, n_in); pos += n_hidden
        b1 = rows(pos, 1, n_hidden)[0]; pos += 1
        W2 = rows(pos, n_out, n_hidden); pos += n_out
        b2 = rows(pos, 1, n_out)[0]; pos += 1
        norm = None
        if lines[pos].strip() == "norm":
            pairs = rows(pos + 1, n_in, 2)
            norm = NormalizationParams(pairs[:, 0], pairs[:, 1])
        elif lines[pos].strip() != "norm none":
            raise ParseError("expected normalization section", pos + 1)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"truncated or malformed model file: {exc}") from None
    return AutoencoderModel(W1, b1, W2, b2, config, norm)


def save_model(m: AutoencoderModel, path) -> None:
    Path(path).write_text(model_to_text(m), encoding="utf-8")


def load_model(path) -> AutoencoderModel:
    return model_from_text(Path(path).read_text(encoding="utf-8"))
