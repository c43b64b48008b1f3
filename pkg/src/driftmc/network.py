"""Shallow feedforward networks from time to R^d, with hand-derived gradients.

One hidden layer, affine output layer.  Gradients are computed by explicit
backpropagation; no autodiff framework is involved.  The canonical flat
parameter order (hidden weights, hidden biases, output weights, output
biases) is part of the public contract and is what checkpoint files store.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, DimensionError, NonFiniteError, UnsupportedConfigError

# Scaled tanh constants recommended for unit-variance inputs.
_ST_A = 1.7159
_ST_B = 2.0 / 3.0


def _scaled_tanh(x):
    return _ST_A * np.tanh(_ST_B * x)


def _scaled_tanh_prime(x):
    t = np.tanh(_ST_B * x)
    return _ST_A * _ST_B * (1.0 - t * t)


def _tanh_prime(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _logistic(x):
    # 0.5*(1+tanh(x/2)) is stable for large |x|.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logistic_prime(x):
    s = _logistic(x)
    return s * (1.0 - s)


ACTIVATIONS = {
    "scaled_tanh": (_scaled_tanh, _scaled_tanh_prime),
    "tanh": (np.tanh, _tanh_prime),
    "logistic": (_logistic, _logistic_prime),
}


def log_cosh(x):
    """log(cosh(x)), overflow-safe for large |x|."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def softplus(x):
    """log(1 + exp(x)), overflow-safe for large |x|."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


# Antiderivative of the activation, used by antiderivative_net.
_ANTIDERIVATIVES = {"tanh": log_cosh, "logistic": softplus}


@dataclass(frozen=True)
class ShallowNet:
    """t -> w_out @ psi(w_in * t + b_in) + b_out, psi applied componentwise."""

    w_in: np.ndarray   # (hidden,)
    b_in: np.ndarray   # (hidden,)
    w_out: np.ndarray  # (output, hidden)
    b_out: np.ndarray  # (output,)
    activation: str = "scaled_tanh"

    def __post_init__(self):
        for name in ("w_in", "b_in", "w_out", "b_out"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        l = self.w_in.shape[0]
        if self.w_in.ndim != 1 or self.b_in.shape != (l,):
            raise DimensionError("hidden layer shapes inconsistent")
        if self.w_out.ndim != 2 or self.w_out.shape[1] != l:
            raise DimensionError("output weights must have shape (d, hidden)")
        if self.b_out.shape != (self.w_out.shape[0],):
            raise DimensionError("output bias length must match output width")
        if self.activation not in ACTIVATIONS:
            raise UnsupportedConfigError(f"unknown activation {self.activation!r}")
        for name in ("w_in", "b_in", "w_out", "b_out"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NonFiniteError(f"{name} has non-finite entries")

    @property
    def hidden_width(self):
        return self.w_in.shape[0]

    @property
    def output_width(self):
        return self.w_out.shape[0]

    @property
    def n_params(self):
        l, d = self.hidden_width, self.output_width
        return l * (d + 2) + d

    def to_flat(self):
        """Parameters in canonical order (w_in, b_in, w_out, b_out)."""
        return np.concatenate(
            [self.w_in, self.b_in, self.w_out.ravel(), self.b_out])

    def with_params(self, flat):
        """Rebuild the net from a canonical flat parameter vector."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise DimensionError(
                f"expected {self.n_params} parameters, got {flat.shape}")
        l, d = self.hidden_width, self.output_width
        return ShallowNet(
            w_in=flat[:l],
            b_in=flat[l:2 * l],
            w_out=flat[2 * l:2 * l + d * l].reshape(d, l),
            b_out=flat[2 * l + d * l:],
            activation=self.activation,
        )


def init_net(hidden, output, activation="scaled_tanh", rng=None):
    """Fresh net with uniform hidden layer and zero output layer.

    The zero output layer makes the initial map identically zero, so drift
    training starts exactly at the unadjusted sampling measure.
    """
    if rng is None:
        rng = np.random.default_rng()
    bound = np.sqrt(6.0 / (1.0 + hidden))
    return ShallowNet(
        w_in=rng.uniform(-bound, bound, size=hidden),
        b_in=rng.uniform(-bound, bound, size=hidden),
        w_out=np.zeros((output, hidden)),
        b_out=np.zeros(output),
        activation=activation,
    )


def forward(net, t):
    """Evaluate the net: scalar t -> (d,), array t of shape (m,) -> (m, d)."""
    psi, _ = ACTIVATIONS[net.activation]
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise NonFiniteError("time input is non-finite")
    if t.ndim == 0:
        return net.w_out @ psi(net.w_in * float(t) + net.b_in) + net.b_out
    if t.ndim != 1:
        raise DimensionError("t must be a scalar or a 1-d array")
    hidden = psi(np.outer(t, net.w_in) + net.b_in)
    return hidden @ net.w_out.T + net.b_out


def backward(net, t, upstream):
    """Gradient of upstream . forward(net, t) w.r.t. the flat parameters."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (net.output_width,):
        raise DimensionError("upstream must have the output width")
    return backward_grid(net, np.atleast_1d(np.float64(t)), upstream[None, :])


def backward_grid(net, times, upstreams):
    """Gradient of sum_k upstreams[k] . forward(net, times[k]).

    This is the batched form of :func:`backward`; linearity in the upstream
    vector lets callers aggregate per-path cotangents before a single call.
    """
    psi, psi_prime = ACTIVATIONS[net.activation]
    times = np.asarray(times, dtype=np.float64)
    upstreams = np.asarray(upstreams, dtype=np.float64)
    if upstreams.shape != (times.size, net.output_width):
        raise DimensionError("upstreams must have shape (len(times), d)")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(upstreams))):
        raise NonFiniteError("backward inputs are non-finite")
    z = np.outer(times, net.w_in) + net.b_in     # (m, hidden)
    hidden = psi(z)
    g_b_out = upstreams.sum(axis=0)
    g_w_out = upstreams.T @ hidden
    d_hidden = (upstreams @ net.w_out) * psi_prime(z)
    g_b_in = d_hidden.sum(axis=0)
    g_w_in = d_hidden.T @ times
    return np.concatenate([g_w_in, g_b_in, g_w_out.ravel(), g_b_out])


@dataclass
class AdamState:
    """Adam moment estimates and hyperparameters for one parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params, learning_rate=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8):
        return cls(m=np.zeros(n_params), v=np.zeros(n_params),
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                   eps=eps)


def adam_step(params, grad, state):
    """One Adam update with bias correction; returns (params, state)."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise DimensionError("params, grad and state sizes differ")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, step=t, learning_rate=state.learning_rate,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_params, new_state


def antiderivative_net(net):
    """Closed-form evaluator of t -> integral_0^t forward(net, s) ds.

    Only valid for a scalar output with unit covariation density and a
    Lebesgue clock, where the integral of each hidden unit is the same unit
    with the activation replaced by its antiderivative (log-cosh for tanh,
    softplus for logistic) plus a linear term for the output bias.
    """
    if net.output_width != 1:
        raise UnsupportedConfigError("closed-form integral needs output width 1")
    anti = _ANTIDERIVATIVES.get(net.activation)
    if anti is None:
        raise UnsupportedConfigError(
            f"no closed-form antiderivative for {net.activation!r}")
    psi, _ = ACTIVATIONS[net.activation]
    alpha, eta = net.w_in, net.b_in
    w, b = net.w_out[0], net.b_out[0]
    moving = alpha != 0.0
    safe_alpha = np.where(moving, alpha, 1.0)

    def evaluate(t):
        t = np.asarray(t, dtype=np.float64)
        tt = t[..., None]
        unit = np.where(
            moving,
            (anti(safe_alpha * tt + eta) - anti(eta)) / safe_alpha,
            psi(eta) * tt,
        )
        return unit @ w + b * t

    return evaluate


_CHECKPOINT_SCHEMA = "driftmc-checkpoint-v1"


def _checkpoint_digest(hidden, output, activation, flat):
    head = f"{_CHECKPOINT_SCHEMA}|{hidden}|{output}|{activation}|".encode()
    return hashlib.sha256(head + np.asarray(flat, dtype=np.float64).tobytes()).hexdigest()


def save_checkpoint(net, path):
    """Write the net as versioned JSON with an integrity checksum."""
    flat = net.to_flat()
    record = {
        "schema": _CHECKPOINT_SCHEMA,
        "hidden": net.hidden_width,
        "output": net.output_width,
        "activation": net.activation,
        "params": [float(x) for x in flat],
        "sha256": _checkpoint_digest(net.hidden_width, net.output_width,
                                     net.activation, flat),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if record.get("schema") != _CHECKPOINT_SCHEMA:
        raise CheckpointError(f"unknown checkpoint schema {record.get('schema')!r}")
    flat = np.asarray(record["params"], dtype=np.float64)
    digest = _checkpoint_digest(record["hidden"], record["output"],
                                record["activation"], flat)
    if digest != record.get("sha256"):
        raise CheckpointError("checkpoint checksum mismatch")
    l, d = int(record["hidden"]), int(record["output"])
    template = ShallowNet(
        w_in=np.zeros(l), b_in=np.zeros(l), w_out=np.zeros((d, l)),
        b_out=np.zeros(d), activation=record["activation"])
    return template.with_params(flat)
