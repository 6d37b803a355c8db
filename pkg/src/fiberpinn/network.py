"""Fully connected tanh network ``(t, zeta) -> (s_R, s_I)``.

Input derivatives are propagated exactly as truncated Taylor coefficients:
every layer carries the value, the first three ``t``-derivatives and the
first ``zeta``-derivative of its activations. Weight gradients of any loss
built from those quantities come from a hand-written reverse pass through
the same Taylor-propagated graph.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DivergenceError, InvalidArchitectureError, InvalidGradientError

FULL_SCALE_LAYERS = (2, 100, 100, 100, 100, 100, 2)
CHECKPOINT_VERSION = 1

# Order of the fields of DerivativeBundle as they travel through the network.
COMPONENTS = ("value", "d_t", "d_tt", "d_ttt", "d_zeta")


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Layer sizes plus one flat parameter vector.

    The vector stores, layer after layer, the weight matrix of shape
    ``(n_in, n_out)`` in C order followed by the bias of length ``n_out``.
    """

    layer_sizes: tuple
    theta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        _check_sizes(sizes)
        if self.theta.shape != (count_parameters(sizes),):
            raise InvalidArchitectureError(
                f"theta has shape {self.theta.shape}, expected ({count_parameters(sizes)},)")

    @property
    def n_params(self):
        return self.theta.size

    def layers(self):
        """List of ``(W, b)`` views into :attr:`theta`."""
        out = []
        k = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.theta[k:k + n_in * n_out].reshape(n_in, n_out)
            k += n_in * n_out
            b = self.theta[k:k + n_out]
            k += n_out
            out.append((w, b))
        return out

    def with_theta(self, theta):
        return NetworkParams(self.layer_sizes, np.asarray(theta, dtype=float), self.seed)


def _check_sizes(sizes):
    if len(sizes) < 2 or sizes[0] != 2 or sizes[-1] != 2 or min(sizes) < 1:
        raise InvalidArchitectureError(
            f"layer sizes must start and end with 2 and be positive, got {sizes}")


def count_parameters(layer_sizes):
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def init_network(layer_sizes=FULL_SCALE_LAYERS, seed=0):
    """Xavier-uniform weights, zero biases, reproducible from ``seed``."""
    sizes = tuple(int(n) for n in layer_sizes)
    _check_sizes(sizes)
    rng = np.random.default_rng(seed)
    chunks = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return NetworkParams(sizes, np.concatenate(chunks), int(seed))


def zero_network(layer_sizes):
    sizes = tuple(int(n) for n in layer_sizes)
    _check_sizes(sizes)
    return NetworkParams(sizes, np.zeros(count_parameters(sizes)))


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """Network outputs and input derivatives at a batch of points.

    Every field has shape ``(N, 2)``; column 0 is ``s_R`` and column 1 is
    ``s_I``.
    """

    value: np.ndarray
    d_t: np.ndarray
    d_tt: np.ndarray
    d_ttt: np.ndarray
    d_zeta: np.ndarray

    def complex(self, name):
        a = getattr(self, name)
        return a[:, 0] + 1j * a[:, 1]

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COMPONENTS)

    @classmethod
    def zeros(cls, n):
        return cls(*(np.zeros((n, 2)) for _ in COMPONENTS))


def _as_batch(t, zeta):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    t, zeta = np.broadcast_arrays(t, zeta)
    return t.ravel(), zeta.ravel()


def forward(params, t, zeta):
    """Network output at the points ``(t, zeta)``; returns ``(s_R, s_I)``."""
    t, zeta = _as_batch(t, zeta)
    h = np.stack([t, zeta], axis=1)
    layers = params.layers()
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
    w, b = layers[-1]
    out = h @ w + b
    return out[:, 0], out[:, 1]


@njit(cache=True)
def _tanh_taylor(z, y0, a, d):
    """Activation of Taylor components ``z[0..4]`` -> ``a[0..4]``.

    ``y0`` is ``tanh(z[0])`` (numpy's vectorized tanh is much faster than
    the scalar one available here). Stores ``tanh`` and its first three
    derivatives in ``d`` for the reverse pass.
    """
    _, n, k = z.shape
    for i in range(n):
        for j in range(k):
            z1 = z[1, i, j]
            z2 = z[2, i, j]
            y = y0[i, j]
            s1 = 1.0 - y * y
            s2 = -2.0 * y * s1
            s3 = -2.0 * s1 * s1 - 2.0 * y * s2
            a[0, i, j] = y
            a[1, i, j] = s1 * z1
            a[2, i, j] = s2 * z1 * z1 + s1 * z2
            a[3, i, j] = s3 * z1 * z1 * z1 + 3.0 * s2 * z1 * z2 + s1 * z[3, i, j]
            a[4, i, j] = s1 * z[4, i, j]
            d[0, i, j] = y
            d[1, i, j] = s1
            d[2, i, j] = s2
            d[3, i, j] = s3


@njit(cache=True)
def _tanh_taylor_vjp(h, z, d, g):
    """Pull cotangents ``h`` of the activations back to ``g`` of ``z``."""
    _, n, k = z.shape
    for i in range(n):
        for j in range(k):
            z1 = z[1, i, j]
            z2 = z[2, i, j]
            y = d[0, i, j]
            s1 = d[1, i, j]
            s2 = d[2, i, j]
            s3 = d[3, i, j]
            s4 = -6.0 * s1 * s2 - 2.0 * y * s3
            h0 = h[0, i, j]
            h1 = h[1, i, j]
            h2 = h[2, i, j]
            h3 = h[3, i, j]
            hz = h[4, i, j]
            g[3, i, j] = h3 * s1
            g[2, i, j] = h2 * s1 + 3.0 * h3 * s2 * z1
            g[1, i, j] = (h1 * s1 + 2.0 * h2 * s2 * z1
                          + 3.0 * h3 * (s3 * z1 * z1 + s2 * z2))
            g[4, i, j] = hz * s1
            g[0, i, j] = (h0 * s1 + h1 * s2 * z1 + h2 * (s3 * z1 * z1 + s2 * z2)
                          + h3 * (s4 * z1 * z1 * z1 + 3.0 * s3 * z1 * z2 + s2 * z[3, i, j])
                          + hz * s2 * z[4, i, j])


def _taylor_forward(params, t, zeta):
    """Propagate ``(value, d_t, d_tt, d_ttt, d_zeta)`` and keep a tape.

    Pre-activations travel as one array of shape ``(5, N, width)`` so each
    affine map is a single matrix product.
    """
    t, zeta = _as_batch(t, zeta)
    n = t.size
    layers = params.layers()
    w0, b0 = layers[0]
    x = np.stack([t, zeta], axis=1)
    # d(t, zeta)/dt = (1, 0) and d/dzeta = (0, 1): first-layer d_t and
    # d_zeta are the weight rows, d_tt and d_ttt vanish.
    z = np.zeros((5, n, w0.shape[1]))
    z[0] = x @ w0 + b0
    z[1] = w0[0]
    z[4] = w0[1]
    tape = [x]
    for w, b in layers[1:]:
        k = z.shape[2]
        a = np.empty_like(z)
        d = np.empty((4, n, k))
        _tanh_taylor(z, np.tanh(z[0]), a, d)
        tape.append((a, z, d))
        z = (a.reshape(5 * n, k) @ w).reshape(5, n, -1)
        z[0] += b
    return DerivativeBundle(*z), tape


def input_derivatives(params, t, zeta):
    """Exact value, ``d/dt`` up to third order and ``d/dzeta`` of the output."""
    bundle, _ = _taylor_forward(params, t, zeta)
    return bundle


def _taylor_backward(params, tape, cot):
    """Reverse pass: cotangent of the output bundle -> gradient of theta."""
    layers = params.layers()
    grads = []
    g = np.stack([np.asarray(c, dtype=float) for c in cot.as_tuple()])
    for li in range(len(layers) - 1, 0, -1):
        w, _ = layers[li]
        a, z, d = tape[li]
        _, n, k = a.shape
        m = w.shape[1]
        g2 = g.reshape(5 * n, m)
        grads.append((a.reshape(5 * n, k).T @ g2, g[0].sum(axis=0)))
        h = (g2 @ w.T).reshape(5, n, k)
        g = np.empty_like(h)
        _tanh_taylor_vjp(h, z, d, g)
    x = tape[0]
    dw = x.T @ g[0]
    dw[0] += g[1].sum(axis=0)
    dw[1] += g[4].sum(axis=0)
    grads.append((dw, g[0].sum(axis=0)))
    grads.reverse()
    return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])


def loss_gradient(params, loss_evaluator):
    """Scalar loss and its exact gradient with respect to ``params.theta``.

    ``loss_evaluator`` exposes the evaluation points as attributes ``t`` and
    ``zeta`` and, when called with the :class:`DerivativeBundle` at those
    points, returns ``(loss, cotangent)`` where ``cotangent`` is a
    :class:`DerivativeBundle` holding ``d loss / d component``.
    """
    bundle, tape = _taylor_forward(params, loss_evaluator.t, loss_evaluator.zeta)
    loss, cot = loss_evaluator(bundle)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss!r}", last_finite=params)
    return float(loss), _taylor_backward(params, tape, cot)


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta_a: float = 0.9
    beta_b: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, n, learning_rate=1e-3, beta_a=0.9, beta_b=0.999, epsilon=1e-8):
        return cls(np.zeros(n), np.zeros(n), 0, learning_rate, beta_a, beta_b, epsilon)


def adam_update(theta, gradient, state):
    """Bias-corrected Adam on plain arrays; returns ``(theta, state)``."""
    gradient = np.asarray(gradient, dtype=float)
    if gradient.shape != theta.shape or state.first_moment.shape != theta.shape:
        raise InvalidGradientError(
            f"gradient shape {gradient.shape} does not match parameters {theta.shape}")
    k = state.step_count + 1
    m = state.beta_a * state.first_moment + (1.0 - state.beta_a) * gradient
    v = state.beta_b * state.second_moment + (1.0 - state.beta_b) * gradient * gradient
    m_hat = m / (1.0 - state.beta_a ** k)
    v_hat = v / (1.0 - state.beta_b ** k)
    new_theta = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(m, v, k, state.learning_rate, state.beta_a, state.beta_b,
                          state.epsilon)
    return new_theta, new_state


def adam_step(params, gradient, state):
    theta, state = adam_update(params.theta, gradient, state)
    return params.with_theta(theta), state


def save_checkpoint(path, params, state=None):
    """Write params (and optionally Adam state) to an ``.npz`` file."""
    payload = dict(version=np.array(CHECKPOINT_VERSION),
                   layer_sizes=np.array(params.layer_sizes, dtype=np.int64),
                   seed=np.array(params.seed, dtype=np.int64),
                   theta=params.theta)
    if state is not None:
        payload.update(
            adam_m=state.first_moment, adam_v=state.second_moment,
            adam_step=np.array(state.step_count, dtype=np.int64),
            adam_hyper=np.array([state.learning_rate, state.beta_a, state.beta_b,
                                 state.epsilon]))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(params, state_or_None)``."""
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise InvalidArchitectureError(f"unsupported checkpoint version {version}")
        params = NetworkParams(tuple(int(n) for n in data["layer_sizes"]),
                               data["theta"].copy(), int(data["seed"]))
        state = None
        if "adam_m" in data:
            lr, ba, bb, eps = (float(x) for x in data["adam_hyper"])
            state = AdamState(data["adam_m"].copy(), data["adam_v"].copy(),
                              int(data["adam_step"]), lr, ba, bb, eps)
    return params, state
