"""Minimal neural substrate: parameter tensors, LSTM cell, dropout, SGD,
seeded initialization, and finite-difference gradient checking.

Everything runs in double precision on the CPU so gradient checks are
decisive.  All randomness flows through RngState (PCG64): identical seed and
call sequence give bit-identical draws, and inference never consults the RNG.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from scipy.special import expit as sigmoid


class NnError(Exception):
    pass


class DimensionMismatch(NnError):
    pass


class InvalidRate(NnError):
    pass


class NonFiniteLoss(NnError):
    pass


class RngState:
    """Seeded PCG64 stream; same seed + same call sequence => same draws."""

    def __init__(self, seed: int, algorithm: str = "pcg64"):
        if algorithm != "pcg64":
            raise ValueError(f"unsupported rng algorithm: {algorithm}")
        self.seed = int(seed)
        self.algorithm = algorithm
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self.gen.uniform(low, high, size=shape)

    def random(self, shape) -> np.ndarray:
        return self.gen.random(size=shape)

    def integers(self, low: int, high: int) -> int:
        return int(self.gen.integers(low, high))

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self.gen.normal(0.0, scale, size=shape)


@dataclass
class ParamTensor:
    """Named value/gradient pair.

    `decay` excludes biases and CRF potentials from weight decay;
    `sparse_decay` restricts decay to rows touched by the current example
    (embedding matrices under per-sentence updates).
    """

    name: str
    values: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]
    trainable: bool = True
    decay: bool = True
    sparse_decay: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        if self.grad.shape != self.values.shape:
            raise DimensionMismatch(f"{self.name}: grad shape {self.grad.shape} "
                                    f"!= values shape {self.values.shape}")


def zero_grads(params: Iterable[ParamTensor]) -> None:
    for p in params:
        p.grad[:] = 0.0


def xavier_bound(shape: Sequence[int]) -> float:
    if len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(name: str, shape: Sequence[int], rng: RngState,
                kind: Literal["weight", "bias", "forget_bias"] = "weight",
                **flags) -> ParamTensor:
    """Initialize a tensor: weights uniform on +/- sqrt(6/(fan_in+fan_out)),
    biases zero, LSTM forget-gate biases one."""
    if kind == "weight":
        bound = xavier_bound(shape)
        values = rng.uniform(-bound, bound, tuple(shape))
    elif kind == "bias":
        values = np.zeros(tuple(shape))
    elif kind == "forget_bias":
        values = np.ones(tuple(shape))
    else:
        raise ValueError(f"unknown init kind: {kind}")
    flags.setdefault("decay", kind == "weight")
    return ParamTensor(name=name, values=values, **flags)


def dropout(x: np.ndarray, rate: float, mode: Literal["train", "eval"],
            rng: RngState | None = None) -> np.ndarray:
    """Inverted dropout: eval is the identity; train zeroes components with
    probability `rate` and scales survivors by 1/(1-rate)."""
    if not (0.0 <= rate < 1.0):
        raise InvalidRate(f"dropout rate must be in [0, 1): {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an RngState")
    return x * dropout_mask(x.shape, rate, rng)


def dropout_mask(shape, rate: float, rng: RngState) -> np.ndarray:
    """Scaled keep-mask used by trainers so backward reuses the forward mask."""
    if not (0.0 <= rate < 1.0):
        raise InvalidRate(f"dropout rate must be in [0, 1): {rate}")
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def sgd_step(params: Iterable[ParamTensor], lr: float, weight_decay: float = 0.0) -> None:
    """values <- values - lr * (grad + weight_decay * values); grads zeroed.

    Decay skips tensors with decay=False; with sparse_decay, only rows whose
    gradient is nonzero (touched by this example) are decayed.
    """
    for p in params:
        if not p.trainable:
            p.grad[:] = 0.0
            continue
        step = p.grad
        if weight_decay and p.decay:
            if p.sparse_decay and p.values.ndim > 1:
                touched = np.any(p.grad != 0.0, axis=tuple(range(1, p.grad.ndim)))
                step = p.grad.copy()
                step[touched] += weight_decay * p.values[touched]
            else:
                step = p.grad + weight_decay * p.values
        p.values -= lr * step
        p.grad[:] = 0.0


# ---------------------------------------------------------------------------
# LSTM cell (no peepholes, forget bias 1) with explicit backward pass.
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    input_dim: int
    hidden_dim: int
    w_i: ParamTensor
    w_f: ParamTensor
    w_o: ParamTensor
    w_g: ParamTensor
    b_i: ParamTensor
    b_f: ParamTensor
    b_o: ParamTensor
    b_g: ParamTensor

    def tensors(self) -> list[ParamTensor]:
        return [self.w_i, self.w_f, self.w_o, self.w_g,
                self.b_i, self.b_f, self.b_o, self.b_g]


def init_lstm(name: str, input_dim: int, hidden_dim: int, rng: RngState) -> LstmParams:
    shape = (hidden_dim, input_dim + hidden_dim)
    return LstmParams(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        w_i=init_params(f"{name}.w_i", shape, rng),
        w_f=init_params(f"{name}.w_f", shape, rng),
        w_o=init_params(f"{name}.w_o", shape, rng),
        w_g=init_params(f"{name}.w_g", shape, rng),
        b_i=init_params(f"{name}.b_i", (hidden_dim,), rng, kind="bias"),
        b_f=init_params(f"{name}.b_f", (hidden_dim,), rng, kind="forget_bias"),
        b_o=init_params(f"{name}.b_o", (hidden_dim,), rng, kind="bias"),
        b_g=init_params(f"{name}.b_g", (hidden_dim,), rng, kind="bias"),
    )


def lstm_step(params: LstmParams, h_prev: np.ndarray, c_prev: np.ndarray,
              x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: returns (h, c)."""
    if x.shape != (params.input_dim,) or h_prev.shape != (params.hidden_dim,):
        raise DimensionMismatch(
            f"lstm_step: x {x.shape}, h_prev {h_prev.shape}, expected "
            f"({params.input_dim},), ({params.hidden_dim},)")
    z = np.concatenate([x, h_prev])
    i = sigmoid(params.w_i.values @ z + params.b_i.values)
    f = sigmoid(params.w_f.values @ z + params.b_f.values)
    o = sigmoid(params.w_o.values @ z + params.b_o.values)
    g = np.tanh(params.w_g.values @ z + params.b_g.values)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


@dataclass
class LstmCache:
    """Per-step activations needed by the backward pass."""
    zs: list[np.ndarray]
    gates: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]  # i, f, o, g
    cs: list[np.ndarray]
    c_prevs: list[np.ndarray]


def lstm_forward(params: LstmParams, xs: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """Run the cell over a sequence (n, input_dim); returns hidden states (n, H)."""
    n = xs.shape[0]
    h = np.zeros(params.hidden_dim)
    c = np.zeros(params.hidden_dim)
    hs = np.zeros((n, params.hidden_dim))
    cache = LstmCache([], [], [], [])
    for t in range(n):
        z = np.concatenate([xs[t], h])
        i = sigmoid(params.w_i.values @ z + params.b_i.values)
        f = sigmoid(params.w_f.values @ z + params.b_f.values)
        o = sigmoid(params.w_o.values @ z + params.b_o.values)
        g = np.tanh(params.w_g.values @ z + params.b_g.values)
        cache.zs.append(z)
        cache.gates.append((i, f, o, g))
        cache.c_prevs.append(c)
        c = f * c + i * g
        h = o * np.tanh(c)
        cache.cs.append(c)
        hs[t] = h
    return hs, cache


def lstm_backward(params: LstmParams, cache: LstmCache, d_hs: np.ndarray) -> np.ndarray:
    """Backprop through time; accumulates into params' grads, returns d_xs."""
    n = d_hs.shape[0]
    D, H = params.input_dim, params.hidden_dim
    d_xs = np.zeros((n, D))
    dh_rec = np.zeros(H)
    dc_rec = np.zeros(H)
    for t in range(n - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        c = cache.cs[t]
        tanh_c = np.tanh(c)
        dh = d_hs[t] + dh_rec
        do = dh * tanh_c
        dc = dc_rec + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        df = dc * cache.c_prevs[t]
        dg = dc * i
        dc_rec = dc * f
        d_pre_i = di * i * (1.0 - i)
        d_pre_f = df * f * (1.0 - f)
        d_pre_o = do * o * (1.0 - o)
        d_pre_g = dg * (1.0 - g * g)
        z = cache.zs[t]
        params.w_i.grad += np.outer(d_pre_i, z)
        params.w_f.grad += np.outer(d_pre_f, z)
        params.w_o.grad += np.outer(d_pre_o, z)
        params.w_g.grad += np.outer(d_pre_g, z)
        params.b_i.grad += d_pre_i
        params.b_f.grad += d_pre_f
        params.b_o.grad += d_pre_o
        params.b_g.grad += d_pre_g
        dz = (params.w_i.values.T @ d_pre_i + params.w_f.values.T @ d_pre_f
              + params.w_o.values.T @ d_pre_o + params.w_g.values.T @ d_pre_g)
        d_xs[t] = dz[:D]
        dh_rec = dz[D:]
    return d_xs


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: dict[str, float]

    @property
    def worst_tensor(self) -> str:
        return max(self.per_tensor, key=self.per_tensor.get)  # type: ignore[arg-type]

    def __str__(self) -> str:
        return (f"max rel. error {self.max_rel_error:.3e} "
                f"(worst tensor: {self.worst_tensor})")


def grad_check(loss_fn: Callable[[], float], backward_fn: Callable[[], float],
               params: Sequence[ParamTensor], eps: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    `loss_fn` must be deterministic (dropout masks frozen by the caller).
    `backward_fn` zeroes and repopulates every tensor's grad.  Relative error
    per component is |a - n| / max(1e-8, |a| + |n|).
    """
    if not math.isfinite(backward_fn()):
        raise NonFiniteLoss("loss is not finite at the evaluation point")
    analytic = {p.name: p.grad.copy() for p in params}
    per_tensor: dict[str, float] = {}
    for p in params:
        if not p.trainable:
            continue
        worst = 0.0
        flat = p.values.reshape(-1)
        a_flat = analytic[p.name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = loss_fn()
            flat[k] = orig - eps
            lm = loss_fn()
            flat[k] = orig
            if not (math.isfinite(lp) and math.isfinite(lm)):
                raise NonFiniteLoss(f"{p.name}[{k}]: non-finite perturbed loss")
            numeric = (lp - lm) / (2.0 * eps)
            a = a_flat[k]
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
        per_tensor[p.name] = worst
    return GradCheckReport(max(per_tensor.values(), default=0.0), per_tensor)


# ---------------------------------------------------------------------------
# Shared numeric helpers
# ---------------------------------------------------------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))
