"""Linear-chain CRF head: log-partition, Viterbi decoding, and the negative
log-likelihood with its gradients.

Scores live in log space throughout; potentials are dedicated start/stop
vectors plus a (from-tag, to-tag) transition matrix.  Viterbi ties break
toward the lowest tag index so decoding is reproducible bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .nn import ParamTensor


@dataclass
class CrfParams:
    transitions: ParamTensor  # (K, K), [from, to]
    start: ParamTensor        # (K,)
    stop: ParamTensor         # (K,)

    @property
    def num_tags(self) -> int:
        return self.start.values.shape[0]

    def tensors(self) -> list[ParamTensor]:
        return [self.transitions, self.start, self.stop]


def init_crf(name: str, num_tags: int, trainable: bool = True) -> CrfParams:
    """Zero-initialized potentials; excluded from weight decay."""
    return CrfParams(
        transitions=ParamTensor(f"{name}.transitions", np.zeros((num_tags, num_tags)),
                                trainable=trainable, decay=False),
        start=ParamTensor(f"{name}.start", np.zeros(num_tags),
                          trainable=trainable, decay=False),
        stop=ParamTensor(f"{name}.stop", np.zeros(num_tags),
                         trainable=trainable, decay=False),
    )


def _check(emissions: np.ndarray, params: CrfParams) -> None:
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ValueError(f"emissions must be (n>=1, K), got {emissions.shape}")
    if emissions.shape[1] != params.num_tags:
        raise ValueError(f"emissions have {emissions.shape[1]} tags, params {params.num_tags}")


def _forward_table(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    n, _ = emissions.shape
    trans = params.transitions.values
    alphas = np.empty_like(emissions)
    alphas[0] = params.start.values + emissions[0]
    for t in range(1, n):
        alphas[t] = emissions[t] + logsumexp(alphas[t - 1][:, None] + trans, axis=0)
    return alphas


def _backward_table(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    n, _ = emissions.shape
    trans = params.transitions.values
    betas = np.empty_like(emissions)
    betas[-1] = params.stop.values
    for t in range(n - 2, -1, -1):
        betas[t] = logsumexp(trans + emissions[t + 1] + betas[t + 1], axis=1)
    return betas


def log_partition(emissions: np.ndarray, params: CrfParams) -> float:
    """log sum over all K^n tag paths of the exponentiated path score."""
    _check(emissions, params)
    alphas = _forward_table(emissions, params)
    return float(logsumexp(alphas[-1] + params.stop.values))


def path_score(emissions: np.ndarray, params: CrfParams, tags: list[int]) -> float:
    """Unnormalized score of one tag path."""
    _check(emissions, params)
    trans = params.transitions.values
    score = params.start.values[tags[0]] + emissions[0, tags[0]]
    for t in range(1, len(tags)):
        score += trans[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    return float(score + params.stop.values[tags[-1]])


def viterbi(emissions: np.ndarray, params: CrfParams) -> tuple[list[int], float]:
    """Best path and its unnormalized score; ties go to the lowest tag index."""
    _check(emissions, params)
    n, num_tags = emissions.shape
    trans = params.transitions.values
    delta = params.start.values + emissions[0]
    backptr = np.empty((n, num_tags), dtype=np.int64)
    for t in range(1, n):
        scores = delta[:, None] + trans  # [from, to]
        best_from = np.argmax(scores, axis=0)  # first max = lowest index
        delta = emissions[t] + scores[best_from, np.arange(num_tags)]
        backptr[t] = best_from
    final = delta + params.stop.values
    last = int(np.argmax(final))
    path = [last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, float(final[last])


def marginals(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Per-token tag marginals (n, K); each row sums to 1."""
    _check(emissions, params)
    alphas = _forward_table(emissions, params)
    betas = _backward_table(emissions, params)
    log_z = logsumexp(alphas[-1] + params.stop.values)
    return np.exp(alphas + betas - log_z)


def crf_nll_grad(emissions: np.ndarray, params: CrfParams,
                 gold: list[int]) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of the gold path and its gradients.

    Returns (loss, d_emissions) and accumulates (marginal - indicator)
    statistics into the grads of `params`.
    """
    _check(emissions, params)
    n, num_tags = emissions.shape
    if len(gold) != n:
        raise ValueError(f"gold length {len(gold)} != sequence length {n}")
    alphas = _forward_table(emissions, params)
    betas = _backward_table(emissions, params)
    log_z = float(logsumexp(alphas[-1] + params.stop.values))
    loss = max(log_z - path_score(emissions, params, gold), 0.0)

    token_marg = np.exp(alphas + betas - log_z)
    d_emissions = token_marg.copy()
    d_emissions[np.arange(n), gold] -= 1.0

    trans = params.transitions.values
    for t in range(n - 1):
        pair = np.exp(alphas[t][:, None] + trans + emissions[t + 1] + betas[t + 1] - log_z)
        params.transitions.grad += pair
        params.transitions.grad[gold[t], gold[t + 1]] -= 1.0
    params.start.grad += token_marg[0]
    params.start.grad[gold[0]] -= 1.0
    params.stop.grad += token_marg[-1]
    params.stop.grad[gold[-1]] -= 1.0
    return loss, d_emissions
