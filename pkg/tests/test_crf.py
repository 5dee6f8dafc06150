import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from tagscope.crf import (CrfParams, crf_nll_grad, init_crf, log_partition,
                          marginals, path_score, viterbi)
from tagscope.nn import ParamTensor, RngState, grad_check, zero_grads


def random_instance(rng, n, k, scale=1.0):
    emissions = rng.normal((n, k), scale=scale)
    params = init_crf("crf", k)
    params.transitions.values[:] = rng.normal((k, k), scale=scale)
    params.start.values[:] = rng.normal((k,), scale=scale)
    params.stop.values[:] = rng.normal((k,), scale=scale)
    return emissions, params


def brute_force(emissions, params):
    """Enumerate all K^n paths: exact log-partition and argmax oracle."""
    n, k = emissions.shape
    scores, paths = [], []
    for path in itertools.product(range(k), repeat=n):
        scores.append(path_score(emissions, params, list(path)))
        paths.append(path)
    best = int(np.argmax(scores))
    return logsumexp(scores), max(scores), list(paths[best])


def test_uniform_single_step():
    params = init_crf("crf", 5)
    assert log_partition(np.zeros((1, 5)), params) == pytest.approx(math.log(5))


def test_uniform_four_steps():
    params = init_crf("crf", 5)
    assert log_partition(np.zeros((4, 5)), params) == pytest.approx(4 * math.log(5))


def test_log_partition_matches_enumeration():
    rng = RngState(21)
    for trial in range(30):
        n = 1 + rng.integers(1, 6)
        k = 2 + rng.integers(0, 4)
        emissions, params = random_instance(rng, n, k)
        exact, _, _ = brute_force(emissions, params)
        assert log_partition(emissions, params) == pytest.approx(exact, abs=1e-10)


def test_viterbi_matches_enumeration():
    rng = RngState(22)
    for trial in range(30):
        n = 1 + rng.integers(1, 6)
        k = 2 + rng.integers(0, 4)
        emissions, params = random_instance(rng, n, k)
        _, best_score, _ = brute_force(emissions, params)
        path, score = viterbi(emissions, params)
        assert score == pytest.approx(best_score, abs=1e-10)
        assert path_score(emissions, params, path) == pytest.approx(best_score, abs=1e-10)


def test_viterbi_decoupled_argmax_with_zero_transitions():
    rng = RngState(23)
    emissions = rng.normal((6, 4))
    params = init_crf("crf", 4)
    path, _ = viterbi(emissions, params)
    assert path == list(np.argmax(emissions, axis=1))


def test_viterbi_ties_break_to_lowest_index():
    params = init_crf("crf", 5)
    path, score = viterbi(np.zeros((4, 5)), params)
    assert path == [0, 0, 0, 0]
    assert score == 0.0


def test_loss_nonnegative_and_zero_when_saturated():
    params = init_crf("crf", 3)
    emissions = np.zeros((4, 3))
    gold = [2, 0, 1, 1]
    for t, y in enumerate(gold):
        emissions[t, y] = 50.0
    loss, _ = crf_nll_grad(emissions, params, gold)
    assert 0.0 <= loss < 1e-10


def test_loss_positive_generically():
    rng = RngState(31)
    emissions, params = random_instance(rng, 5, 4)
    loss, _ = crf_nll_grad(emissions, params, [0, 1, 2, 3, 0])
    assert loss > 0.0


def test_emission_grad_rows_sum_to_zero():
    rng = RngState(32)
    emissions, params = random_instance(rng, 4, 3)
    _, d_em = crf_nll_grad(emissions, params, [0, 2, 1, 0])
    assert np.allclose(d_em.sum(axis=1), 0.0, atol=1e-12)


def test_marginals_normalize():
    rng = RngState(33)
    for _ in range(10):
        emissions, params = random_instance(rng, 5, 4, scale=2.0)
        marg = marginals(emissions, params)
        assert np.allclose(marg.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(marg >= 0.0)


def test_row_shift_moves_log_partition_and_keeps_argmax():
    rng = RngState(34)
    for _ in range(10):
        emissions, params = random_instance(rng, 4, 3)
        base_z = log_partition(emissions, params)
        base_path, _ = viterbi(emissions, params)
        row = rng.integers(0, 4)
        c = float(rng.normal((), scale=3.0))
        shifted = emissions.copy()
        shifted[row] += c
        assert log_partition(shifted, params) == pytest.approx(base_z + c, abs=1e-9)
        assert viterbi(shifted, params)[0] == base_path


def test_gradients_match_finite_differences():
    rng = RngState(35)
    emissions = rng.normal((4, 3))
    params = init_crf("crf", 3)
    params.transitions.values[:] = rng.normal((3, 3))
    params.start.values[:] = rng.normal((3,))
    params.stop.values[:] = rng.normal((3,))
    em_param = ParamTensor("emissions", emissions)
    gold = [1, 0, 2, 1]
    tensors = [em_param] + params.tensors()

    def loss():
        return log_partition(em_param.values, params) - \
            path_score(em_param.values, params, gold)

    def backward():
        zero_grads(tensors)
        value, d_em = crf_nll_grad(em_param.values, params, gold)
        em_param.grad += d_em
        return value

    report = grad_check(loss, backward, tensors, eps=1e-6)
    assert report.max_rel_error < 1e-6


def test_rejects_inconsistent_shapes():
    params = init_crf("crf", 3)
    with pytest.raises(ValueError):
        log_partition(np.zeros((2, 4)), params)
    with pytest.raises(ValueError):
        crf_nll_grad(np.zeros((2, 3)), params, [0])
