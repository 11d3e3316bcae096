"""Shared brute-force oracles and random model factories for the tests."""
import itertools

import numpy as np

from reciprocal_rbm.rbm import RbmParams


def random_params(n, m, seed, scale=1.0, bias_scale=None):
    rng = np.random.default_rng(seed)
    bias_scale = scale if bias_scale is None else bias_scale
    return RbmParams(rng.normal(0, bias_scale, n), rng.normal(0, bias_scale, m), rng.normal(0, scale, (n, m)))


def all_states(n):
    return np.array(list(itertools.product([0.0, 1.0], repeat=n)))


def joint_table(params):
    """Exact Boltzmann probabilities over every (v, h), from the raw energy."""
    V = all_states(params.n_visible)
    H = all_states(params.n_hidden)
    E = -(V @ params.a)[:, None] - (H @ params.b)[None, :] - V @ params.W @ H.T
    logp = -E - np.max(-E)
    p = np.exp(logp)
    return V, H, p / p.sum()


def brute_log_z(params):
    V = all_states(params.n_visible)
    H = all_states(params.n_hidden)
    E = -(V @ params.a)[:, None] - (H @ params.b)[None, :] - V @ params.W @ H.T
    m = np.max(-E)
    return float(m + np.log(np.exp(-E - m).sum()))


ACCEPTANCE_LINES = []


def verdict(number, title, ok, detail=""):
    """Record and print one acceptance line; returns ``ok`` for the caller to assert on."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
