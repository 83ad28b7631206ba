"""Inner-loop kernels shared by the public API and the Monte Carlo runner.

Every function here operates in place on float64/int64 arrays and is compiled
with numba when available (see :mod:`lamm._jit`). The public wrappers in
:mod:`lamm.schemes` copy their inputs before calling in, so these stay free of
validation and allocation.
"""

import math

import numpy as np

from lamm._jit import jit

LRI = 0
LRP = 1
LREP = 2
PURSUIT = 3
MULTIFIXED = 4
MULTIADAPTIVE = 5

# drift beyond this triggers renormalization after an update
SIMPLEX_DRIFT = 1e-12
# log-likelihoods closer than this (relative) are ties
TIE_RTOL = 1e-12
LOG_CLAMP = 1e-12


@jit
def renormalize(p):
    s = 0.0
    for j in range(p.shape[0]):
        s += p[j]
    if abs(s - 1.0) > SIMPLEX_DRIFT:
        for j in range(p.shape[0]):
            p[j] = p[j] / s


@jit
def argmax_first(x):
    best = 0
    for j in range(1, x.shape[0]):
        if x[j] > x[best]:
            best = j
    return best


@jit
def sample_index(p, u):
    """Invert the cumulative sum of ``p`` at ``u`` in [0, 1).

    Rounding slack past the last bucket goes to the last action with
    non-zero probability.
    """
    c = 0.0
    last = p.shape[0] - 1
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            c += p[i]
            last = i
            if u < c:
                return i
    return last


@jit
def pursue(p, target, lam):
    # p <- (1 - lam) p + lam e_target
    pt = p[target]
    keep = 1.0 - lam
    for j in range(p.shape[0]):
        p[j] = keep * p[j]
    p[target] = pt + lam * (1.0 - pt)
    renormalize(p)


@jit
def lri(p, i, beta, a):
    if beta == 1:
        pursue(p, i, a)


@jit
def lrp(p, i, beta, a, b):
    if beta == 1:
        pursue(p, i, a)
    elif b != 0.0:
        r = p.shape[0]
        share = b / (r - 1)
        keep = 1.0 - b
        for j in range(r):
            if j != i:
                p[j] = share + keep * p[j]
        p[i] = keep * p[i]
        renormalize(p)


@jit
def best_mean(attempts, rewards):
    t = 0
    best = -1.0
    for j in range(attempts.shape[0]):
        m = rewards[j] / attempts[j]
        if m > best:
            best = m
            t = j
    return t


@jit
def best_model(n, n1, log_q, log_1q):
    """Index of the grid model with the largest Bernoulli log-likelihood."""
    k_best = 0
    best = n1 * log_q[0] + (n - n1) * log_1q[0]
    for k in range(1, log_q.shape[0]):
        ll = n1 * log_q[k] + (n - n1) * log_1q[k]
        if ll > best + TIE_RTOL * max(1.0, abs(best)):
            best = ll
            k_best = k
    return k_best


@jit
def select_models(attempts, rewards, log_q, log_1q, qidx):
    for i in range(attempts.shape[0]):
        qidx[i] = best_model(attempts[i], rewards[i], log_q, log_1q)
    # grid is ascending, so the largest index is the largest model value
    return argmax_first(qidx)


@jit
def adapt_models(est, loglik, gains, i, beta):
    # score each model on its prediction, then move it toward the response
    for k in range(gains.shape[0]):
        e = est[i, k]
        c = min(max(e, LOG_CLAMP), 1.0 - LOG_CLAMP)
        if beta == 1:
            loglik[i, k] += math.log(c)
        else:
            loglik[i, k] += math.log(1.0 - c)
        est[i, k] = (1.0 - gains[k]) * e + gains[k] * beta


@jit
def best_adaptive(est, loglik):
    t = 0
    best = -1.0
    for j in range(est.shape[0]):
        v = est[j, argmax_first(loglik[j])]
        if v > best:
            best = v
            t = j
    return t


@jit
def crossing(p, threshold, opt_index, any_action):
    if any_action:
        for j in range(p.shape[0]):
            if p[j] >= threshold:
                return j
        return -1
    if p[opt_index] >= threshold:
        return opt_index
    return -1


@jit
def simulate(kind, p, d, uniforms, a, b, lam, log_q, log_1q, gains, est,
             init_len, threshold, opt_index, any_action, stop_at_convergence,
             stride, rec_step, rec_action, rec_response, rec_p):
    """Run one sample path.

    ``uniforms`` has shape (steps, 2): column 0 picks the action, column 1
    draws the environment response. ``p`` and ``est`` are mutated and hold
    the final state on return. Returns (converged_step, converged_action,
    records_written, attempts, rewards); -1 marks "never converged".
    """
    r = p.shape[0]
    steps = uniforms.shape[0]
    estimator = kind >= PURSUIT
    attempts = np.zeros(r, np.int64)
    rewards = np.zeros(r, np.int64)
    loglik = np.zeros(est.shape)
    qidx = np.zeros(r, np.int64)

    conv_step = -1
    conv_action = crossing(p, threshold, opt_index, any_action)
    if conv_action >= 0:
        conv_step = 0

    w = 0
    for n in range(steps):
        if estimator and n < init_len:
            i = n % r
        else:
            i = sample_index(p, uniforms[n, 0])
        beta = 1 if uniforms[n, 1] < d[i] else 0

        if kind == LRI:
            lri(p, i, beta, a)
        elif kind == LRP or kind == LREP:
            lrp(p, i, beta, a, b)
        else:
            attempts[i] += 1
            rewards[i] += beta
            if kind == MULTIFIXED:
                qidx[i] = best_model(attempts[i], rewards[i], log_q, log_1q)
            elif kind == MULTIADAPTIVE:
                adapt_models(est, loglik, gains, i, beta)
            if n >= init_len:
                if kind == PURSUIT:
                    t = best_mean(attempts, rewards)
                elif kind == MULTIFIXED:
                    t = argmax_first(qidx)
                else:
                    t = best_adaptive(est, loglik)
                pursue(p, t, lam)

        if not estimator:
            attempts[i] += 1
            rewards[i] += beta

        if conv_step < 0:
            j = crossing(p, threshold, opt_index, any_action)
            if j >= 0:
                conv_step = n + 1
                conv_action = j
        done = stop_at_convergence and conv_step >= 0
        if n % stride == 0 or n == steps - 1 or done:
            rec_step[w] = n
            rec_action[w] = i
            rec_response[w] = beta
            for j in range(r):
                rec_p[w, j] = p[j]
            w += 1
        if done:
            break
    return conv_step, conv_action, w, attempts, rewards
