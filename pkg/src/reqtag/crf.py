"""Linear-chain CRF over BIO tags: forward algorithm, Viterbi, NLL.

Tag indices: O=0, B=1, I=2, plus two virtual states used only inside the
transition matrix: START=3 and STOP=4. Transitions that would produce an
ill-formed BIO sequence (START->I, O->I) are clamped to a large negative
score and never updated.
"""

import numpy as np

from .tensor import logsumexp

O, B, I = 0, 1, 2
TAGS = ["O", "B", "I"]
N_TAGS = 3
START, STOP = 3, 4
N_STATES = 5

FORBIDDEN_SCORE = -1e4


def forbidden_mask() -> np.ndarray:
    """Boolean (5, 5) mask of transition entries that stay clamped."""
    m = np.zeros((N_STATES, N_STATES), dtype=bool)
    m[START, I] = True
    m[O, I] = True
    m[:, START] = True   # nothing enters the start state
    m[STOP, :] = True    # nothing leaves the stop state
    return m


def init_transitions() -> np.ndarray:
    t = np.zeros((N_STATES, N_STATES))
    t[forbidden_mask()] = FORBIDDEN_SCORE
    return t


def is_valid_bio(tags) -> bool:
    prev = None
    for t in tags:
        if t == I and (prev is None or prev == O):
            return False
        prev = t
    return True


def path_score(emissions: np.ndarray, transitions: np.ndarray, tags) -> float:
    """Score of one tag path, including start and stop transitions."""
    score = transitions[START, tags[0]] + emissions[0, tags[0]]
    for t in range(1, len(tags)):
        score += transitions[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    score += transitions[tags[-1], STOP]
    return float(score)


def crf_log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    """log Z by the forward algorithm in log space."""
    n = emissions.shape[0]
    alpha = transitions[START, :N_TAGS] + emissions[0]
    for t in range(1, n):
        # alpha[y] = e[t,y] + logsumexp_y'(alpha[y'] + T[y',y])
        alpha = emissions[t] + logsumexp(
            alpha[:, None] + transitions[:N_TAGS, :N_TAGS], axis=0)
    return float(logsumexp(alpha + transitions[:N_TAGS, STOP]))


def crf_viterbi(emissions: np.ndarray, transitions: np.ndarray):
    """Max-scoring path and its score.

    Ties break toward the lower tag index (O < B < I), resolved from the
    last position backward; np.argmax's first-max convention implements
    exactly that through the backpointers.
    """
    n = emissions.shape[0]
    v = transitions[START, :N_TAGS] + emissions[0]
    backptr = np.zeros((n, N_TAGS), dtype=np.int64)
    for t in range(1, n):
        cand = v[:, None] + transitions[:N_TAGS, :N_TAGS]  # (prev, next)
        backptr[t] = np.argmax(cand, axis=0)
        v = emissions[t] + cand[backptr[t], np.arange(N_TAGS)]
    final = v + transitions[:N_TAGS, STOP]
    last = int(np.argmax(final))
    score = float(final[last])
    path = [last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, score


def crf_marginals(emissions: np.ndarray, transitions: np.ndarray):
    """Unary and pairwise marginals plus log Z (forward-backward)."""
    n = emissions.shape[0]
    trans = transitions[:N_TAGS, :N_TAGS]
    alpha = np.zeros((n, N_TAGS))
    alpha[0] = transitions[START, :N_TAGS] + emissions[0]
    for t in range(1, n):
        alpha[t] = emissions[t] + logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    log_z = float(logsumexp(alpha[n - 1] + transitions[:N_TAGS, STOP]))

    beta = np.zeros((n, N_TAGS))
    beta[n - 1] = transitions[:N_TAGS, STOP]
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(trans + (emissions[t + 1] + beta[t + 1])[None, :],
                            axis=1)

    unary = np.exp(alpha + beta - log_z)  # (n, 3)
    pairwise = np.zeros((max(n - 1, 0), N_TAGS, N_TAGS))
    for t in range(1, n):
        pairwise[t - 1] = np.exp(alpha[t - 1][:, None] + trans
                                 + (emissions[t] + beta[t])[None, :] - log_z)
    return unary, pairwise, log_z


def crf_nll(emissions: np.ndarray, transitions: np.ndarray, gold_tags) -> float:
    """Negative log-likelihood of the gold path."""
    if not is_valid_bio(gold_tags):
        raise ValueError(f"gold tags are not a valid BIO sequence: {gold_tags}")
    return crf_log_partition(emissions, transitions) - path_score(
        emissions, transitions, gold_tags)


def crf_nll_backward(emissions: np.ndarray, transitions: np.ndarray, gold_tags):
    """NLL plus its gradients w.r.t. emissions and transitions.

    d NLL / d e[t,y]  = p(y_t = y) - 1[gold_t = y]
    d NLL / d T[a,b]  = expected transition count - gold transition count
    Clamped (forbidden) transition entries get zero gradient.
    """
    if not is_valid_bio(gold_tags):
        raise ValueError(f"gold tags are not a valid BIO sequence: {gold_tags}")
    n = emissions.shape[0]
    unary, pairwise, log_z = crf_marginals(emissions, transitions)
    nll = log_z - path_score(emissions, transitions, gold_tags)

    d_e = unary.copy()
    for t, y in enumerate(gold_tags):
        d_e[t, y] -= 1.0

    d_t = np.zeros((N_STATES, N_STATES))
    d_t[START, :N_TAGS] += unary[0]
    d_t[START, gold_tags[0]] -= 1.0
    d_t[:N_TAGS, STOP] += unary[n - 1]
    d_t[gold_tags[-1], STOP] -= 1.0
    if n > 1:
        d_t[:N_TAGS, :N_TAGS] += pairwise.sum(axis=0)
        for t in range(1, n):
            d_t[gold_tags[t - 1], gold_tags[t]] -= 1.0
    d_t[forbidden_mask()] = 0.0
    return nll, d_e, d_t


def brute_force_log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    """Enumeration oracle: log sum over all 3^L paths. Test use only."""
    from itertools import product
    n = emissions.shape[0]
    scores = [path_score(emissions, transitions, path)
              for path in product(range(N_TAGS), repeat=n)]
    return float(logsumexp(np.array(scores)))


def brute_force_viterbi(emissions: np.ndarray, transitions: np.ndarray):
    """Enumeration oracle for the best path under the stated tie-break."""
    from itertools import product
    n = emissions.shape[0]
    best_path, best_score = None, -np.inf
    for path in product(range(N_TAGS), repeat=n):
        s = path_score(emissions, transitions, path)
        if s > best_score or (s == best_score
                              and path[::-1] < best_path[::-1]):
            best_path, best_score = path, s
    return list(best_path), best_score
