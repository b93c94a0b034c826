"""Brute-force reference computations used by the tests.

These re-derive game quantities from the rules directly: no memo tables,
no transposition keys, beliefs recomputed from scratch along every branch.
Softmax weights are evaluated with mpmath at 40 digits.
"""

import math

import mpmath

mpmath.mp.dps = 40

N = 11


def softmax(values, temp):
    vals = [mpmath.mpf(v) / mpmath.mpf(temp) for v in values]
    top = max(vals)
    w = [mpmath.e ** (v - top) for v in vals]
    s = mpmath.fsum(w)
    return [float(x / s) for x in w]


# ---------------------------------------------------------------------------
# ultimatum game

def sender_probs(psi, lo, hi, lower_open, last, temp=0.1):
    """Offer distribution of a DoM(-1) sender (psi None = random)."""
    if psi is None:
        return [1.0 / N] * N
    cap = math.floor((1 - psi) * 10 + 1e-9)
    start = lo + 1 if lower_open else lo
    viable = [i for i in range(N) if start <= i <= min(hi, cap)]
    if not viable:
        return [1.0 if i == last else 0.0 for i in range(N)]
    w = softmax([(1 - mpmath.mpf(i) / 10 - mpmath.mpf(psi)) for i in viable], temp)
    out = [0.0] * N
    for i, p in zip(viable, w):
        out[i] = p
    return out


def fold(offers, responses):
    lo, hi, op, last = 0, 10, False, -1
    for o, r in zip(offers, responses):
        if r:
            hi = o
        else:
            lo, op = o, True
        last = o
    return lo, hi, op, last


def type_q(psi, t, T, lo, hi, op, offer, gamma, temp=0.1):
    """(Q(accept), Q(reject)) against a known sender type, by full enumeration."""
    q = []
    for acc in (True, False):
        r = offer / 10 if acc else 0.0
        if t < T:
            nlo, nhi, nop = (lo, offer, op) if acc else (offer, hi, True)
            probs = sender_probs(psi, nlo, nhi, nop, offer, temp)
            cont = 0.0
            for o, p in enumerate(probs):
                if p > 0:
                    cont += p * max(type_q(psi, t + 1, T, nlo, nhi, nop, o, gamma, temp))
            r += gamma * cont
        q.append(r)
    return tuple(q)


PSIS = (None, 0.1, 0.5)


def receiver_q(offers, responses, offer, T, gamma=0.99, temp=0.1):
    """Receiver Q at trial len(offers)+1 with ``offer`` on the table."""
    post = [1 / 3] * 3
    hist = list(offers) + [offer]
    for j, o in enumerate(hist):
        lo, hi, op, last = fold(offers[:j], responses[:j])
        lik = [sender_probs(p, lo, hi, op, last, temp)[o] for p in PSIS]
        post = [b * max(l, 1e-300) for b, l in zip(post, lik)]
        s = sum(post)
        post = [b / s for b in post]
    lo, hi, op, _ = fold(offers, responses)
    t = len(offers) + 1
    qa = qr = 0.0
    for b, psi in zip(post, PSIS):
        a, r = type_q(psi, t, T, lo, hi, op, offer, gamma, temp)
        qa += b * a
        qr += b * r
    return qa, qr


# ---------------------------------------------------------------------------
# zero-sum game

G = {1: ((4, 0, 2), (4, 0, -2)), 2: ((0, 4, -2), (0, 4, 2))}


def row_type_probs(theta, temp=0.1):
    if theta == 0:
        return [0.5, 0.5]
    g = G[theta]
    return softmax([sum(g[0]) / 3, sum(g[1]) / 3], temp)


def column_probs(belief, temp=0.1):
    q = [0.0, 0.0, 0.0]
    for theta, b in zip((0, 1, 2), belief):
        pr = row_type_probs(theta, temp)
        for c in range(3):
            if theta == 0:
                val = sum(pr[r] * (G[1][r][c] + G[2][r][c]) / 2 for r in range(2))
            else:
                val = sum(pr[r] * G[theta][r][c] for r in range(2))
            q[c] -= b * val
    return softmax(q, temp)


def column_belief(rows, prior, temp=0.1):
    b = list(prior)
    for r in rows:
        b = [x * row_type_probs(th, temp)[r] for x, th in zip(b, (0, 1, 2))]
        s = sum(b)
        b = [x / s for x in b]
    return b


def row_q(matrix, rows, T, prior, gamma=0.99, temp=0.1):
    """DoM(1) row Q at trial len(rows)+1, enumerating every row/column path."""
    t = len(rows) + 1
    pc = column_probs(column_belief(rows, prior, temp), temp)
    out = []
    for r in (0, 1):
        total = 0.0
        for c in range(3):
            v = G[matrix][r][c]
            if t < T:
                v += gamma * max(row_q(matrix, rows + [r], T, prior, gamma, temp))
            total += pc[c] * v
        out.append(total)
    return tuple(out)


# ---------------------------------------------------------------------------
# frozen values (computed once with the functions above)

# P(offer | type) at initial bounds, temperature 0.1
LIK_OFFER0_PSI01 = 0.6321492583604866
LIK_OFFER8_PSI01 = 0.00021206245143623285
LIK_OFFER8_PSI05 = 0.0
# receiver vs ThresholdSender(0.1) at initial bounds, accept everything
ACCEPT_ALL_VS_PSI01 = 0.05815226869592296


def kl_smoothed_point_vs_uniform(n=N, eps=1e-3):
    """KL(smoothed point mass || uniform(n)) in 60-digit arithmetic."""
    with mpmath.workdps(60):
        eps = mpmath.mpf(eps)
        z = 1 + n * eps
        p = [(1 + eps) / z] + [eps / z] * (n - 1)
        return float(mpmath.fsum(x * mpmath.log(x * n) for x in p))

KL_POINT_VS_UNIFORM11 = 2.31961897968743
