"""Independent naive oracles used to pin expected loss values.

Everything here is written with explicit Python loops and direct
summation, deliberately sharing no code with the package internals.
"""

import math

import numpy as np


def cos(a, b):
    num = sum(x * y for x, y in zip(a, b))
    return num / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def softmax(row, tau=1.0):
    exps = [math.exp(v / tau) for v in row]
    total = sum(exps)
    return [e / total for e in exps]


def kl(q, p):
    total = 0.0
    for qi, pi in zip(q, p):
        if qi > 0:
            total += qi * math.log(qi / pi)
    return total


def infonce(a, b, tau):
    n = len(a)
    total = 0.0
    for i in range(n):
        num = math.exp(cos(a[i], b[i]) / tau)
        den = sum(math.exp(cos(a[i], b[j]) / tau) for j in range(n))
        total -= math.log(num / den)
    return total


def consistency(img, txt, labels, m):
    total = 0.0
    for h, s, y in zip(img, txt, labels):
        c = cos(h, s)
        total += (1 - c) if y == 1 else max(0.0, c - m)
    return total


def cross_modal_kl(student, image, q_t2t, q_v2v, tau_dist):
    n = len(student)
    total = 0.0
    for i in range(n):
        # per image i, over texts j
        p_t2v = softmax([cos(student[j], image[i]) for j in range(n)], tau_dist)
        # per text i, over images j
        p_v2t = softmax([cos(student[i], image[j]) for j in range(n)], tau_dist)
        total += 0.5 * (kl(q_t2t[i], p_t2v) + kl(q_v2v[i], p_v2t))
    return total


def intra_modal_kl(view_z, view_zp, q_t2t, tau_dist):
    n = len(view_z)
    total = 0.0
    for i in range(n):
        p = softmax([cos(view_z[i], view_zp[j]) for j in range(n)], tau_dist)
        total += kl(q_t2t[i], p)
    return total


def listmle(scores, perm, tau):
    """Naive product-form Plackett-Luce NLL for one score list."""
    prob = 1.0
    m = len(perm)
    for j in range(m):
        num = math.exp(scores[perm[j]] / tau)
        den = sum(math.exp(scores[perm[k]] / tau) for k in range(j, m))
        prob *= num / den
    return -math.log(prob)
