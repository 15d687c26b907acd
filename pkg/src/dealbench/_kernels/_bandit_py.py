"""Pure-Python bandit kernel. Operation order matches ``_bandit_c.pyx`` exactly."""
from math import exp

import numpy as np

BACKEND = "python"


def softmax(theta, active):
    th = theta.tolist() if hasattr(theta, "tolist") else list(theta)
    idx = active.tolist() if hasattr(active, "tolist") else list(active)
    m = th[idx[0]]
    for i in idx:
        if th[i] > m:
            m = th[i]
    ws = [exp(th[i] - m) for i in idx]
    s = 0.0
    for w in ws:
        s += w
    return np.array([w / s for w in ws], dtype=np.float64)


def choose(theta, active, eps, u_explore, u_pick):
    """Returns (arm, explored). ``u_*`` are uniforms in [0, 1)."""
    idx = active.tolist() if hasattr(active, "tolist") else list(active)
    k = len(idx)
    if u_explore < eps:
        j = int(u_pick * k)
        return idx[j if j < k else k - 1], True
    probs = softmax(theta, idx).tolist()
    cum = 0.0
    for j in range(k):
        cum += probs[j]
        if u_pick < cum:
            return idx[j], False
    return idx[k - 1], False


def update(theta, active, arm, reward, baseline, eta):
    """In-place single-arm update. Returns (baseline, advantage, pi_arm)."""
    idx = active.tolist() if hasattr(active, "tolist") else list(active)
    b = 0.9 * baseline + 0.1 * reward
    adv = reward - b
    probs = softmax(theta, idx).tolist()
    pi = probs[idx.index(arm)]
    theta[arm] = theta[arm] + eta * adv * (1.0 - pi)
    return b, adv, pi
