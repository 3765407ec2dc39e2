"""Independent reference computations used by the tests.

None of these share code paths with the library beyond word parsing.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def reduced_words(rank, length):
    letters = [s * i for i in range(1, rank + 1) for s in (1, -1)]
    layer = [()]
    for _ in range(length):
        layer = [w + (x,) for w in layer for x in letters if not (w and w[-1] == -x)]
    return layer


def free_reduce(letters):
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def uniform_cylinder(u, rank):
    if not u:
        return 1.0
    return 1.0 / (2 * rank) * (2 * rank - 1) ** -(len(u) - 1)


def brute_transport(g, depth, rank, cylinder=None):
    """(source, target) -> (T, W) for the boundary action of ``g`` by refinement.

    Every depth-L cell is cut into cylinders long enough that ``g`` can never
    swallow them; each fine cylinder [u] then maps onto the single cylinder
    [g u], whose depth-L prefix is its target cell.
    """
    cylinder = cylinder or (lambda u: uniform_cylinder(u, rank))
    g = tuple(g)
    fine = depth + len(g) + 1
    out = {}
    for u in reduced_words(rank, fine):
        img = free_reduce(g + u)
        key = (u[:depth], img[:depth])
        t, w = out.get(key, (0.0, 0.0))
        # T: mu([u]) for u in c with g u in c'; W: mu(g [u]) = mu([g u])
        out[key] = (t + cylinder(u), w + cylinder(img))
    return out


def walk_entropy_speed(rank, steps, seed):
    """Entropy of the simple random walk as speed * ln(2r - 1), by simulation."""
    rng = np.random.default_rng(seed)
    letters = np.array([s * i for i in range(1, rank + 1) for s in (1, -1)])
    draws = letters[rng.integers(0, 2 * rank, size=steps)]
    stack = []
    for x in draws.tolist():
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    speed = len(stack) / steps
    return speed * math.log(2 * rank - 1)


def hitting_frequencies(step_probs, rank, depth, walks, length, seed):
    """Empirical distribution of the first ``depth`` letters of a long walk."""
    rng = np.random.default_rng(seed)
    letters = list(step_probs)
    p = np.array([step_probs[x] for x in letters])
    counts = {}
    idx = rng.choice(len(letters), size=(walks, length), p=p)
    for row in idx:
        stack = []
        for j in row.tolist():
            x = letters[j]
            if stack and stack[-1] == -x:
                stack.pop()
            else:
                stack.append(x)
        key = tuple(stack[:depth])
        counts[key] = counts.get(key, 0) + 1
    return {k: v / walks for k, v in counts.items()}


def stationary_by_eigen(perms, probs, size):
    """Null space of P - I for the averaged permutation matrix P."""
    from scipy.linalg import null_space

    P = np.zeros((size, size))
    for (idx, sign), p in probs.items():
        perm = np.asarray(perms.get(idx, np.arange(size)))
        if sign < 0:
            perm = np.argsort(perm)
        Q = np.zeros((size, size))
        Q[perm, np.arange(size)] = 1.0
        P += p * Q
    return null_space(P - np.eye(size))


def all_labelings(k, n):
    return np.array(list(itertools.product(range(n), repeat=k)), dtype=np.int64).reshape(-1, k)
