"""Partition matching, two-sided statistics, and the constructive two-sided matching.

The two-sided construction: given a partition A_1..A_n of a's cells and a
finite F containing the identity, form the family A_{i,j} = g_j A_i (with
A_0 = X), match its one-sided statistics inside b to some discrepancy d, and
take B_i = B_{i,0}.  The sets then satisfy

    |mu(g A_i ∩ h A_j) - mu(g B_i ∩ h B_j)| <= 7 d    for all g, h in F.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .action import CellAction
from .errors import MalformedInputError, ResolutionError
from .geometry import (
    OrderedPartition,
    StatsPoint,
    _labels_from_index,
    points_for_labels,
    stats_point,
    word_matrices,
)
from .words import GroupWord

EXACT_TOL = 1e-12
ANNEAL_RESTARTS = 8
ANNEAL_COOLING = 0.95
ANNEAL_LEVELS = 150
DEFAULT_MATCH_BUDGET = 10**4
_CHUNK = 4096


def _exhaustive(mats: np.ndarray, target: np.ndarray, k: int, n: int):
    best, best_idx = np.inf, -1
    total = n ** k
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        pts = points_for_labels(mats, _labels_from_index(idx, k, n), n)
        disc = np.abs(pts - target[None]).reshape(len(idx), -1).max(axis=1)
        j = int(np.argmin(disc))
        if disc[j] < best:
            best, best_idx = float(disc[j]), int(idx[j])
    return _labels_from_index(np.array([best_idx]), k, n)[0], best


def _anneal(mats: np.ndarray, target: np.ndarray, k: int, n: int, budget: int, seed: int):
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    per_restart = max(1, budget // ANNEAL_RESTARTS)
    per_level = max(1, per_restart // ANNEAL_LEVELS)

    def score(labels):
        oh = eye[labels]
        return float(np.abs(oh.T @ mats @ oh - target).max())

    best_labels, best = None, np.inf
    for _ in range(ANNEAL_RESTARTS):
        labels = rng.integers(0, n, size=k)
        cur = score(labels)
        temp = max(cur, 1e-3) * 0.1
        cells = rng.integers(0, k, size=per_restart)
        shifts = rng.integers(1, max(n, 2), size=per_restart)
        coins = rng.random(per_restart)
        if cur < best:
            best, best_labels = cur, labels.copy()
        for step in range(per_restart):
            if n == 1:
                break
            c = cells[step]
            old = labels[c]
            labels[c] = (old + shifts[step]) % n
            new = score(labels)
            if new <= cur or coins[step] < np.exp(-(new - cur) / temp):
                cur = new
                if cur < best:
                    best, best_labels = cur, labels.copy()
            else:
                labels[c] = old
            if (step + 1) % per_level == 0:
                temp *= ANNEAL_COOLING
            if best == 0.0:
                break
    return best_labels, best


def match_partition(b: CellAction, target: StatsPoint, words: Sequence[GroupWord],
                    budget: int = DEFAULT_MATCH_BUDGET, seed: int = 0,
                    method: str = "auto") -> tuple[OrderedPartition, float]:
    """Partition of b's cells whose statistics are closest (l-inf) to ``target``.

    ``method="auto"`` searches exhaustively when n^K fits in ``budget`` and
    otherwise runs seeded multi-start simulated annealing (single-cell
    relabeling moves, geometric cooling) with ``budget`` evaluations.
    """
    m, n = target.dims
    if m != len(words):
        raise MalformedInputError(f"target has {m} words, got {len(words)}")
    if method not in ("auto", "exhaustive", "anneal"):
        raise MalformedInputError(f"unknown method {method!r}")
    mats = word_matrices(b, words)
    k = b.n_cells
    if method == "exhaustive" or (method == "auto" and n ** k <= budget):
        labels, disc = _exhaustive(mats, target.values, k, n)
    else:
        labels, disc = _anneal(mats, target.values, k, n, budget, seed)
    return OrderedPartition.from_labels(b, labels, n), disc


def _coverage(action: CellAction, words: Sequence[GroupWord], part: OrderedPartition) -> np.ndarray:
    """cov[g, i, z] = fraction of cell z covered by g A_i."""
    mats = word_matrices(action, words)
    onehot = np.eye(part.n)[part.labels(action)]  # (K, n)
    covered = np.einsum("ci,gcz->giz", onehot, mats)
    return covered / action.weights[None, None, :]


def two_sided_stats(action: CellAction, F: Sequence[GroupWord], part: OrderedPartition) -> tuple[np.ndarray, bool]:
    """S[g, h, i, j] = mu(g A_i ∩ h A_j) and whether it is exact at cell resolution.

    Inside a cell the overlap of g A_i and h A_j is known exactly when either
    set covers the cell fully or misses it; otherwise the two are treated as
    independent within the cell and the result is flagged inexact.
    """
    cov = _coverage(action, F, part)
    w = action.weights
    full = (np.abs(cov) <= EXACT_TOL) | (np.abs(cov - 1) <= EXACT_TOL)
    S = np.einsum("giz,hjz,z->ghij", cov, cov, w)
    exact = True
    for a_ in range(len(F)):
        for b_ in range(len(F)):
            if F[a_] == F[b_]:
                # g A_i and g A_j are disjoint images of disjoint sets
                masses = np.einsum("iz,z->i", cov[a_], w)
                S[a_, b_] = np.diag(masses)
                continue
            either = full[a_][:, None, :] | full[b_][None, :, :]
            if not either.all():
                exact = False
    return S, exact


def two_sided_discrepancy(a: CellAction, b: CellAction, F: Sequence[GroupWord],
                          partA: OrderedPartition, partB: OrderedPartition) -> float:
    """max over g, h in F and i, j of |mu(g^a A_i ∩ h^a A_j) - mu(g^b B_i ∩ h^b B_j)|."""
    if partA.n != partB.n:
        raise MalformedInputError("partitions have different piece counts")
    Sa, _ = two_sided_stats(a, F, partA)
    Sb, _ = two_sided_stats(b, F, partB)
    return float(np.abs(Sa - Sb).max())


@dataclass
class Prop2Result:
    partition: OrderedPartition
    two_sided: float
    delta: float
    certified: bool
    certificate: dict = field(default_factory=dict)


def _family(a: CellAction, F: list[GroupWord], partA: OrderedPartition):
    cov = _coverage(a, F, partA)
    bad = np.argwhere((np.abs(cov) > EXACT_TOL) & (np.abs(cov - 1) > EXACT_TOL))
    if len(bad):
        g, i, z = bad[0]
        raise ResolutionError(
            f"{F[g]} applied to piece {i + 1} is not a union of cells (covers {cov[g, i, z]:.6g} of cell {a.cell_ids[z]!r})")
    k = a.n_cells
    members = [np.ones(k, dtype=bool)]  # A_{0,0} = X
    for j in range(1, len(F)):
        members.append(np.ones(k, dtype=bool))  # A_{0,j} = g_j X = X
    for i in range(partA.n):
        for j in range(len(F)):
            members.append(cov[j, i] > 0.5)
    return np.array(members)


def prop2_construct(a: CellAction, b: CellAction, F: Sequence[GroupWord], partA: OrderedPartition,
                    epsilon: float, budget: int = 10**6, seed: int = 0) -> Prop2Result:
    """Build B_1..B_n in b matching A_1..A_n two-sidedly over F.

    Requires ``g A_i`` to be a union of a's cells for every g in F (raises
    :class:`ResolutionError` otherwise).  The result is certified when the
    achieved one-sided discrepancy d of the enlarged family is below
    ``epsilon / 7`` and the two-sided discrepancy is at most ``7 d``.
    """
    if epsilon <= 0:
        raise MalformedInputError("epsilon must be positive")
    words = list(dict.fromkeys(F))
    ident = [w for w in words if w.is_identity]
    if not ident:
        raise MalformedInputError("F must contain the identity")
    words = ident + [w for w in words if not w.is_identity]

    members = _family(a, words, partA)
    # atoms of the Boolean algebra generated by the family, in order of first cell
    signature = {}
    atom_labels = []
    for z in range(a.n_cells):
        key = members[:, z].tobytes()
        atom_labels.append(signature.setdefault(key, len(signature)))
    atoms = OrderedPartition.from_labels(a, atom_labels, len(signature))
    n_atoms = atoms.n
    in_set = np.zeros((len(members), n_atoms))
    for z, s in enumerate(atom_labels):
        in_set[:, s] = members[:, z]

    target = stats_point(a, words, atoms)
    partQ, atom_disc = match_partition(b, target, words, budget=budget, seed=seed)
    got = stats_point(b, words, partQ)

    def family_stats(values):
        # mu(S ∩ g S') = sum over atoms t in S, s in S' of mu(g P_s ∩ P_t)
        return np.einsum("Sx,gxy,Ty->gST", in_set, values, in_set)

    d = float(np.abs(family_stats(target.values) - family_stats(got.values)).max())

    q_labels = partQ.labels(b)
    # B_i = B_{i,0}: atoms inside A_i, pulled over to b through the matched pieces
    piece_of_atom = np.full(n_atoms, -1)
    a_labels = partA.labels(a)
    for z, s in enumerate(atom_labels):
        piece_of_atom[s] = a_labels[z]
    labels_b = piece_of_atom[q_labels]
    partB = OrderedPartition.from_labels(b, labels_b, partA.n)

    Sa, exact_a = two_sided_stats(a, words, partA)
    Sb, exact_b = two_sided_stats(b, words, partB)
    two = float(np.abs(Sa - Sb).max())
    holds = two <= 7 * d + 1e-12
    certified = bool(d < epsilon / 7 and holds and exact_a and exact_b)
    certificate = {
        "epsilon": epsilon,
        "delta": d,
        "bound": 7 * d,
        "two_sided": two,
        "bound_holds": holds,
        "atom_discrepancy": atom_disc,
        "atoms": n_atoms,
        "family_size": len(members),
        "exact": exact_a and exact_b,
        "words": [str(w) for w in words],
    }
    return Prop2Result(partB, two, d, certified, certificate)
