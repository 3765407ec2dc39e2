"""Partition statistics, statistics clouds, Hausdorff distances and the metric delta.

For words g_1..g_m and an ordered partition A_1..A_n, the statistics point is
the array ``values[k, i, j] = mu(g_k A_i ∩ A_j)`` in [0,1]^(m x n x n).  The
cloud C_{m,n} collects the points of all partitions into n (possibly empty)
pieces.  Distances between points are l-infinity, so every Hausdorff distance
is at most 1 and

    delta(a, b) = sum_{m,n >= 1} 2^-(m+n) d_H(C_{m,n}(a), C_{m,n}(b))

truncated at (M, N) misses at most 1 - (1 - 2^-M)(1 - 2^-N).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .action import CellAction, transport_matrix
from .errors import BudgetError, MalformedInputError
from .words import GroupWord, enumerate_words

DEDUP_TOL = 1e-12
DEFAULT_BUDGET = 10**6
DEFAULT_TRUNCATION = 6
MODES = ("exact", "sampled")
_CHUNK = 4096
_PAIR_BLOCK = 2_000_000  # float64 entries per distance block


@dataclass(frozen=True)
class OrderedPartition:
    """Assignment of every cell to a label in 1..n (pieces may be empty)."""

    assignment: Mapping[str, int]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise MalformedInputError("a partition needs n >= 1")
        for cid, lab in self.assignment.items():
            if not 1 <= lab <= self.n:
                raise MalformedInputError(f"cell {cid!r} has label {lab}, outside 1..{self.n}")

    @classmethod
    def from_labels(cls, action: CellAction, labels: Sequence[int], n: int | None = None,
                    one_based: bool = False) -> "OrderedPartition":
        labs = [int(x) + (0 if one_based else 1) for x in labels]
        if len(labs) != action.n_cells:
            raise MalformedInputError(f"{len(labs)} labels for {action.n_cells} cells")
        n = max(labs) if n is None else n
        return cls(dict(zip(action.cell_ids, labs)), n)

    @classmethod
    def from_blocks(cls, action: CellAction, blocks: Sequence[Sequence[str]]) -> "OrderedPartition":
        assignment = {}
        for i, block in enumerate(blocks, start=1):
            for cid in block:
                if cid in assignment:
                    raise MalformedInputError(f"cell {cid!r} appears in two pieces")
                assignment[cid] = i
        return cls(assignment, len(blocks))

    def labels(self, action: CellAction) -> np.ndarray:
        """0-based labels in the action's cell order."""
        try:
            return np.array([self.assignment[c] - 1 for c in action.cell_ids], dtype=np.int64)
        except KeyError as exc:
            raise MalformedInputError(f"partition does not assign cell {exc.args[0]!r}") from None

    def blocks(self, action: CellAction) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.n)]
        for cid in action.cell_ids:
            out[self.assignment[cid] - 1].append(cid)
        return out


@dataclass(frozen=True)
class StatsPoint:
    values: np.ndarray  # shape (m, n, n)

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    def distance(self, other: "StatsPoint") -> float:
        if self.values.shape != other.values.shape:
            raise MalformedInputError(f"dimension mismatch {self.dims} vs {other.dims}")
        return float(np.max(np.abs(self.values - other.values)))


def word_matrices(action: CellAction, words: Sequence[GroupWord]) -> np.ndarray:
    """Stacked transport matrices, shape (m, K, K)."""
    return np.stack([transport_matrix(action, w) for w in words])


def points_for_labels(mats: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    """Statistics points of many labelings at once: (N, K) -> (N, m, n, n)."""
    onehot = np.eye(n)[labels]
    tmp = np.einsum("kcd,pdj->pkcj", mats, onehot)
    return np.einsum("pci,pkcj->pkij", onehot, tmp)


def stats_point(action: CellAction, words: Sequence[GroupWord], part: OrderedPartition) -> StatsPoint:
    """values[k, i, j] = mu(g_k A_i ∩ A_j)."""
    mats = word_matrices(action, words)
    return StatsPoint(points_for_labels(mats, part.labels(action)[None, :], part.n)[0])


@dataclass
class StatsCloud:
    """Finite approximation of C_{m,n}.

    ``canonical`` marks points reached by a labeling in restricted-growth form
    (first cell labelled 1, each new label the next unused one).  It is only
    set for exact clouds, which are invariant under relabeling the pieces.
    """

    points: np.ndarray  # (P, m, n, n)
    mode: str
    seed: int | None = None
    budget: int | None = None
    canonical: np.ndarray | None = None

    @property
    def dims(self) -> tuple[int, int]:
        return self.points.shape[1], self.points.shape[2]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.points.reshape(len(self), -1)

    @property
    def symmetric(self) -> bool:
        return self.mode == "exact" and self.canonical is not None

    def prefix(self, m: int) -> "StatsCloud":
        """Cloud of the first ``m`` words (projection, deduplicated)."""
        pts, canon = _dedup(self.points[:, :m], self.canonical)
        return StatsCloud(pts, self.mode, self.seed, self.budget, canon)

    def to_csv(self) -> str:
        m, n = self.dims
        buf = io.StringIO()
        buf.write(f"# dims={m}x{n}x{n} mode={self.mode} seed={self.seed} budget={self.budget} points={len(self)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"v_{k}_{i}_{j}" for k in range(1, m + 1) for i in range(1, n + 1) for j in range(1, n + 1)])
        for row in self.flat:
            w.writerow([format(float(x), ".17g") for x in row])
        return buf.getvalue()


_HASH_MULT = np.random.default_rng(12345).integers(1, 2**62, size=4096, dtype=np.int64).astype(np.uint64)


def _unique_rows(key: np.ndarray):
    """np.unique(key, axis=0) via a row hash, verified; falls back on collision."""
    width = key.shape[1]
    mult = _HASH_MULT[np.arange(width) % _HASH_MULT.size]
    with np.errstate(over="ignore"):
        h = (key.astype(np.uint64) * mult).sum(axis=1)
    _, first, inverse = np.unique(h, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    if not np.array_equal(key[first][inverse], key):
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
    # order by the rows themselves so the result does not depend on the hash
    order = np.lexsort(key[first].T[::-1])
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return first[order], rank[inverse]


def _dedup(points: np.ndarray, canonical: np.ndarray | None):
    if len(points) == 0:
        return points, canonical
    flat = points.reshape(len(points), -1)
    key = np.rint(flat / DEDUP_TOL).astype(np.int64)
    first, inverse = _unique_rows(key)
    out = points[first]
    canon = None
    if canonical is not None:
        canon = np.zeros(len(first), dtype=bool)
        np.logical_or.at(canon, inverse, canonical)
    return out, canon


def _labels_from_index(idx: np.ndarray, k: int, n: int) -> np.ndarray:
    labels = np.empty((idx.size, k), dtype=np.int64)
    rest = idx.copy()
    for c in range(k):
        labels[:, c] = rest % n
        rest //= n
    return labels


def _restricted_growth(labels: np.ndarray) -> np.ndarray:
    if labels.shape[1] == 0:
        return np.ones(len(labels), dtype=bool)
    ok = labels[:, 0] == 0
    running = labels[:, 0].copy()
    for c in range(1, labels.shape[1]):
        ok &= labels[:, c] <= running + 1
        running = np.maximum(running, labels[:, c])
    return ok


def _map_chunks(fn, ranges, n_jobs: int):
    if n_jobs <= 1 or len(ranges) <= 1:
        return [fn(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, ranges))


def cloud(action: CellAction, words: Sequence[GroupWord], n: int, mode: str = "exact",
          budget: int = DEFAULT_BUDGET, seed: int = 0, n_jobs: int = 1,
          greedy_passes: int = 2) -> StatsCloud:
    """Statistics cloud of ``action`` for the given words and piece count.

    ``exact`` enumerates all n^K labelings and refuses (``BudgetError``) when
    that exceeds ``budget``.  ``sampled`` draws ``budget`` random labelings
    from ``seed`` and then runs greedy single-cell relabeling passes that add
    the candidate farthest from the points found so far.  Every sampled point
    comes from an actual labeling, so a sampled cloud is a subset of the exact
    one.
    """
    if mode not in MODES:
        raise MalformedInputError(f"mode must be one of {MODES}, got {mode!r}")
    if n < 1 or budget < 1:
        raise MalformedInputError("n and budget must be positive")
    k = action.n_cells
    if mode == "exact" and n ** k > budget:
        raise BudgetError(f"exact cloud needs {n}^{k} = {n ** k} labelings, budget is {budget}")
    # clouds are pure functions of the action and these arguments
    key = (tuple(words), n, mode) + ((budget, seed, greedy_passes) if mode == "sampled" else ())
    cached = action._cloud_cache.get(key)
    if cached is None:
        cached = action._cloud_cache[key] = _build_cloud(action, words, n, mode, budget, seed, n_jobs, greedy_passes)
    return StatsCloud(cached.points, cached.mode, seed, budget, cached.canonical)


def _build_cloud(action, words, n, mode, budget, seed, n_jobs, greedy_passes) -> StatsCloud:
    k = action.n_cells
    mats = word_matrices(action, words)
    if mode == "exact":
        total = n ** k
        ranges = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]

        def work(r):
            labels = _labels_from_index(np.arange(r[0], r[1], dtype=np.int64), k, n)
            return points_for_labels(mats, labels, n), _restricted_growth(labels)

        parts = _map_chunks(work, ranges, n_jobs)
        pts = np.concatenate([p for p, _ in parts])
        canon = np.concatenate([c for _, c in parts])
        pts, canon = _dedup(pts, canon)
        return StatsCloud(pts, "exact", seed, budget, canon)

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n, size=(budget, k))
    pts = np.concatenate([points_for_labels(mats, labels[lo:lo + _CHUNK], n)
                          for lo in range(0, budget, _CHUNK)])
    pts, _ = _dedup(pts, None)
    if n > 1:
        pts = _greedy_cover(mats, labels, pts, n, rng, greedy_passes)
    return StatsCloud(pts, "sampled", seed, budget, None)


def _greedy_cover(mats, labels, pts, n, rng, passes, starts=32):
    k = labels.shape[1]
    cur = pts
    for _ in range(passes):
        picks = rng.choice(len(labels), size=min(starts, len(labels)), replace=False)
        added = []
        for row in labels[np.sort(picks)]:
            cands = np.repeat(row[None, :], k * (n - 1), axis=0)
            t = 0
            for c in range(k):
                for shift in range(1, n):
                    cands[t, c] = (row[c] + shift) % n
                    t += 1
            cand_pts = points_for_labels(mats, cands, n)
            dist = _min_dist(cand_pts.reshape(len(cand_pts), -1), cur.reshape(len(cur), -1))
            best = int(np.argmax(dist))
            if dist[best] > DEDUP_TOL:
                added.append(cand_pts[best])
                cur = np.concatenate([cur, cand_pts[best][None]])
        if not added:
            break
    out, _ = _dedup(cur, None)
    return out


def _min_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """For each row of A, the l-inf distance to the nearest row of B."""
    out = np.empty(len(A))
    step = max(1, _PAIR_BLOCK // max(1, B.size))
    for lo in range(0, len(A), step):
        blk = A[lo:lo + step]
        out[lo:lo + step] = np.abs(blk[:, None, :] - B[None, :, :]).max(axis=2).min(axis=1)
    return out


@njit(cache=True)
def _directed_linf(src: np.ndarray, dst: np.ndarray, width: int) -> float:
    # early-exit scan: abandon a candidate once it exceeds the running minimum,
    # and a source point once its minimum cannot raise the running maximum
    cmax = 0.0
    for i in range(src.shape[0]):
        cmin = np.inf
        for j in range(dst.shape[0]):
            d = 0.0
            for k in range(width):
                v = abs(src[i, k] - dst[j, k])
                if v > d:
                    d = v
                    if d >= cmin:
                        break
            if d < cmin:
                cmin = d
                if cmin <= cmax:
                    break
        if cmin > cmax:
            cmax = cmin
    return cmax


def _directed_profile(A: StatsCloud, B: StatsCloud, n_jobs: int = 1) -> np.ndarray:
    """Directed Hausdorff distance from A to B for every word prefix m = 1..M.

    When both clouds are exact they are invariant under relabeling pieces, and
    the l-inf norm is too, so the outer max only needs canonical points of A.
    """
    src = A.points[A.canonical] if (A.symmetric and B.symmetric) else A.points
    M, n = A.points.shape[1], A.points.shape[2]
    if len(src) == 0 or len(B) == 0:
        return np.zeros(M)
    # a fixed shuffle makes the early exits effective; the result is order-free
    rng = np.random.default_rng(0)
    S = np.ascontiguousarray(src.reshape(len(src), -1)[rng.permutation(len(src))])
    D = np.ascontiguousarray(B.flat[rng.permutation(len(B))])
    block = n * n

    def work(m):
        return _directed_linf(S, D, m * block)

    prof = np.array(_map_chunks(work, list(range(1, M + 1)), n_jobs))
    # containment is decided at the deduplication tolerance
    prof[prof <= DEDUP_TOL] = 0.0
    return prof


def directed_hausdorff(A: StatsCloud, B: StatsCloud, n_jobs: int = 1) -> float:
    """max over p in A of min over q in B of ||p - q||_inf; zero iff A ⊆ B."""
    if A.dims != B.dims:
        raise MalformedInputError(f"cloud dimension mismatch {A.dims} vs {B.dims}")
    return float(_directed_profile(A, B, n_jobs)[-1])


def hausdorff(A: StatsCloud, B: StatsCloud, n_jobs: int = 1) -> float:
    return max(directed_hausdorff(A, B, n_jobs), directed_hausdorff(B, A, n_jobs))


def tail_bound(M: int, N: int) -> float:
    return 1.0 - (1.0 - 2.0 ** -M) * (1.0 - 2.0 ** -N)


@dataclass
class DeltaReport:
    """Truncated delta (or containment defect) with its truncation tail.

    ``terms[(m, n)]`` holds the unweighted Hausdorff (or directed) distance.
    Terms that could not be computed are listed in ``errors`` and their
    weights accumulate in ``missing_bound``.  With exact clouds on both sides
    the true value lies in ``interval``.
    """

    truncated_value: float
    M: int
    N: int
    tail_bound: float
    terms: dict[tuple[int, int], float] = field(default_factory=dict)
    modes: dict[str, str] = field(default_factory=dict)
    errors: dict[int, str] = field(default_factory=dict)
    missing_bound: float = 0.0
    directed: bool = False
    seed: int = 0
    budget: int = DEFAULT_BUDGET

    @property
    def interval(self) -> tuple[float, float]:
        return self.truncated_value, self.truncated_value + self.tail_bound + self.missing_bound

    @property
    def approximate_sides(self) -> list[str]:
        return [side for side, mode in self.modes.items() if mode != "exact"]

    CSV_FIELDS = ("quantity", "truncated_value", "tail_bound", "missing_bound", "M", "N",
                  "mode_a", "mode_b", "seed", "budget", "errors")

    def csv_row(self) -> list[str]:
        return ["defect" if self.directed else "delta", format(self.truncated_value, ".17g"),
                format(self.tail_bound, ".17g"), format(self.missing_bound, ".17g"),
                str(self.M), str(self.N), self.modes.get("a", ""), self.modes.get("b", ""),
                str(self.seed), str(self.budget), "; ".join(f"n={n}: {e}" for n, e in sorted(self.errors.items()))]

    def summary(self) -> str:
        name = "containment defect" if self.directed else "delta"
        lines = [f"{name} (truncated at M={self.M}, N={self.N}): {self.truncated_value:.12g}",
                 f"tail bound: {self.tail_bound:.6f}"]
        if self.missing_bound:
            lines.append(f"uncomputed terms bound: {self.missing_bound:.6f}")
        if self.approximate_sides:
            lines.append("approximate (sampled) side(s): " + ", ".join(self.approximate_sides))
        lines.append("per-term distances (rows m, columns n):")
        lines.append("m\\n " + " ".join(f"{n:>10d}" for n in range(1, self.N + 1)))
        for m in range(1, self.M + 1):
            cells = []
            for n in range(1, self.N + 1):
                v = self.terms.get((m, n))
                cells.append(f"{v:>10.6f}" if v is not None else f"{'n/a':>10}")
            lines.append(f"{m:>3} " + " ".join(cells))
        for n, e in sorted(self.errors.items()):
            lines.append(f"n={n}: {e}")
        return "\n".join(lines)


def _resolve_modes(mode) -> tuple[str, str]:
    if isinstance(mode, str):
        return mode, mode
    ma, mb = mode
    return ma, mb


def _profiles(a: CellAction, b: CellAction, M: int, N: int, mode, budget: int, seed: int,
              directed: bool, n_jobs: int) -> DeltaReport:
    if a.rank != b.rank:
        raise MalformedInputError("actions must have the same rank")
    if M < 1 or N < 1:
        raise MalformedInputError("truncation bounds must be positive")
    mode_a, mode_b = _resolve_modes(mode)
    words = enumerate_words(a.rank, M)
    report = DeltaReport(0.0, M, N, tail_bound(M, N), modes={"a": mode_a, "b": mode_b},
                         directed=directed, seed=seed, budget=budget)
    terms = []
    for n in range(1, N + 1):
        try:
            ca = cloud(a, words, n, mode_a, budget, seed, n_jobs)
            cb = cloud(b, words, n, mode_b, budget, seed, n_jobs)
        except BudgetError as exc:
            report.errors[n] = str(exc)
            report.missing_bound += sum(2.0 ** -(m + n) for m in range(1, M + 1))
            continue
        prof = _directed_profile(ca, cb, n_jobs)
        if not directed:
            prof = np.maximum(prof, _directed_profile(cb, ca, n_jobs))
        for m in range(1, M + 1):
            d = float(prof[m - 1])
            report.terms[(m, n)] = d
            terms.append(2.0 ** -(m + n) * d)
    report.truncated_value = math.fsum(terms)
    return report


def delta(a: CellAction, b: CellAction, M: int = DEFAULT_TRUNCATION, N: int = DEFAULT_TRUNCATION,
          mode="exact", budget: int = DEFAULT_BUDGET, seed: int = 0, n_jobs: int = 1) -> DeltaReport:
    """Truncated delta(a, b) = sum_{m<=M, n<=N} 2^-(m+n) d_H(C_{m,n}(a), C_{m,n}(b)).

    ``mode`` is "exact", "sampled", or a pair giving the mode for each side.
    Budget failures are recorded per n rather than raised.
    """
    return _profiles(a, b, M, N, mode, budget, seed, False, n_jobs)


def containment_report(a: CellAction, b: CellAction, M: int = DEFAULT_TRUNCATION, N: int = DEFAULT_TRUNCATION,
                       mode="exact", budget: int = DEFAULT_BUDGET, seed: int = 0, n_jobs: int = 1) -> DeltaReport:
    return _profiles(a, b, M, N, mode, budget, seed, True, n_jobs)


def containment_defect(a: CellAction, b: CellAction, M: int = DEFAULT_TRUNCATION, N: int = DEFAULT_TRUNCATION,
                       mode="exact", budget: int = DEFAULT_BUDGET, seed: int = 0, n_jobs: int = 1) -> float:
    """Weighted sum of directed distances C_{m,n}(a) -> C_{m,n}(b); zero iff every computed cloud of a lies in b's."""
    return containment_report(a, b, M, N, mode, budget, seed, n_jobs).truncated_value
