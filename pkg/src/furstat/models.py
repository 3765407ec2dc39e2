"""Constructors for concrete stationary actions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .action import (
    Cell,
    CellAction,
    TransportPiece,
    WordTransport,
    clean_pieces,
    word_transport,
)
from .boundary import boundary_cells, boundary_transport, harmonic_boundary
from .errors import MalformedInputError
from .words import GroupWord, StepDistribution, GENERATOR_NAMES

WEIGHT_TOL = 1e-12


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise MalformedInputError("weights must be a nonempty vector")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise MalformedInputError(f"weights must be positive, got {list(w)}")
    if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
        raise MalformedInputError(f"weights must sum to 1, got {math.fsum(w)!r}")
    return w


def trivial_action(weights: Sequence[float], m: StepDistribution) -> CellAction:
    """Every group element acts as the identity."""
    w = _check_weights(weights)
    cells = [Cell(str(i), float(x)) for i, x in enumerate(w)]
    transports = {
        g: WordTransport(g, tuple(TransportPiece(c.id, c.id, c.weight, c.weight) for c in cells))
        for g in m.support
    }
    return CellAction(cells, m, transports, "bijective",
                      composer=_permutation_composer(cells, {}, m.rank),
                      ergodic=len(cells) == 1, label="trivial")


def _normalize_perms(perms: Mapping, rank: int, size: int | None) -> dict[int, np.ndarray]:
    out: dict[int, np.ndarray] = {}
    for key, perm in perms.items():
        if isinstance(key, str):
            idx = GENERATOR_NAMES.find(key) + 1
        elif isinstance(key, GroupWord):
            if len(key) != 1 or key.letters[0] < 0:
                raise MalformedInputError(f"permutations are keyed by generators, got {key}")
            idx = key.letters[0]
        else:
            idx = int(key)
        if not 1 <= idx <= rank:
            raise MalformedInputError(f"generator {key!r} out of range for rank {rank}")
        arr = np.asarray(perm, dtype=int)
        if size is not None and arr.shape != (size,):
            raise MalformedInputError(f"permutation for {key!r} has arity {arr.size}, expected {size}")
        if sorted(arr.tolist()) != list(range(arr.size)):
            raise MalformedInputError(f"{list(arr)} is not a permutation")
        out[idx] = arr
    return out


def _word_permutation(perms: dict[int, np.ndarray], w: GroupWord, size: int) -> np.ndarray:
    # w = x_1 ... x_k acts as x_1(x_2(... x_k(c)))
    image = np.arange(size)
    for x in reversed(w.letters):
        p = perms.get(abs(x))
        if p is None:
            continue
        if x < 0:
            p = np.argsort(p)
        image = p[image]
    return image


def _permutation_composer(cells: Sequence[Cell], perms: dict[int, np.ndarray], rank: int):
    size = len(cells)

    def compose(w: GroupWord) -> WordTransport:
        image = _word_permutation(perms, w, size)
        return WordTransport(w, tuple(
            TransportPiece(cells[i].id, cells[int(j)].id, cells[i].weight, cells[int(j)].weight)
            for i, j in enumerate(image)
        ))

    return compose


def finite_bijective(perms: Mapping, weights: Sequence[float], m: StepDistribution) -> CellAction:
    """Action by permutations of finitely many atoms.

    ``perms`` maps a generator (1-based index, name, or GroupWord) to a
    permutation of ``range(N)``; generators without an entry act trivially.
    The construction always succeeds; whether the weights are stationary is
    left to :func:`~furstat.action.validate`.
    """
    w = _check_weights(weights)
    p = _normalize_perms(perms, m.rank, w.size)
    cells = [Cell(str(i), float(x)) for i, x in enumerate(w)]
    compose = _permutation_composer(cells, p, m.rank)
    transports = {g: compose(g) for g in m.support}
    orbits = _orbits(p, m, w.size)
    return CellAction(cells, m, transports, "bijective", composer=compose,
                      ergodic=len(orbits) == 1, label="bijective")


def _orbits(perms: dict[int, np.ndarray], m: StepDistribution, size: int) -> list[list[int]]:
    parent = list(range(size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for g in m.support:
        image = _word_permutation(perms, g, size)
        for i, j in enumerate(image):
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(size):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


@dataclass
class SimplexDescription:
    """Extreme points of the stationary weight vectors of a permutation action."""

    extreme_points: list[np.ndarray]
    orbits: list[list[int]]

    @property
    def dimension(self) -> int:
        return len(self.extreme_points) - 1

    def combine(self, coefficients: Sequence[float]) -> np.ndarray:
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (len(self.extreme_points),) or np.any(c < 0) or abs(c.sum() - 1) > WEIGHT_TOL:
            raise MalformedInputError("coefficients must be a probability vector over the extreme points")
        return np.sum([ci * e for ci, e in zip(c, self.extreme_points)], axis=0)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """A random stationary weight vector with full support."""
        return self.combine(rng.dirichlet(np.ones(len(self.extreme_points))))


def stationary_simplex(perms: Mapping, m: StepDistribution, size: int | None = None) -> SimplexDescription:
    """Orbit-uniform extreme points for the group generated by supp(m).

    On finitely many atoms a stationary measure is invariant, so the
    stationary vectors are exactly the mixtures of uniform measures on orbits.
    """
    p = _normalize_perms(perms, m.rank, size)
    if size is None:
        sizes = {arr.size for arr in p.values()}
        if len(sizes) != 1:
            raise MalformedInputError("cannot infer the number of points; pass size")
        size = sizes.pop()
    orbits = _orbits(p, m, size)
    extremes = []
    for orb in orbits:
        e = np.zeros(size)
        e[orb] = 1.0 / len(orb)
        extremes.append(e)
    return SimplexDescription(extremes, orbits)


@dataclass(frozen=True)
class BoundarySpec:
    rank: int = 2
    depth: int = 2
    m: StepDistribution | None = None

    def measure(self) -> StepDistribution:
        return self.m if self.m is not None else StepDistribution.uniform(self.rank)


def boundary_action(spec: BoundarySpec) -> CellAction:
    """Depth-L cylinder model of the free-group boundary with harmonic measure.

    Cells are the reduced words of length L; transports of any word are
    computed on demand by cylinder algebra.  The derivative is constant on
    cells for words of length at most L, and those tables carry ``exact``.
    """
    if spec.depth < 1:
        raise MalformedInputError("depth must be at least 1")
    m = spec.measure()
    if m.rank != spec.rank:
        raise MalformedInputError("step distribution rank does not match the requested rank")
    bd = harmonic_boundary(m)
    cells = boundary_cells(bd, spec.depth)
    cache: dict[GroupWord, WordTransport] = {}

    def compose(w: GroupWord) -> WordTransport:
        tr = cache.get(w)
        if tr is None:
            tr = cache[w] = boundary_transport(bd, w, spec.depth)
        return tr

    transports = {g: compose(g) for g in m.support}
    return CellAction(cells, m, transports, "markov", composer=compose, ergodic=True,
                      label=f"boundary(r={spec.rank},L={spec.depth})")


def _same_measure(m1: StepDistribution, m2: StepDistribution) -> bool:
    d1, d2 = m1.as_dict(), m2.as_dict()
    return m1.rank == m2.rank and d1.keys() == d2.keys() and all(
        abs(d1[k] - d2[k]) <= WEIGHT_TOL for k in d1)


def _combined_kind(*kinds: str) -> str:
    if "opaque" in kinds:
        return "opaque"
    if all(k == "bijective" for k in kinds):
        return "bijective"
    return "markov"


def _scaled(tr: WordTransport, prefix: str, s: float) -> list[TransportPiece]:
    return [TransportPiece(prefix + p.source, prefix + p.target, s * p.source_mass, s * p.image_mass)
            for p in tr.pieces]


def convex_combine(a: CellAction, b: CellAction, t: float) -> CellAction:
    """t a + (1 - t) b as a disjoint union with weights scaled by t and 1 - t."""
    if not 0 < t < 1:
        raise MalformedInputError(f"t must lie strictly between 0 and 1, got {t!r}")
    if not _same_measure(a.m, b.m):
        raise MalformedInputError("convex combination needs the same step distribution")
    cells = [Cell("0:" + c.id, t * c.weight) for c in a.cells]
    cells += [Cell("1:" + c.id, (1 - t) * c.weight) for c in b.cells]

    def combine(w: GroupWord) -> WordTransport:
        ta, tb = word_transport(a, w), word_transport(b, w)
        pieces = clean_pieces(_scaled(ta, "0:", t) + _scaled(tb, "1:", 1 - t))
        return WordTransport(w, pieces, ta.exact and tb.exact)

    stored = {g: combine(g) for g in a.transports if g in b.transports}
    for g in a.m.support:
        stored.setdefault(g, combine(g))
    return CellAction(cells, a.m, stored, _combined_kind(a.kind, b.kind), composer=combine,
                      ergodic=False, label=f"{t:g}*({a.label})+{1 - t:g}*({b.label})")


def stabilize(a: CellAction, trivial_weights: Sequence[float]) -> CellAction:
    """Product a x iota with a trivial action on ``len(trivial_weights)`` atoms."""
    v = _check_weights(trivial_weights)

    def lift(w: GroupWord) -> WordTransport:
        tr = word_transport(a, w)
        pieces = [TransportPiece(f"{p.source}|{j}", f"{p.target}|{j}", p.source_mass * vj, p.image_mass * vj)
                  for j, vj in enumerate(v) for p in tr.pieces]
        return WordTransport(w, clean_pieces(pieces), tr.exact)

    cells = [Cell(f"{c.id}|{j}", c.weight * float(vj)) for c in a.cells for j, vj in enumerate(v)]
    stored = {g: lift(g) for g in a.transports}
    for g in a.m.support:
        stored.setdefault(g, lift(g))
    ergodic = a.ergodic if v.size == 1 else False
    return CellAction(cells, a.m, stored, a.kind, composer=lift, ergodic=ergodic,
                      label=f"({a.label})x iota{v.size}")


def relabel(a: CellAction, rename: Callable[[str], str] | Mapping[str, str], order: Sequence[int] | None = None) -> CellAction:
    """Isomorphic copy with renamed (and optionally reordered) cells."""
    f = rename if callable(rename) else rename.__getitem__
    cells = [Cell(f(c.id), c.weight) for c in a.cells]
    if order is not None:
        cells = [cells[i] for i in order]

    def moved(w: GroupWord) -> WordTransport:
        tr = word_transport(a, w)
        return WordTransport(w, tuple(TransportPiece(f(p.source), f(p.target), p.source_mass, p.image_mass)
                                      for p in tr.pieces), tr.exact)

    stored = {g: moved(g) for g in a.transports}
    return CellAction(cells, a.m, stored, a.kind, composer=moved if a.composer else None,
                      ergodic=a.ergodic, label=a.label)


def _orbits_from_transports(cells: Sequence[Cell], transports: Mapping[GroupWord, WordTransport]) -> list[list[str]]:
    parent = {c.id: c.id for c in cells}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for tr in transports.values():
        for p in tr.pieces:
            if p.source in parent and p.target in parent:
                ri, rj = find(p.source), find(p.target)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[str, list[str]] = {}
    for c in cells:
        groups.setdefault(find(c.id), []).append(c.id)
    return list(groups.values())
