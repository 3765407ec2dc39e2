"""Boundary of a free group with the harmonic measure of a nearest-neighbour walk.

Points of the boundary are infinite reduced words; the cylinder ``[u]`` is the
set of those starting with the reduced word ``u`` (``[()]`` is everything).
For a nearest-neighbour walk with first-passage probabilities ``F(x)`` (the
chance of ever reaching the generator x from the identity) the hitting
distribution is Markovian:

    nu([x_1 ... x_n]) = F(x_1) ... F(x_n) * (1 - F(x_n^-1)) / (1 - F(x_n) F(x_n^-1)).

Words act on the left and images of cylinders are again finite unions of
cylinders, so every mass needed by a cell model is computed exactly.
"""

from __future__ import annotations

import math
from functools import lru_cache

from .action import Cell, TransportPiece, WordTransport, clean_pieces
from .errors import MalformedInputError, SolverError
from .words import GroupWord, StepDistribution, alphabet, letter_key

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAXITER = 100_000
DAMPING = 0.5

Word = tuple[int, ...]


def first_passage(step: dict[int, float], rank: int, *, tol: float = FIXED_POINT_TOL,
                  maxiter: int = FIXED_POINT_MAXITER, damping: float = DAMPING) -> dict[int, float]:
    """Minimal solution of F(x) = p(x) + F(x) * sum_{y != x} p(y) F(y^-1).

    Damped fixed-point iteration from F = 0, which increases monotonically to
    the minimal (probabilistic) solution.  Raises :class:`SolverError` if the
    residual does not drop below ``tol`` within ``maxiter`` sweeps.
    """
    letters = alphabet(rank)
    p = {x: float(step.get(x, 0.0)) for x in letters}
    if all(math.isclose(p[x], 1.0 / (2 * rank), rel_tol=0, abs_tol=1e-15) for x in letters):
        # closed form for the simple random walk
        return {x: 1.0 / (2 * rank - 1) for x in letters}
    F = {x: 0.0 for x in letters}
    residual = math.inf
    for _ in range(maxiter):
        new = {}
        for x in letters:
            s = sum(p[y] * F[-y] for y in letters if y != x)
            new[x] = p[x] + F[x] * s
        residual = max(abs(new[x] - F[x]) for x in letters)
        F = {x: (1 - damping) * F[x] + damping * new[x] for x in letters}
        if residual < tol:
            return F
    raise SolverError(f"first-passage iteration did not converge (residual {residual:.3e})", residual)


class HarmonicBoundary:
    """Cylinder algebra for the boundary of the free group of ``rank``."""

    def __init__(self, rank: int, F: dict[int, float]):
        self.rank = rank
        self.letters = sorted(alphabet(rank), key=letter_key)
        self.F = dict(F)
        for x in self.letters:
            if not 0 < self.F[x] < 1:
                raise MalformedInputError(f"first-passage probability of letter {x} is {self.F[x]!r}")
        self.measure = lru_cache(maxsize=None)(self._measure)

    def _measure(self, u: Word) -> float:
        if not u:
            return 1.0
        out = 1.0
        for x in u:
            out *= self.F[x]
        last = u[-1]
        return out * (1 - self.F[-last]) / (1 - self.F[last] * self.F[-last])

    def image(self, g: Word, u: Word) -> list[Word]:
        """Disjoint cylinders whose union is ``g [u]``."""
        if not u:
            return [()]
        k = 0
        while k < len(g) and k < len(u) and g[len(g) - 1 - k] == -u[k]:
            k += 1
        if k < len(u):
            return [g[:len(g) - k] + u[k:]]
        # u is swallowed whole: g [u] = g'' {points not starting with u[-1]^-1}
        head = g[:len(g) - k]
        out: list[Word] = []
        for s in self.letters:
            if s != -u[-1]:
                out.extend(self.image(head, (s,)))
        return out

    def meet(self, z: Word, cell: Word) -> float:
        """nu([z] ∩ [cell])."""
        if len(z) >= len(cell):
            return self.measure(z) if z[:len(cell)] == cell else 0.0
        return self.measure(cell) if cell[:len(z)] == z else 0.0

    def cells(self, depth: int) -> list[Word]:
        layer: list[Word] = [()]
        for _ in range(depth):
            layer = [w + (x,) for w in layer for x in self.letters if not (w and w[-1] == -x)]
        return layer

    def transport(self, g: Word, depth: int) -> list[tuple[Word, Word, float, float]]:
        """Pieces (c, c', nu(c ∩ g^-1 c'), nu(g c ∩ c')) between depth-L cylinders."""
        ginv = tuple(-x for x in reversed(g))
        image_mass: dict[tuple[Word, Word], float] = {}
        source_mass: dict[tuple[Word, Word], float] = {}
        for c in self.cells(depth):
            for z in self.image(g, c):
                self._spread(z, depth, c, image_mass, forward=True)
            for z in self.image(ginv, c):
                self._spread(z, depth, c, source_mass, forward=False)
        out = []
        for key in sorted(set(image_mass) | set(source_mass)):
            out.append((key[0], key[1], source_mass.get(key, 0.0), image_mass.get(key, 0.0)))
        return out

    def _spread(self, z: Word, depth: int, anchor: Word, acc: dict, *, forward: bool) -> None:
        # distribute nu([z]) over the depth-L cells it meets
        if len(z) >= depth:
            targets = [(z[:depth], self.measure(z))]
        else:
            targets = [(c, self.measure(c)) for c in self._extensions(z, depth)]
        for cell, mass_ in targets:
            key = (anchor, cell) if forward else (cell, anchor)
            acc[key] = acc.get(key, 0.0) + mass_

    def _extensions(self, z: Word, depth: int) -> list[Word]:
        layer = [z]
        for _ in range(depth - len(z)):
            layer = [w + (x,) for w in layer for x in self.letters if not (w and w[-1] == -x)]
        return layer


def word_id(u: Word, rank: int) -> str:
    return str(GroupWord(u, rank))


def harmonic_boundary(m: StepDistribution) -> HarmonicBoundary:
    """Boundary measure nu with sum_g m(g) nu(gA) = nu(A).

    That is the hitting measure of the walk whose steps are the inverses of
    m-distributed words (nu = sum_s m(s^-1) s_* nu).
    """
    if not m.is_nearest_neighbor:
        raise MalformedInputError("boundary models need a nearest-neighbour step distribution")
    if m.rank < 2:
        raise MalformedInputError("boundary models need rank >= 2")
    step = {-w.letters[0]: p for w, p in m.entries}
    missing = [x for x in alphabet(m.rank) if step.get(x, 0.0) <= 0]
    if missing:
        raise MalformedInputError("boundary models need every generator and inverse in supp(m)")
    return HarmonicBoundary(m.rank, first_passage(step, m.rank))


def boundary_cells(bd: HarmonicBoundary, depth: int) -> list[Cell]:
    words = bd.cells(depth)
    weights = [bd.measure(u) for u in words]
    total = math.fsum(weights)
    return [Cell(word_id(u, bd.rank), w / total) for u, w in zip(words, weights)]


def boundary_transport(bd: HarmonicBoundary, g: GroupWord, depth: int) -> WordTransport:
    pieces = clean_pieces(
        TransportPiece(word_id(c, bd.rank), word_id(d, bd.rank), t, w)
        for c, d, t, w in bd.transport(g.letters, depth)
    )
    # derivative is constant on depth-L cylinders once |g| <= L
    return WordTransport(g, pieces, exact=len(g) <= depth)
