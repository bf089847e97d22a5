"""Bond graph under the axial periodic metric, configurational energy, gradient.

Bonds are pairs at modulo-L distance strictly below 1.1; triples share a
vertex.  Sums run over unordered bonds and unordered angles: each bond
contributes one pair term and each angle one triple term, which matches the
closed-form family energy below.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateGeometryError
from .geometry import Nanotube, ZigzagGeometry
from .potentials import PotentialSet

E1 = np.array([1.0, 0.0, 0.0])


def periodic_distance(x, y, L: float):
    """Distance modulo L along the first axis: min over t in {-1,0,+1} of |x-y+L*t*e1|.

    Returns (distance, t); ties resolve to t = 0.
    """
    if L <= 0:
        raise ValueError("period L must be positive")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    best_t = 0
    best = np.inf
    for t in (0, -1, 1):
        dist = float(np.linalg.norm(d + L * t * E1))
        if dist < best:
            best, best_t = dist, t
    return best, best_t


@dataclass
class BondGraph:
    """Unordered bonds plus derived angle triples of one n-cell.

    pairs[p] = (i, j) with i < j; pair_shifts[p] = t minimizing
    |x[i] - x[j] + t*L*e1|.  triples[q] = (i, j, k) with vertex j and i < k;
    the per-leg shifts give the minimal images of x[i], x[k] seen from x[j].
    """

    n: int
    L: float
    pairs: np.ndarray
    pair_shifts: np.ndarray
    triples: np.ndarray
    triple_shifts: np.ndarray
    adjacency: list

    @property
    def n_bonds(self) -> int:
        return len(self.pairs)

    @property
    def n_angles(self) -> int:
        return len(self.triples)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for a, b in self.pairs:
            deg[a] += 1
            deg[b] += 1
        return deg

    def pair_set(self) -> set:
        return {(int(a), int(b)) for a, b in self.pairs}


def _pairs_brute(pos: np.ndarray, L: float, cutoff: float):
    """O(n^2) reference pair search under the modulo-L metric."""
    d = pos[:, None, :] - pos[None, :, :]
    dx = d[..., 0]
    cand = np.stack([dx, dx - L, dx + L])
    k = np.argmin(np.abs(cand), axis=0)
    shifts = np.array([0, -1, 1])[k]
    dxw = np.take_along_axis(cand, k[None], axis=0)[0]
    dist = np.sqrt(dxw**2 + d[..., 1] ** 2 + d[..., 2] ** 2)
    ii, jj = np.where(np.triu(dist < cutoff, k=1))
    return ii, jj, shifts[ii, jj], dist


def _pairs_grid(pos: np.ndarray, L: float, cutoff: float):
    """Uniform spatial hash with cell size >= cutoff; periodic in the axial bin."""
    n = pos.shape[0]
    nx = max(1, int(np.floor(L / cutoff)))
    hx = L / nx
    cy = np.floor(pos[:, 1] / cutoff).astype(int)
    cz = np.floor(pos[:, 2] / cutoff).astype(int)
    cx = np.minimum((pos[:, 0] / hx).astype(int), nx - 1)
    buckets: dict = {}
    for idx in range(n):
        buckets.setdefault((cx[idx], cy[idx], cz[idx]), []).append(idx)
    out_i, out_j, out_t = [], [], []
    seen_offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)]
    for (bx, by, bz), members in buckets.items():
        neigh = []
        for dx, dy, dz in seen_offsets:
            key = ((bx + dx) % nx, by + dy, bz + dz)
            neigh.extend(buckets.get(key, []))
        neigh = np.array(sorted(set(neigh)), dtype=int)
        for a in members:
            cand = neigh[neigh > a]
            if len(cand) == 0:
                continue
            d = pos[a] - pos[cand]
            dx0 = d[:, 0]
            stack = np.stack([dx0, dx0 - L, dx0 + L])
            kk = np.argmin(np.abs(stack), axis=0)
            dxw = np.take_along_axis(stack, kk[None], axis=0)[0]
            dist = np.sqrt(dxw**2 + d[:, 1] ** 2 + d[:, 2] ** 2)
            hit = dist < cutoff
            for b, t in zip(cand[hit], np.array([0, -1, 1])[kk[hit]]):
                out_i.append(a)
                out_j.append(int(b))
                out_t.append(int(t))
    order = np.lexsort((out_j, out_i)) if out_i else np.array([], dtype=int)
    return (
        np.array(out_i, dtype=int)[order],
        np.array(out_j, dtype=int)[order],
        np.array(out_t, dtype=int)[order],
    )


def bond_graph(tube: Nanotube, cutoff: float = 1.1, method: str = "grid") -> BondGraph:
    """Build the bond graph of one n-cell (strict inequality at the cutoff)."""
    pos = tube.positions
    n = pos.shape[0]
    L = tube.period
    if method == "grid" and n > 1:
        ii, jj, tt = _pairs_grid(pos, L, cutoff)
    else:
        ii, jj, tt, _ = _pairs_brute(pos, L, cutoff)
    pairs = np.stack([ii, jj], axis=1) if len(ii) else np.zeros((0, 2), dtype=int)
    shifts = np.asarray(tt, dtype=int)

    # pair_shifts[p] minimizes |pos[a] - pos[b] + t*L*e1|, i.e. the leg a-as-seen-from-b;
    # the leg from a toward b therefore uses -t.
    adjacency = [[] for _ in range(n)]
    for (a, b), t in zip(pairs, shifts):
        adjacency[a].append((int(b), -int(t)))
        adjacency[b].append((int(a), int(t)))

    trip, tsh = [], []
    for j in range(n):
        nbrs = sorted(adjacency[j])
        for (a, ta), (b, tb) in combinations(nbrs, 2):
            trip.append((a, j, b))
            tsh.append((ta, tb))
    triples = np.array(trip, dtype=int) if trip else np.zeros((0, 3), dtype=int)
    triple_shifts = np.array(tsh, dtype=int) if tsh else np.zeros((0, 2), dtype=int)
    return BondGraph(n, L, pairs, shifts, triples, triple_shifts, adjacency)


def bond_angle(xi, xj, xk, L: float = 0.0, shift_i: int = 0, shift_k: int = 0) -> float:
    """Angle at vertex xj formed by the (periodically shifted) legs to xi and xk."""
    u = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float) + L * shift_i * E1
    v = np.asarray(xk, dtype=float) - np.asarray(xj, dtype=float) + L * shift_k * E1
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateGeometryError("zero-length bond leg in angle evaluation")
    c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return float(np.arccos(c))


def _bond_vectors(pos, graph: BondGraph):
    i, j = graph.pairs[:, 0], graph.pairs[:, 1]
    d = pos[i] - pos[j]
    d[:, 0] += graph.L * graph.pair_shifts
    return d


def _leg_vectors(pos, graph: BondGraph):
    t = graph.triples
    u = pos[t[:, 0]] - pos[t[:, 1]]
    v = pos[t[:, 2]] - pos[t[:, 1]]
    u[:, 0] += graph.L * graph.triple_shifts[:, 0]
    v[:, 0] += graph.L * graph.triple_shifts[:, 1]
    return u, v


def total_energy(tube: Nanotube, pots: PotentialSet, graph: BondGraph | None = None) -> float:
    """Pair energy over bonds plus angle energy over triples."""
    if graph is None:
        graph = bond_graph(tube, cutoff=pots.cutoff)
    pos = tube.positions
    e = 0.0
    if graph.n_bonds:
        d = np.linalg.norm(_bond_vectors(pos, graph), axis=1)
        e += float(np.sum(pots.v2.value(d)))
    if graph.n_angles:
        u, v = _leg_vectors(pos, graph)
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        c = np.clip(np.einsum("ij,ij->i", u, v) / (nu * nv), -1.0, 1.0)
        e += float(np.sum(pots.v3.value(np.arccos(c))))
    return e


def family_energy(geom: ZigzagGeometry, m: int, pots: PotentialSet) -> float:
    """Closed form for a family member: (n/2)(v2(l1)+2 v2(l2)) + n(2 v3(a)+v3(b))."""
    n = 4 * m * geom.ell
    pair = 0.5 * n * (pots.v2.value(geom.lambda1) + 2.0 * pots.v2.value(geom.lambda2))
    angle = n * (2.0 * pots.v3.value(geom.alpha) + pots.v3.value(geom.beta))
    return float(pair + angle)


def gradient(tube: Nanotube, pots: PotentialSet, graph: BondGraph | None = None) -> np.ndarray:
    """Analytic gradient of total_energy with respect to all positions at fixed L."""
    if graph is None:
        graph = bond_graph(tube, cutoff=pots.cutoff)
    pos = tube.positions
    grad = np.zeros_like(pos)
    if graph.n_bonds:
        d = _bond_vectors(pos, graph)
        r = np.linalg.norm(d, axis=1)
        if np.any(r == 0.0):
            raise DegenerateGeometryError("zero-length bond")
        coef = (pots.v2.deriv(r) / r)[:, None] * d
        np.add.at(grad, graph.pairs[:, 0], coef)
        np.add.at(grad, graph.pairs[:, 1], -coef)
    if graph.n_angles:
        u, v = _leg_vectors(pos, graph)
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        if np.any(nu == 0.0) or np.any(nv == 0.0):
            raise DegenerateGeometryError("zero-length bond leg")
        uh = u / nu[:, None]
        vh = v / nv[:, None]
        c = np.clip(np.einsum("ij,ij->i", uh, vh), -1.0, 1.0)
        s = np.sqrt(np.maximum(1.0 - c**2, 1e-30))
        w = pots.v3.deriv(np.arccos(c)) / s
        # d(theta)/d(leg): -(vh - c*uh)/(|u|) etc., with the chain sign from arccos
        gi = -w[:, None] * (vh - c[:, None] * uh) / nu[:, None]
        gk = -w[:, None] * (uh - c[:, None] * vh) / nv[:, None]
        t = graph.triples
        np.add.at(grad, t[:, 0], gi)
        np.add.at(grad, t[:, 2], gk)
        np.add.at(grad, t[:, 1], -(gi + gk))
    return grad
