"""Construction of periodic zigzag nanotube configurations.

A tube is the orbit of two points under a screw-rotation group: atoms are
labeled by quadruples (i, j, k, l) with i in 1..ell (position around the
circumference), j in 0..m-1 (translation cell), and k, l in {0, 1}.  The
position map is

    x(i,j,k,l) = ( k*(lambda1+sigma) + j*(2*sigma+2*lambda1) + l*(2*sigma+lambda1),
                   rho*cos(pi*(2i+k)/ell),
                   rho*sin(pi*(2i+k)/ell) )

with the first coordinate wrapped into [0, L), L = m*mu.  Each atom has three
bonded neighbors: one at distance lambda1 along the axis and two at distance
lambda2 in the adjacent ring; the closed-form bond angles are two of amplitude
alpha and one of amplitude beta = 2*arcsin(sin(alpha)*sin(gamma_ell/2)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

LAMBDA1_BOND = "lambda1"
LAMBDA2_BOND = "lambda2"


def gamma(ell: int) -> float:
    """Interior angle of a regular 2*ell-gon, pi*(1 - 1/ell)."""
    if ell <= 3:
        raise InvalidParameterError(f"ell must exceed 3, got {ell}")
    return np.pi * (1.0 - 1.0 / ell)


@dataclass(frozen=True)
class ZigzagGeometry:
    """Closed-form parameter bundle for one member of the zigzag family."""

    ell: int
    mu: float
    lambda1: float
    lambda2: float
    sigma: float
    rho: float
    alpha: float
    beta: float
    gamma_ell: float


@dataclass(frozen=True)
class AtomId:
    """Label (i, j, k, l); i is 1-based around the circumference."""

    i: int
    j: int
    k: int
    l: int


def id_to_index(a: AtomId, ell: int, m: int) -> int:
    i = (a.i - 1) % ell
    j = a.j % m
    return ((j * ell + i) * 2 + a.k) * 2 + a.l


def index_to_id(idx: int, ell: int, m: int) -> AtomId:
    l = idx % 2
    k = (idx // 2) % 2
    i = (idx // 4) % ell + 1
    j = idx // (4 * ell)
    if not (0 <= j < m):
        raise InvalidParameterError(f"flat index {idx} out of range for ell={ell}, m={m}")
    return AtomId(i, j, k, l)


@dataclass
class Nanotube:
    """n-cell of a periodic configuration: n = 4*m*ell positions plus period L."""

    positions: np.ndarray
    period: float
    ell: int
    m: int
    geometry: ZigzagGeometry | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def atom_index(self, a: AtomId) -> int:
        return id_to_index(a, self.ell, self.m)

    def atom_id(self, idx: int) -> AtomId:
        return index_to_id(idx, self.ell, self.m)

    def with_positions(self, positions: np.ndarray) -> "Nanotube":
        return Nanotube(np.array(positions, dtype=float), self.period, self.ell, self.m, self.geometry)


def solve_family(ell: int, mu: float, lambda1: float, lambda2: float) -> ZigzagGeometry:
    """Resolve (ell, mu, lambda1, lambda2) into the full geometric parameter set.

    Raises InvalidParameterError naming the first violated validity gate:
    lambda1, lambda2 in (0.9, 1.1); mu in (2.6, 3.1); sigma > 0.2;
    rho > 0.55/sin(gamma_ell).
    """
    if ell <= 3:
        raise InvalidParameterError(f"ell must exceed 3, got {ell}")
    if not (2.6 < mu < 3.1):
        raise InvalidParameterError(f"mu={mu} outside (2.6, 3.1)")
    if not (0.9 < lambda1 < 1.1):
        raise InvalidParameterError(f"lambda1={lambda1} outside (0.9, 1.1)")
    if not (0.9 < lambda2 < 1.1):
        raise InvalidParameterError(f"lambda2={lambda2} outside (0.9, 1.1)")
    sigma = 0.5 * mu - lambda1
    if sigma <= 0.2:
        raise InvalidParameterError(f"sigma={sigma} must exceed 0.2 (mu/2 - lambda1)")
    if sigma >= lambda2:
        raise InvalidParameterError(f"sigma={sigma} must stay below lambda2={lambda2}")
    g = gamma(ell)
    rho = np.sqrt(lambda2**2 - sigma**2) / (2.0 * np.sin(np.pi / (2.0 * ell)))
    if rho <= 0.55 / np.sin(g):
        raise InvalidParameterError(f"rho={rho} must exceed 0.55/sin(gamma_ell)={0.55 / np.sin(g)}")
    alpha = np.arccos(-sigma / lambda2)
    beta = 2.0 * np.arcsin(np.sin(alpha) * np.sin(0.5 * g))
    return ZigzagGeometry(ell, mu, lambda1, lambda2, sigma, rho, alpha, beta, g)


def build_nanotube(geom: ZigzagGeometry, m: int) -> Nanotube:
    """Materialize the n = 4*m*ell atom positions, wrapped into [0, L) axially."""
    if m < 1:
        raise InvalidParameterError(f"m must be at least 1, got {m}")
    ell = geom.ell
    L = m * geom.mu
    i = np.arange(1, ell + 1)
    j = np.arange(m)
    k = np.arange(2)
    l = np.arange(2)
    jj, ii, kk, ll = np.meshgrid(j, i, k, l, indexing="ij")
    x1 = kk * (geom.lambda1 + geom.sigma) + jj * geom.mu + ll * (2.0 * geom.sigma + geom.lambda1)
    ang = np.pi * (2.0 * ii + kk) / ell
    pos = np.stack(
        [np.mod(x1, L), geom.rho * np.cos(ang), geom.rho * np.sin(ang)],
        axis=-1,
    )
    return Nanotube(pos.reshape(-1, 3), L, ell, m, geom)


# Per-(k,l) neighbor offsets: (di, dj, k', l', bond kind).  Index arithmetic is
# modulo ell in i and modulo m in j (bonds cross the periodic seam).
_NEIGHBOR_TABLE = {
    (0, 0): [(0, -1, 1, 1, LAMBDA2_BOND), (-1, -1, 1, 1, LAMBDA2_BOND), (0, -1, 0, 1, LAMBDA1_BOND)],
    (0, 1): [(0, 0, 1, 0, LAMBDA2_BOND), (-1, 0, 1, 0, LAMBDA2_BOND), (0, 1, 0, 0, LAMBDA1_BOND)],
    (1, 0): [(0, 0, 0, 1, LAMBDA2_BOND), (1, 0, 0, 1, LAMBDA2_BOND), (0, -1, 1, 1, LAMBDA1_BOND)],
    (1, 1): [(0, 1, 0, 0, LAMBDA2_BOND), (1, 1, 0, 0, LAMBDA2_BOND), (0, 1, 1, 0, LAMBDA1_BOND)],
}


def expected_neighbors(a: AtomId, ell: int, m: int) -> list[tuple[AtomId, str]]:
    """The three combinatorial neighbors of an atom and their bond kinds."""
    out = []
    for di, dj, nk, nl, kind in _NEIGHBOR_TABLE[(a.k, a.l)]:
        ni = (a.i - 1 + di) % ell + 1
        nj = (a.j + dj) % m
        out.append((AtomId(ni, nj, nk, nl), kind))
    return out
