"""Eight-atom basic cells: extraction, cell energy, plane angles, and the
reflection symmetrization with its symmetry defect.

Cell atoms are numbered x1..x8: x1, x2 generate the center, x3..x6 close the
hexagon (x3 bonded to x1, x3/x4 on the positive side of the local frame), and
x7, x8 are the axial neighbors of x1, x2.  Every bond approximately parallel
to the axis is shared by four cells and every other bond by two, so the
weighted cell energies sum exactly to the configurational energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidCellError
from .geometry import Nanotube
from .potentials import PotentialSet

BOND_WEIGHTS = np.array([0.25, 0.25, 0.5, 0.5, 0.5, 0.5, 0.25, 0.25])
ANGLE_WEIGHTS = np.array([1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])

# Intra-cell bond endpoints (0-based atom slots): b1, b2 are the two axial
# hexagon bonds, b3..b6 the zigzag hexagon bonds, b7, b8 the outer axial bonds.
BOND_SLOTS = np.array([(2, 3), (4, 5), (0, 2), (3, 1), (1, 4), (5, 0), (0, 6), (1, 7)])
# Angle slots (tip, vertex, tip): phi1, phi2 at the generators between zigzag
# bonds, phi3..phi6 interior hexagon angles, phi7..phi10 against the axial bonds.
ANGLE_SLOTS = np.array(
    [
        (2, 0, 5),
        (3, 1, 4),
        (0, 2, 3),
        (2, 3, 1),
        (1, 4, 5),
        (4, 5, 0),
        (2, 0, 6),
        (5, 0, 6),
        (3, 1, 7),
        (4, 1, 7),
    ]
)

# Reflection S1: swap (x3,x6), (x4,x5) and negate second components.
_S1_PERM = np.array([0, 1, 5, 4, 3, 2, 6, 7])
# Reflection S2: swap (x1,x2), (x3,x4), (x5,x6), (x7,x8) and negate first components.
_S2_PERM = np.array([1, 0, 3, 2, 5, 4, 7, 6])

# Unwrap chain: reconstruct each slot from an already-placed slot over a bond.
_UNWRAP_CHAIN = [(2, 0), (3, 2), (1, 3), (4, 1), (5, 4), (6, 0), (7, 1)]


def reflect_s1(cell: np.ndarray) -> np.ndarray:
    out = cell[..., _S1_PERM, :].copy()
    out[..., 1] *= -1.0
    return out


def reflect_s2(cell: np.ndarray) -> np.ndarray:
    out = cell[..., _S2_PERM, :].copy()
    out[..., 0] *= -1.0
    return out


def _flat_index(ell, m, i, j, k, l):
    return (((j % m) * ell + (i - 1) % ell) * 2 + k) * 2 + l


def cell_atom_indices(ell: int, m: int) -> np.ndarray:
    """Flat atom indices of every cell, shape (ell, m, 2, 8), centers (i,j,k)."""
    i = np.arange(1, ell + 1)[:, None]
    j = np.arange(m)[None, :]
    table = np.empty((ell, m, 2, 8), dtype=int)
    f = lambda ii, jj, kk, ll: _flat_index(ell, m, ii, jj, kk, ll)
    table[:, :, 0, 0] = f(i, j, 0, 0)
    table[:, :, 0, 1] = f(i, j, 0, 1)
    table[:, :, 0, 2] = f(i, j - 1, 1, 1)
    table[:, :, 0, 3] = f(i, j, 1, 0)
    table[:, :, 0, 4] = f(i - 1, j, 1, 0)
    table[:, :, 0, 5] = f(i - 1, j - 1, 1, 1)
    table[:, :, 0, 6] = f(i, j - 1, 0, 1)
    table[:, :, 0, 7] = f(i, j + 1, 0, 0)
    table[:, :, 1, 0] = f(i, j, 1, 0)
    table[:, :, 1, 1] = f(i, j, 1, 1)
    table[:, :, 1, 2] = f(i + 1, j, 0, 1)
    table[:, :, 1, 3] = f(i + 1, j + 1, 0, 0)
    table[:, :, 1, 4] = f(i, j + 1, 0, 0)
    table[:, :, 1, 5] = f(i, j, 0, 1)
    table[:, :, 1, 6] = f(i, j - 1, 1, 1)
    table[:, :, 1, 7] = f(i, j + 1, 1, 0)
    return table


def _min_image(d: np.ndarray, L: float) -> np.ndarray:
    d = np.array(d, dtype=float)
    d[..., 0] -= L * np.round(d[..., 0] / L)
    return d


def gather_cells(tube: Nanotube, table: np.ndarray | None = None) -> np.ndarray:
    """Unwrapped cell coordinates for every center, shape (ell, m, 2, 8, 3).

    Atoms are reconstructed by walking intra-cell bonds with minimal images, so
    no cell straddles the periodic seam.
    """
    if table is None:
        table = cell_atom_indices(tube.ell, tube.m)
    pos = tube.positions
    L = tube.period
    cells = np.empty(table.shape + (3,), dtype=float)
    cells[..., 0, :] = pos[table[..., 0]]
    for slot, anchor in _UNWRAP_CHAIN:
        step = _min_image(pos[table[..., slot]] - cells[..., anchor, :], L)
        cells[..., slot, :] = cells[..., anchor, :] + step
    return cells


def cell_bond_lengths(cells: np.ndarray) -> np.ndarray:
    d = cells[..., BOND_SLOTS[:, 0], :] - cells[..., BOND_SLOTS[:, 1], :]
    return np.linalg.norm(d, axis=-1)


def cell_angles(cells: np.ndarray) -> np.ndarray:
    u = cells[..., ANGLE_SLOTS[:, 0], :] - cells[..., ANGLE_SLOTS[:, 1], :]
    v = cells[..., ANGLE_SLOTS[:, 2], :] - cells[..., ANGLE_SLOTS[:, 1], :]
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise DegenerateGeometryError("zero-length bond leg inside a cell")
    c = np.clip(np.einsum("...ij,...ij->...i", u, v) / (nu * nv), -1.0, 1.0)
    return np.arccos(c)


def cell_energies(cells: np.ndarray, pots: PotentialSet) -> np.ndarray:
    b = cell_bond_lengths(cells)
    phi = cell_angles(cells)
    return np.einsum("...i,i->...", pots.v2.value(b), BOND_WEIGHTS) + np.einsum(
        "...i,i->...", pots.v3.value(phi), ANGLE_WEIGHTS
    )


def cell_energy_gradient(cell: np.ndarray, pots: PotentialSet) -> np.ndarray:
    """Analytic gradient of the weighted cell energy for a single (8,3) cell."""
    grad = np.zeros((8, 3))
    for (a, b), w in zip(BOND_SLOTS, BOND_WEIGHTS):
        d = cell[a] - cell[b]
        r = np.linalg.norm(d)
        if r == 0.0:
            raise DegenerateGeometryError("zero-length cell bond")
        coef = w * float(pots.v2.deriv(r)) / r
        grad[a] += coef * d
        grad[b] -= coef * d
    for (i, j, k), w in zip(ANGLE_SLOTS, ANGLE_WEIGHTS):
        u = cell[i] - cell[j]
        v = cell[k] - cell[j]
        nu = np.linalg.norm(u)
        nv = np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            raise DegenerateGeometryError("zero-length cell bond leg")
        uh, vh = u / nu, v / nv
        c = float(np.clip(np.dot(uh, vh), -1.0, 1.0))
        s = np.sqrt(max(1.0 - c * c, 1e-30))
        coef = -w * float(pots.v3.deriv(np.arccos(c))) / s
        gi = coef * (vh - c * uh) / nu
        gk = coef * (uh - c * vh) / nv
        grad[i] += gi
        grad[k] += gk
        grad[j] -= gi + gk
    return grad


def _plane_angle(n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
    a1 = np.linalg.norm(n1, axis=-1)
    a2 = np.linalg.norm(n2, axis=-1)
    if np.any(a1 < 1e-14) or np.any(a2 < 1e-14):
        raise DegenerateGeometryError("collinear points define no plane")
    c = np.clip(np.einsum("...i,...i->...", n1, n2) / (a1 * a2), -1.0, 1.0)
    t = np.arccos(c)
    return np.maximum(t, np.pi - t)


def plane_angle_theta(x, neighbor1, neighbor2, axial) -> float:
    """Angle between the planes {axial, x, neighbor1} and {axial, x, neighbor2}.

    The axial argument is the bonded neighbor whose bond is approximately
    parallel to the tube axis; the result lies in [pi/2, pi] and equals pi for
    a coplanar junction.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(axial, dtype=float) - x
    n1 = np.cross(np.asarray(neighbor1, dtype=float) - x, a)
    n2 = np.cross(np.asarray(neighbor2, dtype=float) - x, a)
    return float(_plane_angle(n1, n2))


def cell_plane_angles(cells: np.ndarray) -> np.ndarray:
    """(theta_l, theta_r, theta at x2, theta at x1) for every cell, shape (..., 4).

    The first two are the wing angles across the hexagon at the cell center;
    the last two are the triple-junction angles at the generators, i.e. the
    dual-center angles theta_l(z_dual) and theta_r(z_dual_prev).
    """
    x = cells
    x1, x2 = x[..., 0, :], x[..., 1, :]
    n_l1 = np.cross(x[..., 2, :] - x1, x[..., 3, :] - x1)
    n_l2 = np.cross(x[..., 5, :] - x1, x[..., 4, :] - x1)
    theta_l = _plane_angle(n_l1, n_l2)
    n_r1 = np.cross(x[..., 2, :] - x2, x[..., 3, :] - x2)
    n_r2 = np.cross(x[..., 4, :] - x2, x[..., 5, :] - x2)
    theta_r = _plane_angle(n_r1, n_r2)
    a2 = x[..., 7, :] - x2
    theta_x2 = _plane_angle(np.cross(x[..., 3, :] - x2, a2), np.cross(x[..., 4, :] - x2, a2))
    a1 = x[..., 6, :] - x1
    theta_x1 = _plane_angle(np.cross(x[..., 2, :] - x1, a1), np.cross(x[..., 5, :] - x1, a1))
    return np.stack([theta_l, theta_r, theta_x2, theta_x1], axis=-1)


def local_frames(cells: np.ndarray):
    """Origin and rotation of the cell frame: axis through the two dual centers,
    wings bending toward positive third coordinate.  Returns (origins, frames)
    with frames[..., r, :] the r-th frame row."""
    p = 0.5 * (cells[..., 0, :] + cells[..., 6, :])
    q = 0.5 * (cells[..., 1, :] + cells[..., 7, :])
    origin = 0.5 * (p + q)
    e1 = q - p
    n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
    if np.any(n1 < 1e-12):
        raise InvalidCellError("coincident dual centers: no cell axis")
    e1 = e1 / n1
    w = cells[..., 3, :] - cells[..., 4, :]
    e3 = np.cross(e1, w)
    n3 = np.linalg.norm(e3, axis=-1, keepdims=True)
    if np.any(n3 < 1e-12):
        raise InvalidCellError("degenerate cell: x4 - x5 parallel to the axis")
    e3 = e3 / n3
    wing = np.sum(cells[..., 2:6, :], axis=-2) - 2.0 * (cells[..., 0, :] + cells[..., 1, :])
    sign = np.where(np.einsum("...i,...i->...", wing, e3) < 0.0, -1.0, 1.0)
    e3 = e3 * sign[..., None]
    e2 = np.cross(e3, e1)
    frames = np.stack([e1, e2, e3], axis=-2)
    return origin, frames


def to_local(cells: np.ndarray):
    """Express cells in their local frames; shape preserved."""
    origin, frames = local_frames(cells)
    return np.einsum("...rc,...ac->...ar", frames, cells - origin[..., None, :])


def symmetrize(cells_local: np.ndarray):
    """Two-step reflection average in the local frame.

    Returns (x_prime, s_x, delta): the first reflection average, the fully
    symmetrized cell, and the symmetry defect |x-x'|^2 + |x'-S(x)|^2.  The
    fixed reference cancels because both reflections are linear maps fixing it.
    """
    x = cells_local
    x_prime = 0.5 * (x + reflect_s1(x))
    s_x = 0.5 * (x_prime + reflect_s2(x_prime))
    delta = np.sum((x - x_prime) ** 2, axis=(-1, -2)) + np.sum((x_prime - s_x) ** 2, axis=(-1, -2))
    return x_prime, s_x, delta


@dataclass
class CellView:
    """One extracted cell: unwrapped coordinates plus derived quantities."""

    center: tuple
    atom_indices: np.ndarray
    positions: np.ndarray

    def bond_lengths(self) -> np.ndarray:
        return cell_bond_lengths(self.positions)

    def angles(self) -> np.ndarray:
        return cell_angles(self.positions)

    def energy(self, pots: PotentialSet) -> float:
        return float(cell_energies(self.positions, pots))

    def plane_angles(self) -> np.ndarray:
        return cell_plane_angles(self.positions)

    def theta_bar(self) -> float:
        return float(np.mean(self.plane_angles()))

    def dual_center_distance(self) -> float:
        p = 0.5 * (self.positions[0] + self.positions[6])
        q = 0.5 * (self.positions[1] + self.positions[7])
        return float(np.linalg.norm(q - p))

    def local_coordinates(self) -> np.ndarray:
        return to_local(self.positions[None])[0]

    def symmetrize(self, reference: np.ndarray | None = None):
        """Returns (x_prime, s_x, delta) in local coordinates.

        reference is accepted for interface completeness; the reflections fix
        it, so it cancels out of the projection formulas.
        """
        y = self.local_coordinates()
        if reference is not None:
            x_prime = reference + 0.5 * ((y - reference) + reflect_s1(y - reference))
            s_x = reference + 0.5 * ((x_prime - reference) + reflect_s2(x_prime - reference))
            delta = float(np.sum((y - x_prime) ** 2) + np.sum((x_prime - s_x) ** 2))
            return x_prime, s_x, delta
        xp, sx, d = symmetrize(y[None])
        return xp[0], sx[0], float(d[0])


@dataclass
class Centers:
    """Cell centers and dual cell centers, indexed (i-1, j, k)."""

    z: np.ndarray
    z_dual: np.ndarray

    @property
    def count(self) -> int:
        return int(np.prod(self.z.shape[:-1]))


def centers(tube: Nanotube) -> Centers:
    """Midpoints generating the cells; wrapped back into [0, L) axially."""
    table = cell_atom_indices(tube.ell, tube.m)
    pos = tube.positions
    L = tube.period
    x1 = pos[table[..., 0]]
    d12 = _min_image(pos[table[..., 1]] - x1, L)
    z = x1 + 0.5 * d12
    x2 = x1 + d12
    d28 = _min_image(pos[table[..., 7]] - pos[table[..., 1]], L)
    z_dual = x2 + 0.5 * d28
    z[..., 0] %= L
    z_dual[..., 0] %= L
    return Centers(z, z_dual)


def extract_cell(tube: Nanotube, center: tuple, graph=None) -> CellView:
    """Identify the 8 cell atoms by bond-graph walks from the two generators.

    center is (i, j, k) with i 1-based.  Raises InvalidCellError whenever a
    walk is ambiguous (any participating atom without exactly three bonds, or
    a missing unique common neighbor).
    """
    from .energy import bond_graph

    if graph is None:
        graph = bond_graph(tube)
    i, j, k = center
    a1 = _flat_index(tube.ell, tube.m, i, j, k, 0)
    a2 = _flat_index(tube.ell, tube.m, i, j, k, 1)
    adj = graph.adjacency

    def nbrs(a):
        out = [b for b, _ in adj[a]]
        if len(out) != 3:
            raise InvalidCellError(f"atom {a} has degree {len(out)}, expected 3")
        return out

    n1 = nbrs(a1)
    n2 = set(nbrs(a2))
    wings = []
    outer1 = []
    for u in n1:
        common = [w for w in nbrs(u) if w in n2]
        if common:
            if len(common) != 1:
                raise InvalidCellError(f"ambiguous hexagon closure at atom {u}")
            wings.append((u, common[0]))
        else:
            outer1.append(u)
    if len(wings) != 2 or len(outer1) != 1:
        raise InvalidCellError("cell walk did not find two hexagon wings and one axial neighbor")
    x7 = outer1[0]
    partners = {v for _, v in wings}
    outer2 = [u for u in n2 if u not in partners]
    if len(outer2) != 1:
        raise InvalidCellError("no unique axial neighbor at the second generator")
    x8 = outer2[0]

    (u1, v1), (u2, v2) = wings
    idx = np.array([a1, a2, u1, v1, v2, u2, x7, x8])
    pos = tube.positions
    coords = np.empty((8, 3))
    coords[0] = pos[idx[0]]
    for slot, anchor in _UNWRAP_CHAIN:
        coords[slot] = coords[anchor] + _min_image(pos[idx[slot]] - coords[anchor], tube.period)
    # orient so that x3 sits on the positive second-coordinate side
    local = to_local(coords[None])[0]
    if local[2, 1] < 0.0:
        idx = idx[[0, 1, 5, 4, 3, 2, 6, 7]]
        coords = coords[[0, 1, 5, 4, 3, 2, 6, 7]]
    return CellView(center=center, atom_indices=idx, positions=coords)


def total_cell_energy(tube: Nanotube, pots: PotentialSet) -> float:
    """Sum of the weighted cell energies over all 2*m*ell centers."""
    return float(np.sum(cell_energies(gather_cells(tube), pots)))


def angle_sum(tube: Nanotube) -> float:
    """Sum of (theta_l + theta_r) over all centers and dual centers.

    Equals 4*m*(2*ell - 2)*pi exactly on an unperturbed family configuration.
    """
    return float(np.sum(cell_plane_angles(gather_cells(tube))))


def cell_summary(tube: Nanotube, pots: PotentialSet) -> dict:
    """Vectorized per-cell quantities for a whole tube.

    Keys: bonds (C,8), angles (C,10), energy (C,), theta (C,4), theta_bar (C,),
    delta (C,), mu_tilde (C,), centers (C,3) label triples.
    """
    cells = gather_cells(tube)
    b = cell_bond_lengths(cells)
    phi = cell_angles(cells)
    energy = cell_energies(cells, pots)
    theta = cell_plane_angles(cells)
    local = to_local(cells)
    _, _, delta = symmetrize(local)
    p = 0.5 * (cells[..., 0, :] + cells[..., 6, :])
    q = 0.5 * (cells[..., 1, :] + cells[..., 7, :])
    mu_tilde = np.linalg.norm(q - p, axis=-1)
    ell, m = tube.ell, tube.m
    ids = np.array([(i + 1, j, k) for i in range(ell) for j in range(m) for k in range(2)])
    flat = lambda a: a.reshape(-1, *a.shape[3:])
    return {
        "centers": ids,
        "bonds": flat(b),
        "angles": flat(phi),
        "energy": flat(energy),
        "theta": flat(theta),
        "theta_bar": flat(theta).mean(axis=-1) if theta.size else np.zeros(0),
        "delta": flat(delta),
        "mu_tilde": flat(mu_tilde),
    }
