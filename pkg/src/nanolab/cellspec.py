"""Reference cells, the 24-direction basis of cell-configuration space, the
bond/angle map T, and constrained convexity of the cell energy.

The basis splits into six rigid-motion directions (translations plus
infinitesimal rotations of the planar reference), thirteen directions that
change bonds or angles to first order, and five out-of-plane directions that
do so only to second order.  The map T collects the ten cell angles and eight
cell bond lengths; the cell energy factors through T, which reduces its
convexity analysis to kernel geometry plus the angle-sum concavity of nearly
planar junctions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import ANGLE_WEIGHTS, BOND_WEIGHTS, cell_angles, cell_bond_lengths, cell_energies, cell_energy_gradient
from .errors import DegenerateGeometryError, InvalidParameterError, VerificationFailureError
from .geometry import gamma
from .potentials import PotentialSet
from .reduced import reference_angles

SQ3 = np.sqrt(3.0)


def planar_reference() -> np.ndarray:
    """Flat honeycomb cell with unit bonds in the z = 0 plane."""
    return np.array(
        [
            [-1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [-0.5, SQ3 / 2.0, 0.0],
            [0.5, SQ3 / 2.0, 0.0],
            [0.5, -SQ3 / 2.0, 0.0],
            [-0.5, -SQ3 / 2.0, 0.0],
            [-2.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
        ]
    )


def kink_cell(ell: int, pots: PotentialSet) -> np.ndarray:
    """Unit-bond cell of the unstretched optimal tube: two half planes meeting
    along the axis at the interior angle gamma_ell."""
    refs = reference_angles(ell, pots)
    sig = -np.cos(refs.alpha_us)
    g = gamma(ell)
    sy = np.sin(refs.alpha_us) * np.sin(0.5 * g)
    sz = np.sin(refs.alpha_us) * np.cos(0.5 * g)
    return np.array(
        [
            [-0.5 - sig, 0.0, 0.0],
            [0.5 + sig, 0.0, 0.0],
            [-0.5, sy, sz],
            [0.5, sy, sz],
            [0.5, -sy, sz],
            [-0.5, -sy, sz],
            [-1.5 - sig, 0.0, 0.0],
            [1.5 + sig, 0.0, 0.0],
        ]
    )


def _sparse(entries) -> np.ndarray:
    v = np.zeros((8, 3))
    for atom, vec in entries.items():
        v[atom] = vec
    return v


def _good_vectors() -> np.ndarray:
    u = np.zeros((13, 8, 3))
    u[0] = planar_reference() * np.array([1.0, 1.0, 0.0])
    u[0][6] = u[0][7] = 0.0
    u[1] = _sparse({2: (0.5, SQ3 / 2, 0.0), 3: (-0.5, SQ3 / 2, 0.0)})
    u[2] = _sparse({1: (1.0, 0.0, 0.0), 3: (1.0, 0.0, 0.0), 4: (1.0, 0.0, 0.0)})
    u[3] = _sparse(
        {
            1: (0.5, -SQ3 / 2, 0.0),
            2: (0.5, SQ3 / 2, 0.0),
            3: (-0.5, SQ3 / 2, 0.0),
            4: (1.0, 0.0, 0.0),
        }
    )
    u[4] = _sparse({6: (-1.0, 0.0, 0.0)})
    u[5] = _sparse({6: (-1.0, 0.0, 0.0), 7: (1.0, 0.0, 0.0)})
    u[6] = _sparse({0: (SQ3, 0.0, 0.0), 2: (0.0, 1.0, 0.0), 5: (0.0, -1.0, 0.0)})
    u[7] = _sparse({2: (SQ3 / 2, -0.5, 0.0), 3: (SQ3 / 2, 0.5, 0.0)})
    u[8] = _sparse(
        {
            0: (SQ3 / 2, 0.5, 0.0),
            1: (-SQ3 / 2, 0.5, 0.0),
            2: (0.0, 1.0, 0.0),
            3: (0.0, 1.0, 0.0),
        }
    )
    u[9] = _sparse({6: (0.0, 1.0, 0.0)})
    u[10] = _sparse({6: (0.0, 1.0, 0.0), 7: (0.0, 1.0, 0.0)})
    u[11] = _sparse({0: (1.0, 0.0, 0.0)})
    u[12] = _sparse({0: (0.0, 1.0, 0.0)})
    return u


def _bad_vectors() -> np.ndarray:
    w = np.zeros((5, 8, 3))
    w[0] = _sparse({0: (0.0, 0.0, 1.0)})
    w[1] = _sparse({0: (0.0, 0.0, 1.0), 2: (0.0, 0.0, 1.0)})
    w[2] = _sparse({0: (0.0, 0.0, 1.0), 3: (0.0, 0.0, 1.0), 4: (0.0, 0.0, 1.0)})
    w[3] = _sparse({6: (0.0, 0.0, 1.0)})
    w[4] = _sparse({6: (0.0, 0.0, 1.0), 7: (0.0, 0.0, 1.0)})
    return w


@dataclass(frozen=True)
class CellBasis:
    """24 directions of cell-configuration space: degenerate, good, bad."""

    degenerate: np.ndarray
    good: np.ndarray
    bad: np.ndarray

    def matrix(self) -> np.ndarray:
        stacked = np.concatenate([self.degenerate, self.good, self.bad], axis=0)
        return stacked.reshape(len(stacked), 24).T

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix(), tol=1e-10))


def cell_basis() -> CellBasis:
    x0 = planar_reference()
    degen = np.zeros((6, 8, 3))
    for d in range(3):
        degen[d, :, d] = 1.0
    rots = [
        np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
        np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
    ]
    for d, a in enumerate(rots):
        degen[3 + d] = x0 @ a.T
    return CellBasis(degen, _good_vectors(), _bad_vectors())


ANGLE_SUM_VECTORS = np.zeros((3, 10))
ANGLE_SUM_VECTORS[0, 0:6] = 1.0
ANGLE_SUM_VECTORS[1, [0, 6, 7]] = 1.0
ANGLE_SUM_VECTORS[2, [1, 8, 9]] = 1.0


@dataclass
class TMapValue:
    angles: np.ndarray
    bonds: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.angles, self.bonds])

    def angle_sums(self) -> np.ndarray:
        return ANGLE_SUM_VECTORS @ self.angles


def t_map(cell: np.ndarray) -> TMapValue:
    """The ten angles and eight bond lengths of an 8-atom cell."""
    cell = np.asarray(cell, dtype=float)
    if cell.shape != (8, 3):
        raise InvalidParameterError(f"cell must have shape (8, 3), got {cell.shape}")
    return TMapValue(angles=cell_angles(cell), bonds=cell_bond_lengths(cell))


def tilde_energy(y: np.ndarray, pots: PotentialSet) -> float:
    """Weighted sum over the 18 bond/angle values; composes with t_map to the cell energy."""
    y = np.asarray(y, dtype=float)
    return float(np.dot(ANGLE_WEIGHTS, pots.v3.value(y[:10])) + np.dot(BOND_WEIGHTS, pots.v2.value(y[10:])))


def tilde_gradient(y: np.ndarray, pots: PotentialSet) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.concatenate([ANGLE_WEIGHTS * pots.v3.deriv(y[:10]), BOND_WEIGHTS * pots.v2.deriv(y[10:])])


def tilde_hessian_diag(y: np.ndarray, pots: PotentialSet) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.concatenate([ANGLE_WEIGHTS * pots.v3.deriv2(y[:10]), BOND_WEIGHTS * pots.v2.deriv2(y[10:])])


def t_jacobian(cell: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """(18, 24) finite-difference Jacobian of t_map at the given cell."""
    cell = np.asarray(cell, dtype=float)
    flat = cell.ravel()
    cols = []
    for idx in range(24):
        x = flat.copy()
        x[idx] += step
        fp = t_map(x.reshape(8, 3)).vector
        x[idx] -= 2.0 * step
        fm = t_map(x.reshape(8, 3)).vector
        cols.append((fp - fm) / (2.0 * step))
    return np.stack(cols, axis=1)


def t_jacobian_kernel(cell: np.ndarray | None = None, sv_tol: float = 1e-8) -> dict:
    """Kernel dimensions of DT and DT^a at the planar reference via SVD.

    Also reports the largest principal angle between the computed kernel of DT
    and the span of the degenerate-plus-bad basis directions.
    """
    from scipy.linalg import subspace_angles

    if cell is None:
        cell = planar_reference()
    jac = t_jacobian(cell)
    u, s, vt = np.linalg.svd(jac)
    thresh = sv_tol * s[0]
    rank = int(np.sum(s > thresh))
    kernel = vt[rank:].T
    ja = jac[:10]
    sa = np.linalg.svd(ja, compute_uv=False)
    rank_a = int(np.sum(sa > sv_tol * sa[0]))

    basis = cell_basis()
    span = np.concatenate([basis.degenerate, basis.bad], axis=0).reshape(-1, 24).T
    qspan, _ = np.linalg.qr(span)
    max_angle = float(np.max(subspace_angles(qspan, kernel))) if kernel.size else float("nan")
    return {
        "rank": rank,
        "kernel_dim": 24 - rank,
        "kernel_dim_angles": 24 - rank_a,
        "kernel": kernel,
        "singular_values": s,
        "max_principal_angle": max_angle,
    }


def tilde_derivative_signs(ells, pots: PotentialSet) -> dict:
    """Sign and scale structure of the tilde-energy derivatives at the kink cell.

    Bond entries of the gradient vanish (unit bonds at the pair minimum); angle
    entries are strictly negative with magnitude of order 1/ell^2; the Hessian
    is diagonal with entries in a fixed positive band.  Raises
    VerificationFailureError on a sign violation.
    """
    rows = []
    for ell in ells:
        if ell < 16:
            raise InvalidParameterError(f"ell must be at least 16, got {ell}")
        y = t_map(kink_cell(ell, pots)).vector
        g = tilde_gradient(y, pots)
        hd = tilde_hessian_diag(y, pots)
        bond_res = float(np.max(np.abs(g[10:])))
        angle_max = float(np.max(g[:10]))
        if angle_max >= 0.0:
            raise VerificationFailureError(f"angle derivative not negative at ell={ell}")
        rows.append(
            {
                "ell": ell,
                "bond_grad_residual": bond_res,
                "angle_grad": g[:10],
                "angle_grad_scaled_lo": float(np.min(-g[:10]) * ell**2),
                "angle_grad_scaled_hi": float(np.max(-g[:10]) * ell**2),
                "hess_diag_min": float(np.min(hd)),
                "hess_diag_max": float(np.max(hd)),
            }
        )
    ells_arr = np.array([r["ell"] for r in rows], dtype=float)
    mags = np.array([np.mean(-r["angle_grad"]) for r in rows])
    slope = float(np.polyfit(np.log(ells_arr), np.log(mags), 1)[0]) if len(rows) > 1 else float("nan")
    return {"rows": rows, "scaling_slope": slope}


def cell_hessian(cell: np.ndarray, pots: PotentialSet, step: float = 1e-4) -> np.ndarray:
    """24x24 Hessian of the cell energy: Richardson-extrapolated central
    differences of the analytic cell gradient, symmetrized."""
    flat = np.asarray(cell, dtype=float).ravel()

    def fd(h):
        cols = []
        for idx in range(24):
            x = flat.copy()
            x[idx] += h
            gp = cell_energy_gradient(x.reshape(8, 3), pots).ravel()
            x[idx] -= 2.0 * h
            gm = cell_energy_gradient(x.reshape(8, 3), pots).ravel()
            cols.append((gp - gm) / (2.0 * h))
        return np.stack(cols, axis=1)

    h1 = fd(step)
    h2 = fd(0.5 * step)
    hess = (4.0 * h2 - h1) / 3.0
    return 0.5 * (hess + hess.T)


def constrained_rayleigh_min(hess: np.ndarray, span: np.ndarray, r: float, n_scan: int = 60) -> dict:
    """Lower bound on min v'Hv over unit v with |proj_span(v)| <= r.

    Weak Lagrangian duality: for any nu >= 0, lambda_min(H + nu*P) - nu*r^2 is
    a valid lower bound; the best nu is found by scanning plus golden-section
    refinement (the dual function is concave in nu).  A feasible primal search
    gives the companion upper bound.
    """
    if not (0.0 < r < 1.0):
        raise InvalidParameterError(f"r must lie in (0, 1), got {r}")
    q, _ = np.linalg.qr(span)
    proj = q @ q.T

    def dual(nu):
        return float(np.linalg.eigvalsh(hess + nu * proj)[0]) - nu * r**2

    scale = float(np.max(np.abs(np.linalg.eigvalsh(hess))))
    nus = np.concatenate([[0.0], np.geomspace(1e-6 * scale, 10.0 * scale, n_scan)])
    vals = np.array([dual(nu) for nu in nus])
    best = int(np.argmax(vals))
    lo = nus[max(0, best - 1)]
    hi = nus[min(len(nus) - 1, best + 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd_ = dual(c), dual(d)
    for _ in range(60):
        if fc > fd_:
            b, d, fd_ = d, c, fc
            c = b - invphi * (b - a)
            fc = dual(c)
        else:
            a, c, fc = c, d, fd_
            d = a + invphi * (b - a)
            fd_ = dual(d)
    nu_star = 0.5 * (a + b)
    lower = dual(nu_star)

    # primal feasible upper bound from the dual-optimal eigenvector
    evals, evecs = np.linalg.eigh(hess + nu_star * proj)
    v = evecs[:, 0]
    pv = proj @ v
    npv = np.linalg.norm(pv)
    if npv > r:
        # shrink the in-span component to the constraint boundary
        perp = v - pv
        nperp = np.linalg.norm(perp)
        if nperp > 1e-14:
            v = (r / npv) * pv + np.sqrt(1.0 - r**2) * perp / nperp
    v = v / np.linalg.norm(v)
    upper = float(v @ hess @ v)
    return {"lower": float(max(lower, vals[0] if best == 0 else lower)), "upper": upper, "nu": float(nu_star)}


def angle_sum_concavity(pots: PotentialSet, n_samples: int = 200, seed: int = 0, step: float = 1e-3) -> dict:
    """Second directional derivative of the total angle sum at the planar
    reference, sampled over the degenerate-plus-bad span.

    The sum of all three angle-sum functionals decreases at second order in
    any such direction, at a rate controlled by the out-of-plane component.
    """
    x0 = planar_reference()
    basis = cell_basis()
    span = np.concatenate([basis.degenerate, basis.bad], axis=0).reshape(-1, 24)
    qdeg, _ = np.linalg.qr(basis.degenerate.reshape(6, 24).T)

    def total_angle_sum(cell):
        return float(np.sum(t_map(cell).angle_sums()))

    base = total_angle_sum(x0)
    rng = np.random.default_rng(seed)
    worst = np.inf
    samples = []
    for s in range(n_samples + 5):
        if s < 5:
            coef = np.zeros(11)
            coef[6 + s % 5] = 1.0
        else:
            coef = rng.standard_normal(11)
        v = coef @ span
        v = v / np.linalg.norm(v)
        vd = qdeg @ (qdeg.T @ v)
        resid = np.linalg.norm(v - vd)
        if resid < 1e-8:
            continue

        def second(h):
            return (
                total_angle_sum(x0 + h * v.reshape(8, 3))
                - 2.0 * base
                + total_angle_sum(x0 - h * v.reshape(8, 3))
            ) / h**2

        d2 = (4.0 * second(0.5 * step) - second(step)) / 3.0
        ratio = -d2 / resid**2
        samples.append(ratio)
        worst = min(worst, ratio)
    return {"c_kink": float(worst), "n_samples": len(samples), "ratios": np.array(samples)}


def cell_hessian_convexity(ell: int, pots: PotentialSet, r: float = 0.9) -> dict:
    """Constrained convexity of the cell-energy Hessian at the kink cell.

    (a) directions r-separated from the degenerate-plus-bad span have Rayleigh
    quotients bounded below by a positive constant; (b) directions merely
    r-separated from the rigid motions keep a positive bound of order 1/ell^2;
    (c) the angle-sum concavity constant at the planar reference is positive.
    Raises VerificationFailureError if a certified lower bound is nonpositive.
    """
    if ell < 16:
        raise InvalidParameterError(f"ell must be at least 16, got {ell}")
    basis = cell_basis()
    hess = cell_hessian(kink_cell(ell, pots), pots)
    span_db = np.concatenate([basis.degenerate, basis.bad], axis=0).reshape(-1, 24).T
    span_d = basis.degenerate.reshape(6, 24).T
    good = constrained_rayleigh_min(hess, span_db, r)
    weak = constrained_rayleigh_min(hess, span_d, r)
    if good["lower"] <= 0.0 or weak["lower"] <= 0.0:
        raise VerificationFailureError(
            f"nonpositive constrained convexity bound at ell={ell}: {good['lower']}, {weak['lower']}"
        )
    conc = angle_sum_concavity(pots)
    return {
        "ell": ell,
        "r": r,
        "c_good": good["lower"],
        "c_good_upper": good["upper"],
        "c_weak": weak["lower"],
        "c_weak_upper": weak["upper"],
        "c_kink": conc["c_kink"],
    }
