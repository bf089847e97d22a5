"""Monte-Carlo verification that the optimal periodic tube is a strict local
minimizer: seeded perturbation ensembles with a preserved bond graph, the full
configurational Hessian spectrum, and per-cell lower-bound certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import cell_summary, gather_cells, symmetrize, to_local
from .energy import bond_graph, gradient, total_energy
from .errors import EtaTooLargeError, NotStationaryError
from .geometry import Nanotube, build_nanotube
from .potentials import PotentialSet
from .reduced import FamilyMinimum, minimize_family, reduced_energy_value

MODES = ("uniform-ball", "gaussian-clipped", "per-direction")


@dataclass(frozen=True)
class PerturbationSpec:
    """Ensemble description: per-atom displacement cap eta, seeded and counted."""

    eta: float
    seed: int = 0
    count: int = 100
    mode: str = "uniform-ball"

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def _displacement(rng: np.random.Generator, n: int, eta: float, mode: str) -> np.ndarray:
    if eta == 0.0:
        return np.zeros((n, 3))
    if mode == "uniform-ball":
        d = rng.standard_normal((n, 3))
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        radii = eta * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)
        return d / norms * radii
    if mode == "gaussian-clipped":
        d = rng.standard_normal((n, 3)) * (eta / 3.0)
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        # shave a few ulps off the clip so rounding never exceeds eta
        scale = np.minimum(1.0, (1.0 - 1e-14) * eta / np.maximum(norms, 1e-300))
        return d * scale
    d = rng.uniform(-eta / np.sqrt(3.0), eta / np.sqrt(3.0), size=(n, 3))
    return d


def _same_bonds(base_pairs: np.ndarray, graph) -> bool:
    if len(base_pairs) != len(graph.pairs):
        return False
    return bool(np.array_equal(base_pairs, graph.pairs))


def sample_perturbation(
    base: Nanotube,
    spec: PerturbationSpec,
    trial: int = 0,
    base_graph=None,
    max_rejections: int = 1000,
):
    """One displaced copy of base with identical period and bond graph.

    Returns (tube, graph, rejections).  Raises EtaTooLargeError after
    max_rejections consecutive bond-graph-breaking draws.
    """
    if base_graph is None:
        base_graph = bond_graph(base)
    base_pairs = base_graph.pairs
    rejections = 0
    rng = _trial_rng(spec.seed, trial)
    while True:
        d = _displacement(rng, base.n, spec.eta, spec.mode)
        tube = base.with_positions(base.positions + d)
        g = bond_graph(tube, method="brute")
        if _same_bonds(base_pairs, g):
            return tube, g, rejections
        rejections += 1
        if rejections >= max_rejections:
            raise EtaTooLargeError(
                f"{max_rejections} consecutive samples broke the bond graph at eta={spec.eta}"
            )


def stability_trial(
    mu: float,
    ell: int,
    m: int,
    spec: PerturbationSpec,
    pots: PotentialSet,
    collect_ratios: bool = True,
) -> dict:
    """Energy-gap ensemble against the optimal family tube at period mu.

    Every sampled perturbation must raise the energy; samples at or below the
    base energy are recorded as counterexamples (with positions), not raised.
    """
    fam = minimize_family(mu, ell, pots, m=m)
    base = build_nanotube(fam.geometry, m)
    base_graph = bond_graph(base)
    e_base = total_energy(base, pots, base_graph)

    gaps = []
    ratios = []
    failures = []
    rejections = 0
    skipped_trivial = 0
    for trial in range(spec.count):
        tube, g, rej = sample_perturbation(base, spec, trial=trial, base_graph=base_graph)
        rejections += rej
        if np.max(np.abs(tube.positions - base.positions)) == 0.0:
            skipped_trivial += 1
            continue
        gap = total_energy(tube, pots, g) - e_base
        gaps.append(gap)
        if collect_ratios:
            delta_sum = float(np.sum(symmetrize(to_local(gather_cells(tube)))[2]))
            if delta_sum > 1e-14:
                ratios.append(gap / delta_sum)
        if gap <= 0.0:
            failures.append({"trial": trial, "energy_gap": gap, "positions": tube.positions.copy()})
    gaps = np.array(gaps)
    ratios = np.array(ratios)
    report = {
        "mu": mu,
        "ell": ell,
        "m": m,
        "eta": spec.eta,
        "seed": spec.seed,
        "mode": spec.mode,
        "count": spec.count,
        "evaluated": int(len(gaps)),
        "skipped_trivial": skipped_trivial,
        "rejections": rejections,
        "base_energy": e_base,
        "min_gap": float(np.min(gaps)) if len(gaps) else float("nan"),
        "max_gap": float(np.max(gaps)) if len(gaps) else float("nan"),
        "mean_gap": float(np.mean(gaps)) if len(gaps) else float("nan"),
        "gap_ratio_min": float(np.min(ratios)) if len(ratios) else float("nan"),
        "gap_ratio_median": float(np.median(ratios)) if len(ratios) else float("nan"),
        "gap_ratio_max": float(np.max(ratios)) if len(ratios) else float("nan"),
        "n_failures": len(failures),
        "failures": failures,
    }
    return report


def isometry_directions(tube: Nanotube) -> np.ndarray:
    """Orthonormal basis of the four energy-invariant directions at fixed L:
    three rigid translations and the rotation about the tube axis."""
    n = tube.n
    dirs = np.zeros((3 * n, 4))
    for d in range(3):
        v = np.zeros((n, 3))
        v[:, d] = 1.0
        dirs[:, d] = v.ravel()
    rot = np.zeros((n, 3))
    rot[:, 1] = -tube.positions[:, 2]
    rot[:, 2] = tube.positions[:, 1]
    dirs[:, 3] = rot.ravel()
    q, _ = np.linalg.qr(dirs)
    return q


def hessian_spectrum(
    tube: Nanotube,
    pots: PotentialSet,
    step: float = 1e-5,
    grad_tol_factor: float = 1e-7,
    return_vectors: bool = False,
):
    """Eigenvalues (ascending) of the configurational Hessian at fixed period.

    Central differences of the analytic gradient on a frozen bond graph; the
    matrix is symmetrized before the eigensolve.  Raises NotStationaryError
    unless |grad| < grad_tol_factor * sqrt(n).
    """
    graph = bond_graph(tube)
    g0 = gradient(tube, pots, graph)
    if np.linalg.norm(g0) >= grad_tol_factor * np.sqrt(tube.n):
        raise NotStationaryError(
            f"gradient norm {np.linalg.norm(g0):.3e} exceeds {grad_tol_factor * np.sqrt(tube.n):.3e}"
        )
    n3 = 3 * tube.n
    hess = np.empty((n3, n3))
    flat = tube.positions.ravel().copy()
    for col in range(n3):
        x = flat.copy()
        x[col] += step
        gp = gradient(tube.with_positions(x.reshape(-1, 3)), pots, graph).ravel()
        x[col] -= 2.0 * step
        gm = gradient(tube.with_positions(x.reshape(-1, 3)), pots, graph).ravel()
        hess[:, col] = (gp - gm) / (2.0 * step)
    hess = 0.5 * (hess + hess.T)
    if return_vectors:
        evals, evecs = np.linalg.eigh(hess)
        return evals, evecs
    return np.linalg.eigvalsh(hess)


def null_space_report(tube: Nanotube, pots: PotentialSet, zero_tol_rel: float = 1e-6) -> dict:
    """Spectrum partition into near-null and positive parts plus the principal
    angles between the near-null eigenvectors and the isometry directions."""
    from scipy.linalg import subspace_angles

    evals, evecs = hessian_spectrum(tube, pots, return_vectors=True)
    lam_max = float(np.max(np.abs(evals)))
    zero_tol = zero_tol_rel * lam_max
    near_null = np.abs(evals) < zero_tol
    n_null = int(np.sum(near_null))
    iso = isometry_directions(tube)
    max_angle = float("nan")
    if n_null > 0:
        angles = subspace_angles(iso, evecs[:, near_null])
        max_angle = float(np.max(angles))
    positive_rest = bool(np.all(evals[~near_null] > 0.0))
    return {
        "eigenvalues": evals,
        "lam_max": lam_max,
        "zero_tol": zero_tol,
        "n_near_null": n_null,
        "n_negative": int(np.sum(evals < -zero_tol)),
        "rest_positive": positive_rest,
        "max_principal_angle": max_angle,
    }


def per_cell_certificate(tube: Nanotube, base: FamilyMinimum, pots: PotentialSet) -> dict:
    """Per-cell lower bound: cell energy minus the reduced energy evaluated at
    the measured dual-center distance and mean plane angle.

    Reports the minimum margin and the empirical constant
    C_hat = min over cells with delta > 1e-14 of margin / (delta / ell^2).
    """
    summ = cell_summary(tube, pots)
    ell = tube.ell
    margins = np.empty(len(summ["energy"]))
    for idx, (ec, mt, tb) in enumerate(zip(summ["energy"], summ["mu_tilde"], summ["theta_bar"])):
        margins[idx] = ec - reduced_energy_value(float(mt), float(tb), float(tb), pots)
    delta = summ["delta"]
    mask = delta > 1e-14
    scaled = margins[mask] / (delta[mask] / ell**2) if np.any(mask) else np.array([])
    return {
        "n_cells": len(margins),
        "min_margin": float(np.min(margins)),
        "max_margin": float(np.max(margins)),
        "margins": margins,
        "delta": delta,
        "delta_sum": float(np.sum(delta)),
        "c_hat": float(np.min(scaled)) if len(scaled) else float("nan"),
    }


def certificate_eta_ladder(
    ell: int,
    m: int,
    pots: PotentialSet,
    etas=(1e-4, 1e-3, 3e-3, 1e-2),
    samples_per_eta: int = 3,
    seed: int = 0,
    mu_offset: float = 0.0,
) -> dict:
    """Largest sampled perturbation size at which every per-cell margin stays
    nonnegative.  The admissible size is existential in the underlying theory;
    this reports its empirical counterpart for the given (ell, m)."""
    from .reduced import reference_angles

    fam = minimize_family(reference_angles(ell, pots).mu_us + mu_offset, ell, pots, m=m)
    base = build_nanotube(fam.geometry, m)
    base_graph = bond_graph(base)
    rows = []
    largest = None
    for eta in etas:
        worst = np.inf
        ok = True
        try:
            for trial in range(samples_per_eta):
                tube, _, _ = sample_perturbation(
                    base,
                    PerturbationSpec(eta=eta, seed=seed, count=samples_per_eta),
                    trial=trial,
                    base_graph=base_graph,
                    max_rejections=50,
                )
                rep = per_cell_certificate(tube, fam, pots)
                worst = min(worst, rep["min_margin"])
            ok = worst >= 0.0
        except EtaTooLargeError:
            ok = False
            worst = float("nan")
        rows.append({"eta": eta, "passed": bool(ok), "min_margin": worst})
        if ok:
            largest = eta
    return {"ell": ell, "m": m, "rows": rows, "largest_passing_eta": largest}


def critical_stretch_scan(
    ell: int,
    m: int,
    pots: PotentialSet,
    eta: float = 1e-3,
    count: int = 50,
    seed: int = 0,
    offsets=(0.0, 0.005, 0.01, 0.02, 0.04),
) -> dict:
    """Scan stretch offsets above the unstretched period and report the largest
    one at which every trial keeps a positive energy gap (an empirical stand-in
    for the critical stretch; no claim it matches any sharp threshold)."""
    from .reduced import reference_angles

    mu_us = reference_angles(ell, pots).mu_us
    results = []
    largest_pass = None
    for off in offsets:
        spec = PerturbationSpec(eta=eta, seed=seed, count=count)
        rep = stability_trial(mu_us + off, ell, m, spec, pots, collect_ratios=False)
        ok = rep["n_failures"] == 0 and rep["min_gap"] > 0.0
        results.append({"offset": off, "passed": ok, "min_gap": rep["min_gap"]})
        if ok:
            largest_pass = off
    return {"mu_us": mu_us, "offsets": results, "largest_passing_offset": largest_pass}
