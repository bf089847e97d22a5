"""Two-body and three-body interaction potentials with certified derivatives.

The pair potential has its minimum value -1 exactly at unit bond length and
vanishes identically (value and derivatives) beyond the cutoff 1.1.  The angle
potential is nonnegative, symmetric around pi, and vanishes exactly at 2*pi/3
and 4*pi/3.  Two presets are provided whose angle stiffness falls on either
side of the pair stiffness threshold v2''(1) = 6*v3''(2*pi/3) that controls
the radius trend under stretching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TWO_THIRDS_PI = 2.0 * np.pi / 3.0


def _bump(t):
    """exp(-1/t) for t > 0, extended by 0, with first and second derivatives."""
    t = np.asarray(t, dtype=float)
    pos = t > 0.0
    safe = np.where(pos, t, 1.0)
    e = np.where(pos, np.exp(-1.0 / safe), 0.0)
    d1 = e / safe**2
    d2 = e * (1.0 / safe**4 - 2.0 / safe**3)
    return e, np.where(pos, d1, 0.0), np.where(pos, d2, 0.0)


def _smoothstep(t):
    """C-infinity step s with s=0 for t<=0 and s=1 for t>=1; returns (s, s', s'')."""
    t = np.asarray(t, dtype=float)
    a, a1, a2 = _bump(t)
    b, nb1, b2 = _bump(1.0 - t)
    b1 = -nb1
    den = a + b
    inner = (t > 0.0) & (t < 1.0)
    den = np.where(inner, den, 1.0)
    s = np.where(t >= 1.0, 1.0, np.where(inner, a / den, 0.0))
    s1 = np.where(inner, (a1 * b - a * b1) / den**2, 0.0)
    s2 = np.where(
        inner,
        ((a2 * b - a * b2) * den - 2.0 * (a1 * b - a * b1) * (a1 + b1)) / den**3,
        0.0,
    )
    return s, s1, s2


class PairPotential:
    """v2(r) = (-1 + k2*(r-1)^2) * psi(r) with a C-infinity cutoff.

    psi equals 1 on (0, lo] and 0 on [hi, infinity); values and the two
    supplied derivatives are bit-exact zero beyond hi.
    """

    def __init__(self, k2: float = 400.0, lo: float = 1.05, hi: float = 1.1):
        if not (0.0 < lo < hi):
            raise ValueError("cutoff knots must satisfy 0 < lo < hi")
        self.k2 = float(k2)
        self.lo = float(lo)
        self.hi = float(hi)

    def _psi(self, r):
        width = self.hi - self.lo
        u = (self.hi - np.asarray(r, dtype=float)) / width
        s, s1, s2 = _smoothstep(u)
        return s, -s1 / width, s2 / width**2

    def value(self, r):
        r = np.asarray(r, dtype=float)
        psi, _, _ = self._psi(r)
        return (self.k2 * (r - 1.0) ** 2 - 1.0) * psi

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        psi, dpsi, _ = self._psi(r)
        p = self.k2 * (r - 1.0) ** 2 - 1.0
        return 2.0 * self.k2 * (r - 1.0) * psi + p * dpsi

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        psi, dpsi, d2psi = self._psi(r)
        p = self.k2 * (r - 1.0) ** 2 - 1.0
        return 2.0 * self.k2 * psi + 4.0 * self.k2 * (r - 1.0) * dpsi + p * d2psi


class AnglePotential:
    """v3(a) = k3 * (cos a + 1/2)^2, minimized exactly at 2*pi/3 and 4*pi/3."""

    def __init__(self, k3: float = 400.0):
        self.k3 = float(k3)

    def value(self, a):
        a = np.asarray(a, dtype=float)
        return self.k3 * (np.cos(a) + 0.5) ** 2

    def deriv(self, a):
        a = np.asarray(a, dtype=float)
        return -2.0 * self.k3 * (np.cos(a) + 0.5) * np.sin(a)

    def deriv2(self, a):
        a = np.asarray(a, dtype=float)
        return 2.0 * self.k3 * (np.sin(a) ** 2 - (np.cos(a) + 0.5) * np.cos(a))


@dataclass(frozen=True)
class PotentialSet:
    """Immutable pair of interaction potentials plus the bond cutoff (1.1)."""

    v2: PairPotential
    v3: AnglePotential
    cutoff: float = 1.1
    name: str = "custom"

    def v2_curvature_at_min(self) -> float:
        return float(self.v2.deriv2(1.0))

    def v3_curvature_at_min(self) -> float:
        return float(self.v3.deriv2(TWO_THIRDS_PI))


def default_soft() -> PotentialSet:
    """Preset with v2''(1) = 800 < 6*v3''(2pi/3) = 3600 (radius grows under tension)."""
    return PotentialSet(PairPotential(400.0), AnglePotential(400.0), name="soft")


def default_stiff() -> PotentialSet:
    """Preset with v2''(1) = 800 > 6*v3''(2pi/3) = 6 (radius shrinks under tension)."""
    return PotentialSet(PairPotential(400.0), AnglePotential(2.0 / 3.0), name="stiff")


_PRESETS = {"soft": default_soft, "stiff": default_stiff}


def from_name(name: str) -> PotentialSet:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown potential preset {name!r}; choose from {sorted(_PRESETS)}")


def from_json(source) -> PotentialSet:
    """Load a potential set from a JSON document {name, k2, k3, cutoff_lo, cutoff_hi}."""
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    k2 = float(doc.get("k2", 400.0))
    k3 = float(doc.get("k3", 400.0))
    lo = float(doc.get("cutoff_lo", 1.05))
    hi = float(doc.get("cutoff_hi", 1.1))
    if hi > 1.1 + 1e-15:
        raise ValueError("cutoff_hi must not exceed the bond cutoff 1.1")
    return PotentialSet(PairPotential(k2, lo, hi), AnglePotential(k3), name=str(doc.get("name", "custom")))


def load(spec) -> PotentialSet:
    """Resolve a preset name, JSON path, or dict into a PotentialSet."""
    if isinstance(spec, PotentialSet):
        return spec
    if isinstance(spec, dict):
        return from_json(spec)
    if isinstance(spec, str) and spec in _PRESETS:
        return from_name(spec)
    return from_json(spec)


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, passed, residual, detail=""):
        self.checks.append(CheckResult(name, bool(passed), float(residual), detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                for c in self.checks
            ],
        }


def _fd1(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _windowed_scale(values, halfwidth=10, floor=1.0):
    """Rolling max of |values| so derivative checks use a local magnitude scale."""
    mag = np.abs(np.asarray(values, dtype=float))
    out = np.full_like(mag, floor)
    n = len(mag)
    for shift in range(-halfwidth, halfwidth + 1):
        lo = max(0, -shift)
        hi = min(n, n - shift)
        out[lo:hi] = np.maximum(out[lo:hi], mag[lo + shift : hi + shift])
    return out


def validate(p: PotentialSet, fd_tol: float = 1e-6) -> ValidationReport:
    """Check every assumption the bond model places on a potential set.

    Violations are reported, never raised; each check carries its worst-case
    residual.  Extra zeros of the angle potential (beyond 2pi/3 and 4pi/3) are
    flagged as failures of the uniqueness check rather than rejected silently.
    """
    rep = ValidationReport()
    r = np.linspace(0.3, 1.35, 4201)
    a = np.linspace(0.0, 2.0 * np.pi, 4321)

    v2 = p.v2.value(r)
    rep.add("pair-minimum-value", abs(p.v2.value(1.0) + 1.0) <= 1e-12, abs(float(p.v2.value(1.0)) + 1.0))

    away = np.abs(r - 1.0) >= 0.01
    margin = float(np.min(v2[away]) + 1.0)
    rep.add("pair-minimum-unique", margin > 0.0, margin, "min v2 + 1 away from r=1")

    rep.add("pair-stationary-at-one", abs(float(p.v2.deriv(1.0))) <= 1e-10, abs(float(p.v2.deriv(1.0))))
    rep.add("pair-curvature-at-one", float(p.v2.deriv2(1.0)) > 0.0, float(p.v2.deriv2(1.0)))

    tail = np.linspace(p.cutoff, 3.0, 257)
    cut_res = max(
        float(np.max(np.abs(p.v2.value(tail)))),
        float(np.max(np.abs(p.v2.deriv(tail)))),
        float(np.max(np.abs(p.v2.deriv2(tail)))),
    )
    rep.add("pair-cutoff-exact", cut_res == 0.0, cut_res, "v2 and derivatives bit-zero beyond cutoff")

    rep.add("pair-range", float(np.min(v2)) >= -1.0 - 1e-12, float(np.min(v2)))

    h = 1e-6
    fd_d1 = _fd1(p.v2.value, r, h)
    an_d1 = p.v2.deriv(r)
    res1 = float(np.max(np.abs(fd_d1 - an_d1) / _windowed_scale(an_d1)))
    fd_d2 = _fd1(p.v2.deriv, r, h)
    an_d2 = p.v2.deriv2(r)
    res2 = float(np.max(np.abs(fd_d2 - an_d2) / _windowed_scale(an_d2)))
    rep.add("pair-deriv-fd", max(res1, res2) <= fd_tol, max(res1, res2))

    v3 = p.v3.value(a)
    rep.add("angle-nonnegative", float(np.min(v3)) >= -1e-15, float(np.min(v3)))

    sym = float(np.max(np.abs(p.v3.value(a) - p.v3.value(2.0 * np.pi - a))))
    rep.add("angle-symmetry", sym <= 1e-12, sym, "symmetry around pi")

    z1 = abs(float(p.v3.value(TWO_THIRDS_PI)))
    z2 = abs(float(p.v3.value(2.0 * TWO_THIRDS_PI)))
    near = (np.abs(a - TWO_THIRDS_PI) < 0.05) | (np.abs(a - 2.0 * TWO_THIRDS_PI) < 0.05)
    floor_away = float(np.min(v3[~near])) if np.any(~near) else np.inf
    extra = floor_away <= 1e-12
    detail = "extra zero detected away from 2pi/3 and 4pi/3" if extra else ""
    rep.add("angle-minimum-points", max(z1, z2) <= 1e-12 and not extra, max(z1, z2, 0.0 if not extra else 1.0), detail)

    rep.add(
        "angle-stationary-at-min",
        abs(float(p.v3.deriv(TWO_THIRDS_PI))) <= 1e-10,
        abs(float(p.v3.deriv(TWO_THIRDS_PI))),
    )
    rep.add("angle-curvature-at-min", float(p.v3.deriv2(TWO_THIRDS_PI)) > 0.0, float(p.v3.deriv2(TWO_THIRDS_PI)))

    fd_a1 = _fd1(p.v3.value, a, h)
    an_a1 = p.v3.deriv(a)
    resa1 = float(np.max(np.abs(fd_a1 - an_a1) / _windowed_scale(an_a1)))
    fd_a2 = _fd1(p.v3.deriv, a, h)
    an_a2 = p.v3.deriv2(a)
    resa2 = float(np.max(np.abs(fd_a2 - an_a2) / _windowed_scale(an_a2)))
    rep.add("angle-deriv-fd", max(resa1, resa2) <= fd_tol, max(resa1, resa2))

    return rep
