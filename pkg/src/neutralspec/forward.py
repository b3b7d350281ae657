"""Roots of ``det Delta``: Newton search, argument-principle counts, verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .charmatrix import (
    ROOT_SIGMA_RATIO,
    degeneracy,
    degeneracy_of_matrix,
    delta_derivative,
    delta_eval,
)
from .errors import ContourError, DomainError, NotConverged
from .spectral import TWO_PI

COLLISION_TOL = 1e-8
CONTOUR_SIGMA_FLOOR = 1e-10
QUAD_POINTS = 64
EXACT_ROOT_RATIO = 1e-15


class NewtonResult(NamedTuple):
    root: complex
    iterations: int
    converged: bool


def _log_derivative_step(sys, lam):
    D = delta_eval(sys, lam)
    Dp = delta_derivative(sys, lam)
    return 1.0 / np.trace(np.linalg.solve(D, Dp))


def _sigma_polish(sys, lam, steps=3):
    # Newton on the holomorphic proxy u^* Delta(lam) v with frozen singular vectors
    for _ in range(steps):
        U, s, Vh = np.linalg.svd(delta_eval(sys, lam))
        u, v = U[:, -1], Vh[-1].conj()
        num = u.conj() @ delta_eval(sys, lam) @ v
        den = u.conj() @ delta_derivative(sys, lam) @ v
        if den == 0:
            break
        lam = lam - num / den
    return lam


def newton_root(sys, lam_init, tol=1e-12, max_iter=50):
    """Newton iteration on ``det Delta`` through its logarithmic derivative.

    Each step is ``lam <- lam - 1 / trace(Delta^{-1} Delta')``; iteration
    stops when the step is at most ``tol`` or ``Delta(lam)`` is singular to
    working precision.

    Raises
    ------
    NotConverged
        When ``max_iter`` steps do not converge, or when ``Delta`` becomes
        singular at a non-root and three singular-value polishing steps do
        not reach ``ROOT_SIGMA_RATIO``.
    """
    lam = complex(lam_init)
    for it in range(max_iter + 1):
        if degeneracy(sys, lam).sigma_min_ratio <= EXACT_ROOT_RATIO:
            return NewtonResult(lam, it, True)
        if it == max_iter:
            break
        try:
            step = _log_derivative_step(sys, lam)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.isfinite(step):
            lam = complex(_sigma_polish(sys, lam))
            if degeneracy(sys, lam).sigma_min_ratio <= ROOT_SIGMA_RATIO:
                return NewtonResult(lam, it + 1, True)
            raise NotConverged(f"singular Delta at non-root {lam}", lam, it + 1)
        lam = complex(lam - step)
        if abs(step) <= tol:
            return NewtonResult(lam, it + 1, True)
    raise NotConverged(f"no convergence in {max_iter} iterations", lam, max_iter)


def _edge_nodes(points):
    x, w = np.polynomial.legendre.leggauss(points)
    return 0.5 * (x + 1.0), 0.5 * w


def _winding(sys, corners, points):
    t, w = _edge_nodes(points)
    total = 0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        lam = a + (b - a) * t
        D = delta_eval(sys, lam)
        s = np.linalg.svd(D, compute_uv=False)
        ratio = s[:, -1] / s[:, 0]
        if np.any(ratio <= CONTOUR_SIGMA_FLOOR):
            i = int(np.argmin(ratio))
            raise ContourError(f"contour passes through a root near {lam[i]}")
        integrand = np.trace(np.linalg.solve(D, delta_derivative(sys, lam)), axis1=1, axis2=2)
        total += (b - a) * np.sum(w * integrand)
    return total / (2j * np.pi)


def count_roots_box(sys, center, half_widths, quad_points=QUAD_POINTS, max_doublings=4):
    """Number of zeros of ``det Delta`` (with multiplicity) inside a rectangle.

    ``half_widths = (hr, hi)`` are the real and imaginary half-sizes.  Uses
    Gauss-Legendre quadrature on each edge, doubling the node count while the
    winding number is farther than 0.25 from an integer.
    """
    c = complex(center)
    hr, hi = half_widths
    corners = [c + complex(-hr, -hi), c + complex(hr, -hi), c + complex(hr, hi),
               c + complex(-hr, hi)]
    points = quad_points
    for _ in range(max_doublings + 1):
        wnd = _winding(sys, corners, points)
        k = round(wnd.real)
        if abs(wnd - k) <= 0.25:
            return int(k)
        points *= 2
    raise ContourError(f"non-integer winding number {wnd}")


@dataclass
class SpectrumEntry:
    m: int
    k: int
    seed: complex
    root: complex
    iterations: int
    converged: bool
    report: object = None
    collision: bool = False

    def to_dict(self):
        out = {"m": self.m, "k": self.k, "root": [self.root.real, self.root.imag],
               "iterations": self.iterations, "converged": self.converged,
               "collision": self.collision}
        if self.report is not None:
            out["degeneracy"] = self.report.to_dict()
        return out


@dataclass
class Spectrum:
    """Roots found near the reference grid.

    ``zero_multiplicity`` is the argument-principle count in a small box
    around 0 (the structural root of canonical systems); ``box_total`` is the
    count inside :func:`window_box` when requested.
    """

    entries: list
    zero_multiplicity: int
    extra: list = field(default_factory=list)
    box_total: int = None

    def roots(self):
        return [e.root for e in self.entries if e.converged]

    @property
    def root_count(self):
        return len(self.roots()) + len(self.extra) + self.zero_multiplicity


def window_box(reference, window, roots=(), margin=1.5):
    """Rectangle enclosing grid indices ``|k| <= window`` of every channel.

    The horizontal edges sit midway between the outermost in-window grid
    rows and the nearest out-of-window rows.
    """
    args = reference.arg
    top = 0.5 * (args.max() + TWO_PI * window + args.min() + TWO_PI * (window + 1))
    bottom = 0.5 * (args.min() - TWO_PI * window + args.max() - TWO_PI * (window + 1))
    re = list(reference.log_abs) + [0.0] + [r.real for r in roots]
    lo, hi = min(re) - margin, max(re) + margin
    center = complex(0.5 * (lo + hi), 0.5 * (top + bottom))
    return center, (0.5 * (hi - lo), 0.5 * (top - bottom))


def _zero_box(sys, reference, roots):
    dists = [abs(reference.lambda_tilde(m, 0)) for m in range(reference.n)]
    dists += [abs(r) for r in roots if r != 0]
    r = min(1.0, 0.5 * min(dists))
    return count_roots_box(sys, 0.0, (r, r))


def spectrum_near_grid(sys, reference, window, extra_seeds=(), box_check=False,
                       tol=1e-12, max_iter=50):
    """Newton roots seeded at ``lambda_tilde(m, k)``, ``|k| <= window``.

    Seeds that converge to the same root (within ``COLLISION_TOL``) are
    flagged, as are seeds that fail to converge; neither aborts the scan.
    """
    entries = []
    for m in range(reference.n):
        for k in range(-window, window + 1):
            seed = reference.lambda_tilde(m, k)
            try:
                res = newton_root(sys, seed, tol=tol, max_iter=max_iter)
                entry = SpectrumEntry(m, k, seed, res.root, res.iterations, True)
                entry.report = degeneracy(sys, res.root)
            except NotConverged as exc:
                entry = SpectrumEntry(m, k, seed, exc.last, exc.iterations, False)
            entries.append(entry)
    extra = []
    for j, seed in enumerate(extra_seeds):
        try:
            res = newton_root(sys, seed, tol=tol, max_iter=max_iter)
            e = SpectrumEntry(-1, j, complex(seed), res.root, res.iterations, True)
            e.report = degeneracy(sys, res.root)
        except NotConverged as exc:
            e = SpectrumEntry(-1, j, complex(seed), exc.last, exc.iterations, False)
        extra.append(e)
    conv = [e for e in entries + extra if e.converged]
    for i, a in enumerate(conv):
        for b in conv[i + 1:]:
            if abs(a.root - b.root) <= COLLISION_TOL:
                a.collision = b.collision = True
    roots = [e.root for e in conv]
    zero_mult = _zero_box(sys, reference, roots)
    spec = Spectrum(entries, zero_mult, extra)
    if box_check:
        center, hw = window_box(reference, window, roots)
        spec.box_total = count_roots_box(sys, center, hw)
    return spec


@dataclass
class TargetCheck:
    label: str
    m: int
    k: int
    lam: complex
    sigma_min_ratio: float
    vec_residual: float

    def to_dict(self):
        return {"label": self.label, "m": self.m, "k": self.k,
                "lambda": [self.lam.real, self.lam.imag],
                "sigma_min_ratio": self.sigma_min_ratio, "vec_residual": self.vec_residual}


@dataclass
class VerificationReport:
    entries: list
    tol_root: float
    tol_vec: float
    skipped: list = field(default_factory=list)

    @property
    def max_sigma_ratio(self):
        return max((e.sigma_min_ratio for e in self.entries), default=0.0)

    @property
    def max_vec_residual(self):
        return max((e.vec_residual for e in self.entries), default=0.0)

    @property
    def passed(self):
        return self.max_sigma_ratio <= self.tol_root and self.max_vec_residual <= self.tol_vec

    def failures(self):
        return [e for e in self.entries
                if e.sigma_min_ratio > self.tol_root or e.vec_residual > self.tol_vec]

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol_root": self.tol_root,
            "tol_vec": self.tol_vec,
            "max_sigma_min_ratio": self.max_sigma_ratio,
            "max_vec_residual": self.max_vec_residual,
            "checked": len(self.entries),
            "skipped": self.skipped,
            "entries": [e.to_dict() for e in self.entries],
        }

    def csv_rows(self):
        yield ("re_lambda", "im_lambda", "sigma_min_ratio", "vec_residual")
        for e in self.entries:
            yield (repr(e.lam.real), repr(e.lam.imag), repr(e.sigma_min_ratio),
                   repr(e.vec_residual))


def _check(sys, label, m, k, lam, d):
    D = delta_eval(sys, lam)
    rep = degeneracy_of_matrix(D, lam)
    d = np.asarray(d, dtype=complex)
    vec = float(np.linalg.norm(d.conj() @ D) / (np.linalg.norm(d) * rep.sigma_max))
    return TargetCheck(label, m, k, complex(lam), rep.sigma_min_ratio, vec)


def verify_assignment(sys, target, reference=None, N_v=None, tol_root=1e-6, tol_vec=1e-6):
    """Check ``det Delta(lam) = 0`` and ``d^* Delta(lam) = 0`` on all targets.

    Targets with ``|k| <= N_v`` (default: the target window) and every
    finite-part pair are checked.  A target at ``lam = 0`` is skipped; it is
    the structural root.
    """
    N_v = target.window if N_v is None else N_v
    if N_v > target.window:
        raise DomainError(f"N_v={N_v} exceeds the target window {target.window}")
    entries, skipped = [], []
    for m in range(target.n):
        for k in range(-N_v, N_v + 1):
            lam = target.lam_at(m, k)
            if lam == 0:
                skipped.append({"m": m, "k": k, "reason": "structural root at 0"})
                continue
            entries.append(_check(sys, "grid", m, k, lam, target.d_at(m, k)))
    if target.finite_part is not None:
        lam0, d0 = target.finite_part
        for j, l0 in enumerate(lam0):
            entries.append(_check(sys, "finite", -1, j, l0, d0[:, j]))
    return VerificationReport(entries, tol_root, tol_vec, skipped)
