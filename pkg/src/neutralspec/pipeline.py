"""Assign, reconstruct and verify in one pass."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import (
    finite_part_posttransform,
    finite_part_pretransform,
    lemma2_adjust,
    solve_assignment,
    spectral_equation_residual,
)
from .errors import SolverSingular
from .forward import verify_assignment
from .reconstruct import p_to_realization
from .spectral import alpha_decompose, closeness_report


@dataclass
class AssignResult:
    """Realized system plus everything needed to verify it.

    ``target`` is what the realization is checked against: the input target,
    or the repaired one when the randomized adjustment ran.
    """

    system: object
    target: object
    solution: object
    diagnostics: dict = field(default_factory=dict)


def _map_back(base_target, source, C):
    # f = (I - C/lam)^* d  =>  d = (I - C/lam)^{-*} f
    n, W = base_target.n, base_target.window
    eye = np.eye(n)
    d = np.empty_like(base_target.d)
    for m in range(n):
        for i, lv in enumerate(base_target.lam[m]):
            T = C if lv == 0 else eye - C / lv
            d[m, i] = np.linalg.solve(T.conj().T, base_target.d[m, i])
    lam = np.array([source.lam_window(m, W) for m in range(n)])
    return source.replace(window=W, lam=lam, d=d)


def spectral_equation_max(solution, target, frame):
    """Largest component-wise spectral-equation residual over all targets."""
    ref = target.reference
    worst = 0.0
    for m0 in range(target.n):
        for k in range(-target.window, target.window + 1):
            r = spectral_equation_residual(solution, ref, frame, target.lam_at(m0, k),
                                           target.d_at(m0, k))
            worst = max(worst, float(np.max(r)))
    return worst


def assign(target, solve_window=None, repair=True, repair_epsilon=1e-3, seed=0,
           parallel=False):
    """Realize ``target`` as a system.

    Runs the finite-part pre-transform when the target has a finite part,
    solves the truncated systems (repairing the coordinate table on
    :class:`SolverSingular` if ``repair``), reconstructs the canonical
    kernels and applies the post-transform.
    """
    reference, frame = target.reference, target.frame
    diag = {"repair": {"ran": False}}
    fpt = None
    base = target
    if target.finite_part is not None:
        fpt = finite_part_pretransform(target, frame)
        base = fpt.target
        diag["finite_part"] = fpt.to_dict()
    N_s = 4 * base.window if solve_window is None else int(solve_window)
    diag["closeness"] = closeness_report(base, reference, frame).to_dict()
    try:
        sol = solve_assignment(reference, frame, base, N_s, parallel=parallel)
    except SolverSingular as exc:
        if not repair:
            raise
        out = lemma2_adjust(alpha_decompose(base, frame), base, reference, repair_epsilon,
                            seed, base.window, N_s=N_s)
        base = out.target
        sol = solve_assignment(reference, frame, base, N_s, alpha=out.alpha,
                               parallel=parallel)
        diag["repair"] = {
            "ran": True, "channel": exc.channel, "condition_before": exc.condition,
            "delta_norm_sq": out.delta_norm, "retries": out.retries,
            "conditions_after": out.conditions.tolist(),
        }
    verify_target = target
    if diag["repair"]["ran"]:
        verify_target = base if fpt is None else _map_back(base, target, fpt.C)
        diag["repair"]["adjusted_d"] = verify_target.d
    hat = p_to_realization(sol, frame, reference)
    system = hat if fpt is None else finite_part_posttransform(hat, fpt.C)
    diag["solve_window"] = N_s
    diag["conditions"] = sol.conditions.tolist()
    diag["solve_residuals"] = sol.residuals.tolist()
    diag["spectral_equation_residual"] = spectral_equation_max(sol, base, frame)
    if fpt is not None:
        diag["forward_seeds"] = target.finite_part[0]
    return AssignResult(system, verify_target, sol, diag)


def roundtrip(target, tol_root=1e-6, tol_vec=1e-6, N_v=None, **kwargs):
    """Assign then verify; returns ``(AssignResult, VerificationReport)``."""
    res = assign(target, **kwargs)
    report = verify_assignment(res.system, res.target, target.reference, N_v=N_v,
                               tol_root=tol_root, tol_vec=tol_vec)
    return res, report
