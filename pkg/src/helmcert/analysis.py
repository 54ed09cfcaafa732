"""Numerical and exact regularity checks.

Smallest singular values of ``K_k`` over wave-number sweeps, the critical
wave number of the symmetric nine-node mesh, and the exact determinant of
the reduced quadrilateral system as a polynomial in ``lam = k^2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fem import (
    SystemMatrices,
    assemble,
    assemble_1d_hp,
    assemble_p1,
    reduced_quad_local_matrices,
    system_matrix,
)
from .mesh import (
    EPS_ANGLE,
    TALPHA_CENTER,
    TALPHA_CORNERS,
    TALPHA_RING,
    Mesh,
    cot_sum,
    make_talpha,
    make_tensor_quad_mesh,
    weakly_acute,
)
from .rational import RationalMatrix, RationalPoly, format_poly

SVD_CAP = 2000
REGULAR_TOL = 1e-12
CONSISTENCY_TOL = 1e-10


class RootBracketError(ValueError):
    """Real positive roots exist, but none inside the requested interval."""


def report(claim: str, parameters: dict, values: dict, verdict: bool) -> dict:
    return {"claim": claim, "parameters": parameters, "values": values, "verdict": "verified" if verdict else "failed"}


# -- singular values ------------------------------------------------------------------


def singular_extremes(K) -> tuple[float, float]:
    """``(sigma_min, sigma_max)`` of a square matrix by dense SVD."""
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("square matrix expected")
    if K.shape[0] > SVD_CAP:
        raise ValueError(f"dimension {K.shape[0]} exceeds the dense SVD cap of {SVD_CAP}")
    dense = K.toarray() if sp.issparse(K) else np.asarray(K)
    if dense.size == 0:
        return 0.0, 0.0
    s = np.linalg.svd(dense, compute_uv=False)
    return float(s[-1]), float(s[0])


def smallest_singular_value(K) -> float:
    return singular_extremes(K)[0]


def relative_sigma(K) -> float:
    smin, smax = singular_extremes(K)
    return smin / smax if smax > 0 else 0.0


@dataclass
class SigmaReport:
    k_values: list[float]
    sigma_min: list[float]
    norm: list[float]

    @property
    def ratios(self) -> list[float]:
        return [s / n if n > 0 else 0.0 for s, n in zip(self.sigma_min, self.norm)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "sigma_min", "norm", "ratio"])
        for k, s, n, r in zip(self.k_values, self.sigma_min, self.norm, self.ratios):
            w.writerow([repr(k), repr(s), repr(n), repr(r)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"k": self.k_values, "sigma_min": self.sigma_min, "norm": self.norm, "ratio": self.ratios}


def default_k_grid(k_min: float = 0.1, k_max: float = 20.0, n: int = 60) -> list[float]:
    return np.geomspace(k_min, k_max, n).tolist()


def sigma_min_sweep(target: Mesh | SystemMatrices, k_values: Sequence[float] | None = None, p: int = 1) -> SigmaReport:
    """``sigma_min(K_k)`` and ``||K_k||_2`` for every sampled ``k``."""
    ks = [float(k) for k in (default_k_grid() if k_values is None else k_values)]
    if any(k == 0 for k in ks):
        raise ValueError("k = 0 is not an admissible wave number")
    sys = target if isinstance(target, SystemMatrices) else assemble(target, p)
    smins, norms = [], []
    for k in ks:
        smin, smax = singular_extremes(system_matrix(sys, k).K)
        smins.append(smin)
        norms.append(smax)
    return SigmaReport(ks, smins, norms)


# -- the symmetric nine-node mesh ------------------------------------------------------


def talpha_pattern() -> np.ndarray:
    """Candidate null vector: alternating signs on the ring, zero elsewhere."""
    w = np.zeros(9)
    w[list(TALPHA_RING)] = [1.0, -1.0, 1.0, -1.0]
    return w


@dataclass
class CriticalWaveNumber:
    k: float
    consistency: float
    ratios: list[float]
    residual: float
    w: np.ndarray = field(repr=False)
    system: SystemMatrices = field(repr=False)

    def __iter__(self):
        return iter((self.k, self.consistency))


def talpha_denominator(alpha: float) -> float:
    """``(M w)`` on the first ring node; a positive critical ratio needs it positive."""
    sys = assemble_p1(make_talpha(alpha))
    return float((sys.M @ talpha_pattern())[TALPHA_RING[0]])


def critical_k_talpha(alpha: float) -> CriticalWaveNumber:
    """Wave number at which the alternating ring pattern solves ``K_k w = 0``.

    Every row with ``(M w)_j != 0`` must give the same ratio
    ``(A w)_j / (M w)_j``; rows with ``(M w)_j = 0`` must have ``(A w)_j = 0``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    sys = assemble_p1(make_talpha(alpha))
    w = talpha_pattern()
    Aw, Mw = sys.A @ w, sys.M @ w
    scale_a = abs(sys.A).max() * np.abs(w).sum()
    scale_m = abs(sys.M).max() * np.abs(w).sum()
    active = np.abs(Mw) > 1e-12 * scale_m
    if np.any(np.abs(Aw[~active]) > CONSISTENCY_TOL * scale_a):
        raise ValueError("pattern is not an eigenvector: rows without mass coupling carry stiffness")
    ratios = Aw[active] / Mw[active]
    if np.any(ratios <= 0):
        raise ValueError(f"no positive critical ratio for alpha={alpha}: mass coupling has the wrong sign (b <= 2d)")
    mean = float(ratios.mean())
    spread = float((ratios.max() - ratios.min()) / mean)
    if spread > CONSISTENCY_TOL:
        raise ValueError(f"row ratios disagree (relative spread {spread:.3e})")
    k = math.sqrt(mean)
    K = system_matrix(sys, k).K
    kn = singular_extremes(K)[1]
    residual = float(np.linalg.norm(K @ w) / (kn * np.linalg.norm(w)))
    return CriticalWaveNumber(k, spread, ratios.tolist(), residual, w, sys)


def alpha_star_estimate(tolerance: float = 1e-6, samples: int = 200) -> float:
    """Threshold in ``alpha`` where the ring mass coupling changes sign.

    A uniform scan of (0, 1) brackets the first sign change, which is then
    bisected to ``tolerance``.  If the coupling keeps its positive sign on
    the whole interval, 1.0 is returned: every alpha in (0, 1) then admits
    a critical wave number.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    grid = np.linspace(0, 1, samples + 1)[1:-1]
    prev = None
    for a in grid:
        if talpha_denominator(a) <= 0:
            lo, hi = (prev, a) if prev is not None else (0.0, a)
            while hi - lo > tolerance:
                mid = (lo + hi) / 2
                lo, hi = (mid, hi) if talpha_denominator(mid) > 0 else (lo, mid)
            return (lo + hi) / 2
        prev = a
    return 1.0


# -- reduced determinant -------------------------------------------------------------

DET_P1 = RationalPoly([Fraction(-16, 3), Fraction(-16, 9)])
DET_P2 = (RationalPoly([4, 1]) ** 2 * RationalPoly([60, 8, 1])).scale(Fraction(65536, 4100625))
P3_CUBIC_A = RationalPoly([3150, 270, 15, 1])
P3_CUBIC_B = RationalPoly([450, 495, 60, 4])
P3_SHAPE = -(P3_CUBIC_A * P3_CUBIC_B**2)
P4_SEXTIC = RationalPoly([-3492720, -161028, 41013, 10800, 810, 36, 1])


def reduced_matrix_at(p: int, lam) -> RationalMatrix:
    S, Mr = reduced_quad_local_matrices(p)
    return S - Mr.scale(lam)


def det_polynomial_reduced_quad(p: int, points: Sequence | None = None) -> RationalPoly:
    """Exact ``det(S - lam Mr)`` from ``p^2 + 1`` exact evaluations."""
    if p not in (1, 2, 3, 4):
        raise ValueError("p must be 1, 2, 3 or 4")
    S, Mr = reduced_quad_local_matrices(p)
    xs = [Fraction(x) for x in (range(p * p + 1) if points is None else points)]
    if len(xs) != p * p + 1:
        raise ValueError(f"{p * p + 1} interpolation points are needed")
    ys = [(S - Mr.scale(x)).det() for x in xs]
    return RationalPoly.interpolate(xs, ys)


def positive_real_root(poly: RationalPoly, interval_cap: float = 1e6, tol: float = 1e-12) -> float | None:
    """Smallest root in ``(0, interval_cap]``, or ``None`` if there is none at all.

    Root counts come from the Sturm sequence of the square-free part; the
    isolated root is refined by exact bisection to relative width ``tol``.
    Raises :class:`RootBracketError` when positive roots exist only beyond
    the cap.
    """
    if poly.is_zero():
        raise ValueError("the zero polynomial has no isolated roots")
    sf = poly.squarefree()
    seq = sf.sturm_sequence()
    cap = Fraction(interval_cap)
    zero = Fraction(0)
    at_zero = sf.sign_changes(zero, seq)
    if at_zero - sf.sign_changes(cap, seq) == 0:
        if at_zero - sf.sign_changes(None, seq) > 0:
            raise RootBracketError(f"positive roots exist beyond the cap {interval_cap}")
        return None
    lo, hi = zero, cap
    # narrow to an interval holding exactly the smallest root
    while True:
        mid = (lo + hi) / 2
        left = at_zero - sf.sign_changes(mid, seq)
        if left >= 1:
            hi = mid
            if left == 1 and sf.sign_changes(lo, seq) - sf.sign_changes(hi, seq) == 1:
                break
        else:
            lo = mid
    if sf(hi) == 0:
        return float(hi)
    s_hi = sf(hi) > 0
    while hi - lo > tol * max(1, hi):
        mid = (lo + hi) / 2
        v = sf(mid)
        if v == 0:
            return float(mid)
        lo, hi = (lo, mid) if (v > 0) == s_hi else (mid, hi)
        # keep the denominators small
        lo = Fraction(lo).limit_denominator(10**30) if lo.denominator > 10**40 else lo
    return float((lo + hi) / 2)


def count_positive_roots(poly: RationalPoly) -> int:
    return poly.squarefree().count_roots(0, None)


def p3_constant(det3: RationalPoly | None = None) -> Fraction:
    """Exact ratio between the p = 3 determinant and its factored shape."""
    det3 = det3 if det3 is not None else det_polynomial_reduced_quad(3)
    q, r = det3.divmod(P3_SHAPE)
    if not r.is_zero() or q.degree != 0:
        raise ValueError("p = 3 determinant is not a constant multiple of the factored shape")
    return q.coeffs[0]


def verify_p4_singularity(interval_cap: float = 1e6) -> dict:
    lam = positive_real_root(P4_SEXTIC, interval_cap)
    if lam is None:
        raise RuntimeError("the degree-6 factor has no positive root")
    det4 = det_polynomial_reduced_quad(4)
    _, rem = det4.divmod(P4_SEXTIC**2)
    ratios = {}
    for label, k in (("at_root", math.sqrt(lam)), ("off_root", 1.2 * math.sqrt(lam))):
        ratios[label] = relative_sigma(reduced_matrix_at(4, Fraction(k * k)).to_numpy())
    ok = ratios["at_root"] < 1e-8 and ratios["off_root"] > 1e-4 and rem.is_zero()
    return report(
        "degree-4 reduced local system is singular at a positive wave number",
        {"p": 4, "interval_cap": interval_cap},
        {
            "lambda_star": lam,
            "k_star": math.sqrt(lam),
            "factor_at_zero": str(P4_SEXTIC(Fraction(0))),
            "sigma_ratio_at_root": ratios["at_root"],
            "sigma_ratio_off_root": ratios["off_root"],
            "factor_squared_divides_determinant": rem.is_zero(),
        },
        ok,
    )


def quad_lemma_report(p: int) -> dict:
    det = det_polynomial_reduced_quad(p)
    values = {"determinant": format_poly(det), "degree": det.degree, "positive_roots": count_positive_roots(det)}
    if p == 1:
        ok = det == DET_P1
    elif p == 2:
        ok = det == DET_P2
    elif p == 3:
        c = p3_constant(det)
        values["constant"] = str(c)
        ok = c > 0 and values["positive_roots"] == 0
    else:
        sub = verify_p4_singularity()
        values.update(sub["values"])
        ok = sub["verdict"] == "verified"
    if p < 4:
        ok = ok and values["positive_roots"] == 0
    claim = "reduced local system is regular for all k" if p < 4 else sub["claim"]
    return report(claim, {"p": p}, values, ok)


# -- property checks ------------------------------------------------------------------


def verify_angle_lemma(mesh: Mesh, eps: float = EPS_ANGLE) -> dict:
    """Non-positive stiffness coupling across an interior edge iff it is weakly acute."""
    sys = assemble_p1(mesh)
    A = sys.A.tocsr()
    scale = float(np.abs(A.diagonal()).max())
    rows, violations = [], []
    for e in mesh.interior_edges:
        entry = float(A[e.a, e.b])
        acute = weakly_acute(mesh, e.key, eps)
        agree = (entry <= eps * scale) == acute
        rows.append({"edge": list(e.key), "entry": entry, "cot_sum": cot_sum(mesh, e.key), "weakly_acute": acute})
        if not agree:
            violations.append(list(e.key))
    return report(
        "stiffness coupling sign matches the opposite-angle condition",
        {"n_nodes": mesh.n_nodes, "n_interior_edges": len(rows), "eps": eps},
        {"violations": violations, "edges": rows},
        not violations,
    )


def _random_breaks(rng: np.random.Generator, n: int, lo=0.0, hi=1.0) -> np.ndarray:
    widths = rng.uniform(0.3, 1.7, n)
    return lo + (hi - lo) * np.concatenate([[0], np.cumsum(widths)]) / widths.sum()


def verify_1d_regularity(n_cases: int = 200, seed: int = 0, threshold: float = REGULAR_TOL) -> dict:
    rng = np.random.default_rng(seed)
    worst = math.inf
    cases = []
    for _ in range(n_cases):
        n = int(rng.integers(1, 21))
        p = int(rng.integers(1, 6))
        k = float(np.exp(rng.uniform(np.log(0.1), np.log(50))))
        sys = assemble_1d_hp(_random_breaks(rng, n), p)
        r = relative_sigma(system_matrix(sys, k).K)
        worst = min(worst, r)
        cases.append({"elements": n, "p": p, "k": k, "ratio": r})
    return report(
        "hp interval discretizations are regular for every k",
        {"n_cases": n_cases, "seed": seed, "threshold": threshold},
        {"min_ratio": worst, "cases": cases},
        worst > threshold,
    )


def verify_corridor_theorems(seed: int = 0, n_k: int = 40, threshold: float = 1e-11) -> dict:
    """Sweeps over one-row and two-row rectangle strips and small tensor meshes."""
    rng = np.random.default_rng(seed)
    configs = [
        ("one corridor", _random_breaks(rng, 5, 0, 5), np.array([0.0, 1.0]), 2),
        ("two corridors", _random_breaks(rng, 4, 0, 4), np.array([0.0, 0.7, 1.5]), 3),
    ]
    for p in (1, 2, 3):
        configs.append((f"tensor 4x3 p={p}", _random_breaks(rng, 4, 0, 2), _random_breaks(rng, 3, 0, 1.5), p))
    ks = np.sort(rng.uniform(0, 20, n_k))
    ks[ks == 0] = 1e-3
    results, ok = [], True
    for name, xs, ys, p in configs:
        rep = sigma_min_sweep(make_tensor_quad_mesh(xs, ys), ks.tolist(), p)
        worst = min(rep.ratios)
        ok = ok and worst > threshold
        results.append({"case": name, "p": p, "n_dof": None, "min_ratio": worst, "argmin_k": rep.k_values[int(np.argmin(rep.ratios))]})
    return report(
        "rectangle strips and low-degree tensor meshes are regular for every k",
        {"seed": seed, "n_k": n_k, "threshold": threshold},
        {"cases": results},
        ok,
    )
