"""
Oracle and invariant suite run by the `validate` command.

Every check builds small systems (L <= 34) and compares an operation against an
independent route to the same answer.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core.model import (ModelKind, ModelSpec, build_abelian_chains, build_hamiltonian,
                          build_momentum_hamiltonian, fibonacci_numbers, make_spec, pt_operator_check)
from ..core.settings import LabSettings
from ..core.spectral import decompose
from ..diagnostics.level_stats import POISSON_MEAN_RATIO, adjacent_gap_ratio, poisson_levels
from ..diagnostics.topology import winding_trace

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance under the optimal one-to-one matching of two complex multisets."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return math.inf
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if a.size else 0.0


def charpoly_eigenvalues(a: np.ndarray) -> np.ndarray:
    """
    Roots of det(zI - A): the determinant is sampled on a circle, the monomial
    coefficients recovered with an FFT and the roots found by np.roots.
    """
    n = a.shape[0]
    radius = max(float(np.linalg.norm(a, 2)), 1e-12)
    m = n + 1
    nodes = radius * np.exp(2j * np.pi * np.arange(m) / m)
    identity = np.eye(n)
    values = np.array([np.linalg.det(z * identity - a) for z in nodes])
    coeffs = np.fft.fft(values) / m
    coeffs = coeffs / radius ** np.arange(m)
    return np.roots(coeffs[::-1])


def random_specs(count: int, seed: int = 0, max_L: int = 34) -> List[ModelSpec]:
    """Random PBC specs of every kind on Fibonacci rings up to max_L."""
    rng = np.random.default_rng(seed)
    lengths = [f for f in fibonacci_numbers(max_L) if 3 <= f <= max_L]
    kinds = list(ModelKind)
    specs = []
    for _ in range(count):
        kind = kinds[rng.integers(len(kinds))]
        fields = dict(kind=kind, J=float(rng.uniform(0.1, 2.0)), V=float(rng.uniform(0.1, 3.0)),
                      phi=float(rng.uniform(-math.pi, math.pi)), L=int(lengths[rng.integers(len(lengths))]))
        if kind in (ModelKind.MODEL2, ModelKind.ABELIAN):
            fields["beta"] = float(rng.uniform(-1.0, 1.0))
        if kind in (ModelKind.MODEL3, ModelKind.ABELIAN):
            fields["gamma"] = float(rng.uniform(-1.0, 1.0))
        specs.append(make_spec(**fields))
    return specs


def check_momentum_position(tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for kind in (ModelKind.MODEL1, ModelKind.MODEL2):
        for L in (5, 8, 13):
            extra = {"beta": 0.3} if kind == ModelKind.MODEL2 else {}
            spec = make_spec(kind=kind, J=0.5, V=1.0, phi=math.pi / 10, L=L, **extra)
            real = np.linalg.eigvals(build_hamiltonian(spec).matrix)
            mom = np.linalg.eigvals(build_momentum_hamiltonian(spec).matrix)
            worst = max(worst, multiset_distance(real, mom))
    return CheckResult("momentum_position", worst <= tol, f"max spectral distance {worst:.2e}")


def check_abelian_union(tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    cases = [dict(kind=ModelKind.MODEL1, J=0.5), dict(kind=ModelKind.MODEL2, J=1.0, beta=0.4),
             dict(kind=ModelKind.MODEL3, J=1.0, gamma=0.3)]
    for case in cases:
        for phi in (0.0, math.pi):
            spec = make_spec(V=1.5, phi=phi, L=13, **case)
            up, down = build_abelian_chains(spec)
            union = np.concatenate([np.linalg.eigvals(up), np.linalg.eigvals(down)])
            full = np.linalg.eigvals(build_hamiltonian(spec).matrix)
            worst = max(worst, multiset_distance(union, full))
    return CheckResult("abelian_union", worst <= tol, f"max spectral distance {worst:.2e}")


def check_conjugation_closure(specs: List[ModelSpec], tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for spec in specs:
        eigs = np.linalg.eigvals(build_hamiltonian(spec).matrix)
        scale = max(1.0, float(np.abs(eigs).max()))
        worst = max(worst, multiset_distance(eigs, eigs.conj()) / scale)
    return CheckResult("conjugation_closure", worst <= tol,
                       f"max relative distance {worst:.2e} over {len(specs)} specs")


def check_biorthogonality(specs: List[ModelSpec], settings: LabSettings) -> CheckResult:
    worst_bi = worst_comp = worst_res = 0.0
    for spec in specs:
        h = build_hamiltonian(spec)
        dec = decompose(h, settings.spectral)
        worst_bi = max(worst_bi, dec.biorthogonality_residual())
        worst_comp = max(worst_comp, dec.completeness_residual())
        worst_res = max(worst_res, dec.eigen_residual(h.matrix) / dec.norm)
    passed = worst_bi <= 1e-8 and worst_comp <= 1e-6 and worst_res <= 1e-8
    return CheckResult("biorthogonality", passed,
                       f"bi-normalization {worst_bi:.2e}, completeness {worst_comp:.2e}, residual {worst_res:.2e}")


def check_charpoly(tol: float = 1e-6) -> CheckResult:
    spec = make_spec(kind=ModelKind.MODEL1, J=0.5, V=1.0, phi=math.pi / 10, L=5)
    a = build_hamiltonian(spec).matrix
    dist = multiset_distance(decompose(a).eigenvalues, charpoly_eigenvalues(a))
    return CheckResult("charpoly_oracle", dist <= tol, f"max distance to polynomial roots {dist:.2e}")


def check_hermitian_winding(settings: LabSettings) -> CheckResult:
    windings = []
    for spec in (make_spec(kind=ModelKind.MODEL3, J=1.0, V=0.5, phi=math.pi / 2, L=13),
                 make_spec(kind=ModelKind.MODEL2, J=1.0, V=1.5, phi=math.pi / 3, L=13)):
        windings.append(winding_trace(spec, 0.1 + 0.5j, settings.topology).winding)
    return CheckResult("hermitian_winding", all(w == 0 for w in windings), f"windings {windings}")


def check_winding_toy(settings: LabSettings) -> CheckResult:
    spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=0.0, beta=0.5, L=8)
    w = winding_trace(spec, 0.0, settings.topology).winding
    return CheckResult("winding_free_ring", w == 2, f"winding {w} (two spin copies winding once each)")


def check_pt_operator() -> CheckResult:
    report = pt_operator_check()
    worst = max(report["residuals"].values())
    return CheckResult("pt_operator", bool(report["passed"]), f"max residual {worst:.2e}")


def check_poisson_ratio(n: int = 100_000, seed: int = 0) -> CheckResult:
    g = adjacent_gap_ratio(poisson_levels(n, seed)).g_mean
    return CheckResult("poisson_gap_ratio", abs(g - POISSON_MEAN_RATIO) <= 0.01,
                       f"mean ratio {g:.4f} vs {POISSON_MEAN_RATIO:.4f}")


def run_validation(settings: Optional[LabSettings] = None, n_random: int = 100,
                   seed: int = 0) -> List[CheckResult]:
    """Run every oracle; each check is reported even when an earlier one fails."""
    settings = settings or LabSettings()
    specs = random_specs(n_random, seed)
    checks: List[Callable[[], CheckResult]] = [
        check_pt_operator,
        check_momentum_position,
        check_abelian_union,
        lambda: check_conjugation_closure(specs),
        lambda: check_biorthogonality(specs, settings),
        check_charpoly,
        lambda: check_hermitian_winding(settings),
        lambda: check_winding_toy(settings),
        lambda: check_poisson_ratio(seed=seed),
    ]
    results = []
    for check in checks:
        try:
            result = check()
        except Exception as e:
            name = getattr(check, "__name__", "check")
            result = CheckResult(name, False, f"{type(e).__name__}: {e}")
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"{result.name}: {'PASS' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)
    return results
