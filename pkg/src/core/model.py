"""
Model construction for the non-Abelian non-Hermitian AAH family.

Builds real-space and momentum-space Hamiltonians for Models 1-3, the scalar
Abelian reference chain, flux-threaded variants used by the winding numbers and
the decoupled spin chains of the Abelian limit.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import SpecValidationError
from .settings import parse_angle, parse_key_value_text

logger = logging.getLogger(__name__)

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Time-reversal rotation of the PT operator: U sigma_y U^dag = sigma_z.
PT_ROTATION = (SIGMA_0 - 1j * SIGMA_X) / math.sqrt(2.0)

GOLDEN_INVERSE = (math.sqrt(5.0) - 1.0) / 2.0

jkwargs = dict(nogil=True, cache=True)


class ModelKind(str, Enum):
    MODEL1 = "Model1"
    MODEL2 = "Model2"
    MODEL3 = "Model3"
    ABELIAN = "AbelianScalar"


class Boundary(str, Enum):
    PBC = "PBC"
    OBC = "OBC"


def fibonacci_numbers(limit: int) -> List[int]:
    """Fibonacci numbers 1, 1, 2, 3, 5, ... up to and including ``limit``."""
    fib = [1, 1]
    while fib[-1] + fib[-2] <= limit:
        fib.append(fib[-1] + fib[-2])
    return fib


def fibonacci_approximant(L: int) -> Tuple[int, int]:
    """
    Rational approximant p/q of the inverse golden ratio with q >= L.

    When L is itself a Fibonacci number F_k this returns (F_{k-1}, F_k), which is
    what periodic lattices need.
    """
    if L < 1:
        raise SpecValidationError("L", f"lattice length must be positive, got {L}")
    fib = fibonacci_numbers(max(2 * L, 2))
    for prev, cur in zip(fib, fib[1:]):
        if cur >= L:
            return prev, cur
    return fib[-2], fib[-1]


class ModelSpec(BaseModel):
    """Full parameterization of one Hamiltonian instance."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ModelKind
    J: float = 1.0
    V: float = 1.0
    phi: float = Field(0.0, ge=-math.pi, le=math.pi)
    beta: float = 0.0
    gamma: float = 0.0
    alpha_p: Optional[int] = Field(None, ge=0)
    alpha_q: Optional[int] = Field(None, ge=1)
    L: int = Field(610, ge=1)
    boundary: Boundary = Boundary.PBC
    flux: float = Field(0.0, ge=0.0, lt=2.0 * math.pi)

    @field_validator("J", "V", "beta", "gamma")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @model_validator(mode="after")
    def _check_kind_and_alpha(self) -> "ModelSpec":
        if self.beta != 0.0 and self.kind in (ModelKind.MODEL1, ModelKind.MODEL3):
            raise ValueError("beta is only defined for Model2 and AbelianScalar")
        if self.gamma != 0.0 and self.kind in (ModelKind.MODEL1, ModelKind.MODEL2):
            raise ValueError("gamma is only defined for Model3 and AbelianScalar")
        if (self.alpha_p is None) != (self.alpha_q is None):
            raise ValueError("alpha_p and alpha_q must be given together")
        if self.alpha_p is None:
            p, q = fibonacci_approximant(self.L)
            object.__setattr__(self, "alpha_p", p)
            object.__setattr__(self, "alpha_q", q)
        elif math.gcd(self.alpha_p, self.alpha_q) != 1:
            raise ValueError(f"alpha_p/alpha_q = {self.alpha_p}/{self.alpha_q} is not in lowest terms")
        return self

    @property
    def alpha(self) -> float:
        return self.alpha_p / self.alpha_q

    @property
    def n_components(self) -> int:
        return 1 if self.kind == ModelKind.ABELIAN else 2

    @property
    def dim(self) -> int:
        return self.n_components * self.L

    def with_updates(self, **updates: Any) -> "ModelSpec":
        """Validated copy with some fields replaced (alpha is re-derived when L changes)."""
        data = self.model_dump()
        if "L" in updates and "alpha_p" not in updates:
            data["alpha_p"] = None
            data["alpha_q"] = None
        data.update(updates)
        return make_spec(**data)


def make_spec(**fields: Any) -> ModelSpec:
    """Build a ModelSpec, reporting the first offending key on failure."""
    try:
        return ModelSpec(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first.get("loc", ())) or None
        raise SpecValidationError(key, first.get("msg", str(e))) from e


def hoppings(spec: ModelSpec, flux: Optional[float] = None) -> Tuple[complex, complex]:
    """Hopping pair (J_L, J_R), including the flux twist of Models 1-2 and the scalar chain."""
    if spec.kind == ModelKind.MODEL1:
        jl, jr = complex(spec.J), 0j
    elif spec.kind == ModelKind.MODEL3:
        jl, jr = complex(spec.J), complex(spec.J)
    else:
        jl, jr = spec.J * math.exp(-spec.beta), spec.J * math.exp(spec.beta)
        jl, jr = complex(jl), complex(jr)

    flux = spec.flux if flux is None else flux
    if flux and spec.kind != ModelKind.MODEL3:
        twist = np.exp(1j * flux / spec.L)
        jl, jr = jl / twist, jr * twist
    return jl, jr


def theta_values(spec: ModelSpec, flux: Optional[float] = None,
                 flux_divisor: Optional[float] = None) -> np.ndarray:
    """Phase modulation theta_n for n = 1..L (complex for Model 3 and the scalar chain)."""
    n = np.arange(1, spec.L + 1)
    theta = (2.0 * math.pi * spec.alpha * n).astype(complex)
    if spec.kind in (ModelKind.MODEL3, ModelKind.ABELIAN):
        theta = theta + 1j * spec.gamma
    flux = spec.flux if flux is None else flux
    if flux and spec.kind == ModelKind.MODEL3:
        divisor = spec.L if flux_divisor is None else flux_divisor
        theta = theta + flux / divisor
    return theta


def _trig_phase(phi: float) -> Tuple[float, float]:
    """(cos phi, sin phi), snapped to exact values on multiples of pi/2."""
    quarter = phi / (math.pi / 2.0)
    k = round(quarter)
    if abs(quarter - k) < 1e-14:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k % 4]
    return math.cos(phi), math.sin(phi)


def theta_matrix(theta_n: complex) -> np.ndarray:
    """Theta = exp(i theta sigma_y) exp(i theta sigma_z) from the closed-form exponentials."""
    c, s = np.cos(theta_n), np.sin(theta_n)
    exp_y = c * SIGMA_0 + 1j * s * SIGMA_Y
    exp_z = c * SIGMA_0 + 1j * s * SIGMA_Z
    return exp_y @ exp_z


def theta_matrix_swapped(theta_n: complex) -> np.ndarray:
    """exp(i theta sigma_z) exp(i theta sigma_y), the reversed product."""
    c, s = np.cos(theta_n), np.sin(theta_n)
    return (c * SIGMA_0 + 1j * s * SIGMA_Z) @ (c * SIGMA_0 + 1j * s * SIGMA_Y)


@dataclass(frozen=True)
class OnsiteBlock:
    """Pauli decomposition d0 s0 + dx sx + dy sy + dz sz of one onsite term."""

    d0: complex
    dx: complex
    dy: complex
    dz: complex

    def matrix(self) -> np.ndarray:
        return self.d0 * SIGMA_0 + self.dx * SIGMA_X + self.dy * SIGMA_Y + self.dz * SIGMA_Z


def onsite_block(theta_n: complex, phi: float) -> OnsiteBlock:
    """Coefficients of exp(-i phi) Theta_n + exp(i phi) Theta_n^-1."""
    cos_phi, sin_phi = _trig_phase(phi)
    cos2 = np.cos(2 * theta_n)
    sin2 = np.sin(2 * theta_n)
    d_yz = complex(sin_phi * sin2)
    return OnsiteBlock(
        d0=complex(cos_phi * (cos2 + 1)),
        dx=complex(sin_phi * (cos2 - 1)),
        dy=d_yz,
        dz=d_yz,
    )


def onsite_direct(theta_n: complex, phi: float) -> np.ndarray:
    """Direct evaluation of exp(-i phi) Theta + exp(i phi) Theta^-1 (reference for onsite_block)."""
    c, s = np.cos(theta_n), np.sin(theta_n)
    inv = (c * SIGMA_0 - 1j * s * SIGMA_Z) @ (c * SIGMA_0 - 1j * s * SIGMA_Y)
    return np.exp(-1j * phi) * theta_matrix(theta_n) + np.exp(1j * phi) * inv


def _onsite_coefficients(theta: np.ndarray, phi: float) -> Tuple[np.ndarray, ...]:
    cos_phi, sin_phi = _trig_phase(phi)
    cos2 = np.cos(2 * theta)
    sin2 = np.sin(2 * theta)
    d0 = cos_phi * (cos2 + 1)
    dx = sin_phi * (cos2 - 1)
    dyz = sin_phi * sin2
    return d0, dx, dyz, dyz


def onsite_blocks(spec: ModelSpec, flux: Optional[float] = None,
                  flux_divisor: Optional[float] = None) -> np.ndarray:
    """Stack of onsite blocks V*(d . sigma), shape (L, c, c) with c the component count."""
    theta = theta_values(spec, flux, flux_divisor)
    if spec.kind == ModelKind.ABELIAN:
        return (spec.V * np.cos(theta)).reshape(spec.L, 1, 1).astype(complex)

    d0, dx, dy, dz = _onsite_coefficients(theta, spec.phi)
    blocks = (d0[:, None, None] * SIGMA_0 + dx[:, None, None] * SIGMA_X
              + dy[:, None, None] * SIGMA_Y + dz[:, None, None] * SIGMA_Z)
    return spec.V * blocks


@njit(**jkwargs)
def _assemble(blocks, jl, jr, periodic):
    """Dense block-tridiagonal (plus wrap) matrix with J_L above and J_R below the diagonal."""
    n_sites, c, _ = blocks.shape
    dim = n_sites * c
    h = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(n_sites):
        for a in range(c):
            for b in range(c):
                h[n * c + a, n * c + b] += blocks[n, a, b]
    for n in range(n_sites):
        m = n + 1
        if m == n_sites:
            if not periodic:
                continue
            m = 0
        for a in range(c):
            h[n * c + a, m * c + a] += jl
            h[m * c + a, n * c + a] += jr
    return h


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Dense Hamiltonian together with the spec (and flux) it was built from."""

    matrix: np.ndarray
    spec: ModelSpec
    flux: float = 0.0
    momentum: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_components(self) -> int:
        return self.spec.n_components

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0.0, atol=atol))


def _require_pbc_ring(spec: ModelSpec) -> None:
    if spec.boundary == Boundary.PBC and spec.L != spec.alpha_q:
        raise SpecValidationError(
            "L", f"periodic lattices need L equal to the approximant denominator "
                 f"(L={spec.L}, alpha={spec.alpha_p}/{spec.alpha_q})")


def build_hamiltonian(spec: ModelSpec, flux: Optional[float] = None,
                      flux_divisor: Optional[float] = None) -> HamiltonianMatrix:
    """
    Real-space Hamiltonian of dimension (components * L).

    Args:
        spec: model parameters
        flux: overrides spec.flux (used by the winding-number scan)
        flux_divisor: Model 3 flux enters theta_n as flux/divisor (default L)
    """
    flux = spec.flux if flux is None else flux
    if spec.boundary == Boundary.OBC and flux:
        raise SpecValidationError("flux", "flux threading needs a periodic ring (boundary=PBC)")
    _require_pbc_ring(spec)

    blocks = onsite_blocks(spec, flux, flux_divisor)
    jl, jr = hoppings(spec, flux)
    matrix = _assemble(blocks, jl, jr, spec.boundary == Boundary.PBC)
    return HamiltonianMatrix(matrix=matrix, spec=spec, flux=float(flux))


def momentum_blocks(spec: ModelSpec, flux: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal blocks Lambda_l (l = 1..L, shape (L, 2, 2)) and the coupling Xi."""
    cos_phi, sin_phi = _trig_phase(spec.phi)
    jl, jr = hoppings(spec, flux)
    ell = np.arange(1, spec.L + 1)
    wave = np.exp(-2j * math.pi * spec.alpha * ell)
    scalar = jl * wave + jr / wave + spec.V * cos_phi
    lam = scalar[:, None, None] * SIGMA_0 - spec.V * sin_phi * SIGMA_X
    xi = (spec.V / 2) * (cos_phi * SIGMA_0 + sin_phi * SIGMA_X) \
        + (spec.V / 2j) * sin_phi * (SIGMA_Y + SIGMA_Z)
    return lam, xi


def build_momentum_hamiltonian(spec: ModelSpec, flux: Optional[float] = None) -> HamiltonianMatrix:
    """Dual (momentum-space) Hamiltonian of Models 1-2 under PBC."""
    if spec.kind not in (ModelKind.MODEL1, ModelKind.MODEL2):
        raise SpecValidationError("kind", f"momentum representation needs Model1 or Model2, got {spec.kind.value}")
    if spec.boundary != Boundary.PBC:
        raise SpecValidationError("boundary", "momentum representation needs PBC")
    _require_pbc_ring(spec)

    L = spec.L
    lam, xi = momentum_blocks(spec, flux)
    h = np.zeros((2 * L, 2 * L), dtype=complex)
    for idx in range(L):
        row = slice(2 * idx, 2 * idx + 2)
        up = (idx + 2) % L
        down = (idx - 2) % L
        h[row, row] += lam[idx]
        h[row, 2 * up:2 * up + 2] += xi
        h[row, 2 * down:2 * down + 2] += xi.conj().T
    return HamiltonianMatrix(matrix=h, spec=spec, flux=float(spec.flux if flux is None else flux), momentum=True)


def build_abelian_chains(spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Spin-up and spin-down scalar chains of the decoupled limit phi in {0, +-pi}.

    Returns:
        (H_up, H_down), each L x L, with potentials V(d0 + dz) and V(d0 - dz)
    """
    if spec.kind == ModelKind.ABELIAN:
        raise SpecValidationError("kind", "the scalar chain is already Abelian")
    _require_pbc_ring(spec)

    theta = theta_values(spec)
    d0, dx, dy, dz = _onsite_coefficients(theta, spec.phi)
    if np.any(dx != 0) or np.any(dy != 0):
        raise SpecValidationError("phi", f"interchain couplings do not vanish at phi={spec.phi}")

    jl, jr = hoppings(spec)
    periodic = spec.boundary == Boundary.PBC
    chains = []
    for sign in (+1, -1):
        potential = spec.V * (d0 + sign * dz)
        chains.append(_assemble(potential.reshape(spec.L, 1, 1).astype(complex), jl, jr, periodic))
    return chains[0], chains[1]


def pt_operator_check(V: float = 1.0, phi: float = math.pi / 3, J: float = 1.0,
                      beta: float = 0.3, n_samples: int = 8, tol: float = 1e-12) -> Dict[str, Any]:
    """
    Algebraic check of the PT structure.

    Verifies U sigma U^dag for U = exp(-i pi/4 sigma_x), that U Xi^* U^dag = Xi and
    U Lambda_{-l}^* U^dag = Lambda_l for sampled momenta, and that the real-space onsite
    terms satisfy U M_{-n}^* U^dag = M_n for complex theta.
    """
    u, u_dag = PT_ROTATION, PT_ROTATION.conj().T
    residuals = {
        "sigma_y_to_sigma_z": np.abs(u @ SIGMA_Y @ u_dag - SIGMA_Z).max(),
        "sigma_z_to_minus_sigma_y": np.abs(u @ SIGMA_Z @ u_dag + SIGMA_Y).max(),
        "sigma_x_fixed": np.abs(u @ SIGMA_X @ u_dag - SIGMA_X).max(),
    }

    cos_phi, sin_phi = _trig_phase(phi)
    xi = (V / 2) * (cos_phi * SIGMA_0 + sin_phi * SIGMA_X) + (V / 2j) * sin_phi * (SIGMA_Y + SIGMA_Z)
    residuals["xi_block"] = np.abs(u @ xi.conj() @ u_dag - xi).max()
    residuals["xi_dagger_block"] = np.abs(u @ xi.conj().T.conj() @ u_dag - xi.conj().T).max()

    jl, jr = J * math.exp(-beta), J * math.exp(beta)
    alpha = GOLDEN_INVERSE

    def lam(k: int) -> np.ndarray:
        w = np.exp(-2j * math.pi * alpha * k)
        return (jl * w + jr / w + V * cos_phi) * SIGMA_0 - V * sin_phi * SIGMA_X

    lam_res = 0.0
    onsite_res = 0.0
    for ell in range(1, n_samples + 1):
        lam_res = max(lam_res, np.abs(u @ lam(-ell).conj() @ u_dag - lam(ell)).max())

        theta_plus = 2 * math.pi * alpha * ell + 0.4j
        theta_minus = -2 * math.pi * alpha * ell + 0.4j
        m_plus = onsite_block(theta_plus, phi).matrix()
        m_minus = onsite_block(theta_minus, phi).matrix()
        onsite_res = max(onsite_res, np.abs(u @ m_minus.conj() @ u_dag - m_plus).max())
    residuals["lambda_blocks"] = lam_res
    residuals["onsite_blocks"] = onsite_res

    checks = {name: bool(value <= tol) for name, value in residuals.items()}
    report = {
        "checks": checks,
        "residuals": {name: float(value) for name, value in residuals.items()},
        "passed": all(checks.values()),
    }
    if not report["passed"]:
        logger.warning(f"PT operator check failed: {report['residuals']}")
    return report


def abelian_critical_point(spec: ModelSpec) -> Dict[str, Any]:
    """
    Known transition point of the Abelian limit the spec belongs to.

    Two-component models reduce to two copies of the scalar chain at phi in {0, +-pi};
    the scalar chain has e^|gamma_c| = |2J/V| (beta = 0) and e^|beta_c| = |V/2J| (gamma = 0).
    """
    J, V = abs(spec.J), abs(spec.V)
    if spec.kind == ModelKind.MODEL1:
        return {"parameter": "J", "value": V / 2.0}
    if spec.kind == ModelKind.MODEL2:
        return {"parameter": "beta", "value": math.log(V / (2.0 * J))}
    if spec.kind == ModelKind.MODEL3:
        return {"parameter": "gamma", "value": math.log(2.0 * J / V) / 2.0}
    if spec.beta == 0.0:
        return {"parameter": "gamma", "value": math.log(2.0 * J / V)}
    return {"parameter": "beta", "value": math.log(V / (2.0 * J))}


SPEC_KEYS = ("kind", "J", "V", "phi", "beta", "gamma", "alpha_p", "alpha_q", "L", "boundary", "flux")


def spec_from_mapping(values: Dict[str, Any]) -> ModelSpec:
    """ModelSpec from string-or-typed values keyed by the flat spec keys."""
    fields: Dict[str, Any] = {}
    for key, value in values.items():
        if key not in SPEC_KEYS:
            raise SpecValidationError(key, "unknown spec key")
        if value is None:
            continue
        try:
            if key in ("phi", "flux"):
                fields[key] = parse_angle(value)
            elif key in ("J", "V", "beta", "gamma"):
                fields[key] = float(value)
            elif key in ("alpha_p", "alpha_q", "L"):
                fields[key] = int(value)
            else:
                fields[key] = str(value)
        except (TypeError, ValueError) as e:
            raise SpecValidationError(key, f"invalid value {value!r}: {e}") from e
    if "kind" not in fields:
        raise SpecValidationError("kind", "missing required key")
    return make_spec(**fields)


def spec_from_text(text: str) -> ModelSpec:
    return spec_from_mapping(dict(parse_key_value_text(text)))


def spec_to_text(spec: ModelSpec) -> str:
    """Flat key=value rendering; floats use repr so the text round-trips exactly."""
    lines = []
    for key in SPEC_KEYS:
        value = getattr(spec, key)
        if isinstance(value, Enum):
            value = value.value
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"


def load_spec(path: str) -> ModelSpec:
    with open(path, "r") as f:
        return spec_from_text(f.read())
