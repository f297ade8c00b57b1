"""
Surface charts for the local models V_t = {w1² + w2² + w3² = t}

Carte olomorfe, forma di volume olomorfa e operatori differenziali (Hessiana
complessa, Laplaciano, rapporto di Monge-Ampère) sui modelli locali V_0 e V_t.

A chart solves one ambient coordinate w_k = ±√(t − u1² − u2²) and keeps the
other two, in cyclic order, as free coordinates u = (w_{k+1}, w_{k+2}).
"""

import cmath
import logging
import math
from functools import lru_cache
from typing import Callable, Optional, Tuple

import attr
import numpy as np

from .errors import (BranchCut, DegenerateChart, InvalidAlpha, NotPositive,
                     StepUnderflow, UnregisteredRadial)

logger = logging.getLogger(__name__)

CHART_IDS = ("W1+", "W1-", "W2+", "W2-", "W3+", "W3-")

# free coordinates of chart k, cyclic so that Ω = du1∧du2/(2 w_k) in every chart
FREE_INDICES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}

DEGENERATE_CHART_THRESHOLD = 1e-8
DEFAULT_EPS_FD = 1e-3
MIN_FD_STEP = 1e-12


def _complex_triple(values) -> Tuple[complex, complex, complex]:
    out = tuple(complex(v) for v in values)
    if len(out) != 3:
        raise ValueError(f"Attesi 3 coefficienti complessi, ricevuti {len(out)}")
    return out


def _check_open_interval(low: float, high: float, name: str):
    def validator(instance, attribute, value):
        if not (low < value < high):
            raise ValueError(f"{name} deve stare in ({low}, {high}), ricevuto {value}")
    return validator


@attr.s(frozen=True, slots=True)
class GluingParams:
    """
    Coupled gluing parameters.

    Only δ is stored: t = δ⁴ is derived so that √t = δ² holds by construction.

    Args:
        delta: vanishing-cycle scale, δ > 0
        alpha: annulus exponent in [0, 2]
        beta: weight exponent, strictly inside (−2, 0)
        gamma: Hölder exponent in (0, 1)
        c2: quadratic coefficient of the model central potential |z| + c2|z|²
        ph_coeffs: coefficients a of the pluriharmonic correction Re(a·w)
        match_offset: constant κ the match-region blend adds to φ¹_δ − p_t
    """

    delta: float = attr.ib(converter=float)
    alpha: float = attr.ib(default=4.0 / 3.0, converter=float)
    beta: float = attr.ib(default=-1.0, converter=float,
                          validator=_check_open_interval(-2.0, 0.0, "beta"))
    gamma: float = attr.ib(default=0.5, converter=float,
                           validator=_check_open_interval(0.0, 1.0, "gamma"))
    c2: float = attr.ib(default=0.05, converter=float)
    ph_coeffs: Tuple[complex, complex, complex] = attr.ib(default=(0, 0, 0),
                                                          converter=_complex_triple)
    match_offset: float = attr.ib(default=0.0, converter=float)

    @delta.validator
    def _check_delta(self, attribute, value):
        if not (value > 0.0 and math.isfinite(value)):
            raise ValueError(f"delta deve essere positivo e finito, ricevuto {value}")

    @alpha.validator
    def _check_alpha(self, attribute, value):
        if not (0.0 <= value <= 2.0):
            raise InvalidAlpha(f"alpha deve stare in [0, 2], ricevuto {value}")

    @property
    def t(self) -> float:
        return self.delta ** 4

    @property
    def sqrt_t(self) -> float:
        return self.delta ** 2

    @property
    def glue_scale(self) -> float:
        """|w| = δ^{4/3}, inner edge of the glue region"""
        return self.delta ** (4.0 / 3.0)

    @property
    def is_radial(self) -> bool:
        return all(c == 0 for c in self.ph_coeffs)

    def with_delta(self, delta: float) -> "GluingParams":
        return attr.evolve(self, delta=delta)


def _chart_parts(chart_id: str) -> Tuple[int, int]:
    if chart_id not in CHART_IDS:
        raise ValueError(f"chart_id sconosciuto: {chart_id!r}")
    return int(chart_id[1]) - 1, (1 if chart_id[2] == "+" else -1)


def _on_principal_cut(z: complex) -> bool:
    return z.imag == 0.0 and z.real < 0.0


def _principal_sqrt(z: complex) -> complex:
    # points on the cut are sent to the upper side, whatever the sign of the zero
    if _on_principal_cut(z):
        return 1j * math.sqrt(-z.real)
    return cmath.sqrt(z)


@attr.s(frozen=True, slots=True)
class SurfacePoint:
    """A point of V_t carried in one of the six charts W1±, W2±, W3±"""

    chart_id: str = attr.ib()
    u: Tuple[complex, complex] = attr.ib(converter=lambda v: tuple(complex(c) for c in v))
    t: float = attr.ib(converter=float)

    @chart_id.validator
    def _check_chart(self, attribute, value):
        _chart_parts(value)

    @u.validator
    def _check_u(self, attribute, value):
        if len(value) != 2:
            raise ValueError(f"u deve avere 2 coordinate, ricevute {len(value)}")

    @t.validator
    def _check_t(self, attribute, value):
        if value < 0.0:
            raise ValueError(f"t deve essere non negativo, ricevuto {value}")

    @property
    def chart_index(self) -> int:
        return _chart_parts(self.chart_id)[0]

    @property
    def branch(self) -> int:
        return _chart_parts(self.chart_id)[1]

    @property
    def free_indices(self) -> Tuple[int, int]:
        return FREE_INDICES[self.chart_index]

    def solved_value(self, u: Optional[Tuple[complex, complex]] = None) -> complex:
        u1, u2 = self.u if u is None else u
        return self.branch * _principal_sqrt(complex(self.t) - u1 * u1 - u2 * u2)

    def ambient(self, u: Optional[Tuple[complex, complex]] = None) -> np.ndarray:
        """Ambient coordinates w ∈ ℂ³ (optionally for perturbed free coordinates)"""
        uu = self.u if u is None else u
        w = np.empty(3, dtype=complex)
        i, j = self.free_indices
        w[i], w[j] = uu
        w[self.chart_index] = self.solved_value(uu)
        return w


@attr.s(frozen=True, slots=True, eq=False)
class HermitianForm2:
    """2×2 Hermitian matrix of a (1,1)-form in the chart frame"""

    entries: np.ndarray = attr.ib(converter=lambda m: np.array(m, dtype=complex))

    @entries.validator
    def _check_hermitian(self, attribute, value):
        if value.shape != (2, 2):
            raise ValueError(f"Matrice 2x2 attesa, ricevuta forma {value.shape}")
        scale = 1.0 + float(np.max(np.abs(value)))
        if np.max(np.abs(value - value.conj().T)) > 1e-12 * scale:
            raise ValueError("La forma non è Hermitiana")

    def det(self) -> float:
        m = self.entries
        return float((m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def is_positive(self) -> bool:
        return self.min_eigenvalue() > 0.0

    def scaled(self, factor: float) -> "HermitianForm2":
        return HermitianForm2(factor * self.entries)

    def __add__(self, other: "HermitianForm2") -> "HermitianForm2":
        return HermitianForm2(self.entries + other.entries)


# --- points -----------------------------------------------------------------

def chart_lift(u, t: float, chart_id: str) -> SurfacePoint:
    """
    Solleva le coordinate libere u su V_t nella carta indicata.

    Args:
        u: the two free coordinates, in the cyclic order of the chart
        t: smoothing parameter
        chart_id: one of W1+, W1-, W2+, W2-, W3+, W3-

    Returns:
        SurfacePoint whose ambient reconstruction satisfies Σw² = t
    """
    u1, u2 = (complex(c) for c in u)
    argument = complex(t) - u1 * u1 - u2 * u2
    if _on_principal_cut(argument):
        raise BranchCut(f"t − u1² − u2² = {argument.real:.3e} giace sul taglio principale "
                        f"della carta {chart_id}", chart_id=chart_id)
    return SurfacePoint(chart_id, (u1, u2), t)


def point_from_ambient(w, t: float) -> SurfacePoint:
    """
    Carry an ambient point of V_t into the chart chosen by the selection rule:
    the solved coordinate is the one of largest modulus among the charts whose
    square-root argument is off the principal cut.
    """
    w = np.asarray(w, dtype=complex)
    order = sorted(range(3), key=lambda k: (-abs(w[k]), k))
    for k in order:
        i, j = FREE_INDICES[k]
        argument = complex(t) - w[i] * w[i] - w[j] * w[j]
        if _on_principal_cut(argument) and abs(w[k]) > 0.0:
            continue
        root = _principal_sqrt(argument)
        sign = 1 if abs(root - w[k]) <= abs(root + w[k]) else -1
        chart_id = f"W{k + 1}{'+' if sign > 0 else '-'}"
        return SurfacePoint(chart_id, (w[i], w[j]), t)
    raise BranchCut("Nessuna carta ammissibile per il punto")


def ambient_norm2(p: SurfacePoint) -> float:
    """s = |w|²"""
    w = p.ambient()
    return float(np.sum(np.abs(w) ** 2))


def defining_residual(p: SurfacePoint) -> float:
    w = p.ambient()
    return abs(complex(np.sum(w * w)) - p.t)


def holomorphic_volume_form(p: SurfacePoint) -> complex:
    """
    Coefficient of Ω_t = du1∧du2/(2 w_k) in the chart frame.

    Raises:
        DegenerateChart: when |w_k| < 1e-8·max(|w|, δ²)
    """
    w = p.ambient()
    wk = w[p.chart_index]
    scale = max(float(np.linalg.norm(w)), math.sqrt(p.t))
    if abs(wk) < DEGENERATE_CHART_THRESHOLD * scale or wk == 0:
        raise DegenerateChart(f"|w_{p.chart_index + 1}| = {abs(wk):.3e} troppo piccolo "
                              f"nella carta {p.chart_id}", chart_id=p.chart_id)
    return 1.0 / (2.0 * wk)


def ambient_jacobian(p: SurfacePoint) -> np.ndarray:
    """E = ∂w/∂u (3×2): identity rows for the free coordinates, −u_i/w_k for the solved one"""
    w = p.ambient()
    k = p.chart_index
    E = np.zeros((3, 2), dtype=complex)
    for col, idx in enumerate(p.free_indices):
        E[idx, col] = 1.0
        E[k, col] = -w[idx] / w[k]
    return E


def chart_jacobian(p: SurfacePoint, target_chart: str) -> np.ndarray:
    """∂u_target/∂u_source at p (2×2); Ω coefficients satisfy c_source = c_target·det J"""
    target_index, _ = _chart_parts(target_chart)
    E = ambient_jacobian(p)
    rows = FREE_INDICES[target_index]
    return E[list(rows), :]


def rechart(p: SurfacePoint, target_chart: str) -> SurfacePoint:
    """Same ambient point expressed in another chart (branch fixed by the point)"""
    w = p.ambient()
    k, _ = _chart_parts(target_chart)
    i, j = FREE_INDICES[k]
    root = _principal_sqrt(complex(p.t) - w[i] * w[i] - w[j] * w[j])
    sign = 1 if abs(root - w[k]) <= abs(root + w[k]) else -1
    return SurfacePoint(f"W{k + 1}{'+' if sign > 0 else '-'}", (w[i], w[j]), p.t)


# --- scalar fields ----------------------------------------------------------

class ScalarField:
    """A real function on an ambient neighbourhood of V_t"""

    def value(self, w: np.ndarray) -> float:
        raise NotImplementedError

    def ambient_levi(self, w: np.ndarray) -> np.ndarray:
        """Matrix ∂²φ/∂w_a∂w̄_b; only fields with a registered form provide it"""
        raise UnregisteredRadial(f"{type(self).__name__} non ha una forma di Levi registrata")

    def __call__(self, w) -> float:
        return self.value(np.asarray(w, dtype=complex))

    def __add__(self, other: "ScalarField") -> "FieldSum":
        return FieldSum([(1.0, self), (1.0, other)])

    def __sub__(self, other: "ScalarField") -> "FieldSum":
        return FieldSum([(1.0, self), (-1.0, other)])


class FieldSum(ScalarField):
    def __init__(self, terms):
        self.terms = list(terms)

    def value(self, w):
        return sum(c * f.value(w) for c, f in self.terms)

    def ambient_levi(self, w):
        return sum(c * f.ambient_levi(w) for c, f in self.terms)


class FunctionField(ScalarField):
    """Wraps a plain callable; only usable with finite differences"""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn

    def value(self, w):
        return float(self.fn(w))


class RadialPotential(ScalarField):
    """
    A potential u(s) of s = |w|².

    Subclasses implement profile(s) -> (u, u', u'') vectorized over s.
    """

    def profile(self, s):
        raise NotImplementedError

    def value(self, w):
        s = float(np.sum(np.abs(w) ** 2))
        return float(self.profile(s)[0])

    def ambient_levi(self, w):
        s = float(np.sum(np.abs(w) ** 2))
        _, d1, d2 = self.profile(s)
        return float(d1) * np.eye(3) + float(d2) * np.outer(np.conj(w), w)


class PluriharmonicField(ScalarField):
    """Re(a·w)"""

    def __init__(self, coeffs):
        self.coeffs = np.array(_complex_triple(coeffs))

    def value(self, w):
        return float(np.real(np.dot(self.coeffs, w)))

    def ambient_levi(self, w):
        return np.zeros((3, 3), dtype=complex)


class QuadraticField(RadialPotential):
    """|w|², the flat potential"""

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        return s, np.ones_like(s), np.zeros_like(s)


# --- operators --------------------------------------------------------------

def _fd_step(p: SurfacePoint, eps_fd: float, h: Optional[float]) -> float:
    if h is None:
        w = p.ambient()
        h = eps_fd * max(float(np.linalg.norm(w)), math.sqrt(p.t))
    if h < MIN_FD_STEP:
        raise StepUnderflow(f"Passo alle differenze finite {h:.3e} < {MIN_FD_STEP}")
    return h


def _fd_complex_hessian(potential: ScalarField, p: SurfacePoint, h: float) -> np.ndarray:
    base = np.array([p.u[0].real, p.u[0].imag, p.u[1].real, p.u[1].imag])

    def evaluate(x):
        u = (complex(x[0], x[1]), complex(x[2], x[3]))
        return potential.value(p.ambient(u))

    f0 = evaluate(base)
    real_hessian = np.zeros((4, 4))
    for a in range(4):
        ea = np.zeros(4)
        ea[a] = h
        real_hessian[a, a] = (evaluate(base + ea) - 2.0 * f0 + evaluate(base - ea)) / h ** 2
        for b in range(a + 1, 4):
            eb = np.zeros(4)
            eb[b] = h
            value = (evaluate(base + ea + eb) - evaluate(base + ea - eb)
                     - evaluate(base - ea + eb) + evaluate(base - ea - eb)) / (4.0 * h ** 2)
            real_hessian[a, b] = real_hessian[b, a] = value

    H = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            xi, yi, xj, yj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
            H[i, j] = 0.25 * (real_hessian[xi, xj] + real_hessian[yi, yj]
                              + 1j * (real_hessian[xi, yj] - real_hessian[yi, xj]))
    return H


def complex_hessian(potential: ScalarField, p: SurfacePoint, mode: str = "analytic",
                    eps_fd: float = DEFAULT_EPS_FD, h: Optional[float] = None) -> HermitianForm2:
    """
    Matrice di ∂²φ/∂u_i∂ū_j nella carta di p.

    Args:
        potential: scalar field; analytic mode needs a registered Levi form
        p: point of V_t
        mode: 'analytic' (chain rule through the embedding) or 'finite-difference'
        eps_fd: relative step, h = eps_fd·max(|w|, δ²)
        h: explicit step overriding the rule

    Returns:
        HermitianForm2 in the chart frame
    """
    if mode in ("analytic", "analytic-radial"):
        E = ambient_jacobian(p)
        levi = potential.ambient_levi(p.ambient())
        H = E.T @ levi @ E.conj()
    elif mode in ("finite-difference", "fd"):
        step = _fd_step(p, eps_fd, h)
        H = _fd_complex_hessian(potential, p, step)
    else:
        raise ValueError(f"Modalità Hessiana sconosciuta: {mode!r}")
    return HermitianForm2(0.5 * (H + H.conj().T))


def _require_positive(g: HermitianForm2):
    lowest = g.min_eigenvalue()
    if lowest <= 0.0:
        raise NotPositive(f"Autovalore minimo {lowest:.3e} <= 0")


def ma_ratio(g: HermitianForm2, h: HermitianForm2) -> float:
    """det(g + h)/det(g)"""
    _require_positive(g)
    return (g + h).det() / g.det()


def laplacian(g: HermitianForm2, h: HermitianForm2) -> float:
    """trace(g⁻¹h), the derivative of ma_ratio(g, εh) at ε = 0"""
    _require_positive(g)
    return float(np.trace(np.linalg.solve(g.entries, h.entries)).real)


@lru_cache(maxsize=64)
def eh_normalization(t: float) -> float:
    """
    Raw ratio det η / |Ω coefficient|² of the Eguchi-Hanson metric at the
    reference point |w|² = 2t (|w| = 1 on the cone); vol_ratio_to_omega divides by it.
    """
    from .gluing_models import EguchiHansonPotential

    s_ref = 2.0 * t if t > 0.0 else 1.0
    a, b = math.sqrt((s_ref + t) / 2.0), math.sqrt((s_ref - t) / 2.0)
    w = np.array([a, 1j * b, 0.0], dtype=complex)
    p = point_from_ambient(w, t)
    g = complex_hessian(EguchiHansonPotential(t), p)
    value = g.det() / abs(holomorphic_volume_form(p)) ** 2
    logger.debug(f"Normalizzazione EH per t={t:.3e}: C={value:.15g}")
    return value


def vol_ratio_to_omega(g: HermitianForm2, p: SurfacePoint,
                       normalization: Optional[float] = None) -> float:
    """
    g²/(Ω∧Ω̄) normalized so that the Eguchi-Hanson metric gives 1.

    Its logarithm is |Ω̂|²_g's log for the dual section Ω̂, so the Ricci potential
    carries −log of this ratio.
    """
    _require_positive(g)
    coefficient = holomorphic_volume_form(p)
    C = eh_normalization(p.t) if normalization is None else normalization
    return g.det() / (abs(coefficient) ** 2 * C)


# --- radial closed forms ----------------------------------------------------

def radial_eigenvalues(d1, d2, s, t: float):
    """Relative eigenvalues (λ1, λ2) of i∂∂̄u(s) on V_t with respect to the flat restriction"""
    s = np.asarray(s, dtype=float)
    lam1 = np.asarray(d1, dtype=float)
    lam2 = lam1 + np.asarray(d2, dtype=float) * (s - t) * (s + t) / s
    return lam1, lam2


def radial_volume_ratio(d1, d2, s, t: float, normalization: Optional[float] = None):
    """Closed form of vol_ratio_to_omega for a radial potential: 4 s λ1 λ2 / C"""
    lam1, lam2 = radial_eigenvalues(d1, d2, s, t)
    C = eh_normalization(t) if normalization is None else normalization
    return 4.0 * np.asarray(s, dtype=float) * lam1 * lam2 / C
