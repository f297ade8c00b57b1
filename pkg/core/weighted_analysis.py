"""
Weighted analysis - funzione peso, norme pesate e regressione dei tassi di decadimento

The weight ρ_t, weighted sup and Hölder norms on sampled fields, quasi-uniform
annulus sampling and the log-log regression turning O(δ^e) estimates into slopes.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import attr
import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial import cKDTree
from scipy.stats import linregress, qmc

from .errors import DegenerateData, EmptySample, InvalidAlpha, NoValidPairs
from .surface_charts import SurfacePoint, ambient_norm2, point_from_ambient

logger = logging.getLogger(__name__)

FIT_MODES = ("rate", "bound")


# --- weight -----------------------------------------------------------------

class WeightFunction:
    """
    ρ_t(|w|): δ on |w| ≤ 2δ², |w|^{1/2} on 3δ² ≤ |w| ≤ 1/2, 1 on |w| ≥ 1.

    The two bridges are monotone cubic Hermite interpolants of log ρ in log|w|,
    matching values and slopes of the adjacent pieces.
    """

    def __init__(self, delta: float):
        if not (0.0 < delta and 3.0 * delta ** 2 < 0.5):
            raise ValueError(f"delta = {delta} non ammette la funzione peso (serve 3δ² < 1/2)")
        self.delta = float(delta)
        self.log_delta = math.log(delta)
        self.inner = (math.log(2.0 * delta ** 2), math.log(3.0 * delta ** 2))
        self.outer = (math.log(0.5), 0.0)
        self._inner_bridge = CubicHermiteSpline(
            self.inner, [self.log_delta, 0.5 * self.inner[1]], [0.0, 0.5])
        self._outer_bridge = CubicHermiteSpline(
            self.outer, [0.5 * self.outer[0], 0.0], [0.5, 0.0])

    def __call__(self, r):
        scalar = np.ndim(r) == 0
        x = np.log(np.maximum(np.asarray(r, dtype=float), 1e-300))
        log_rho = np.where(x <= self.inner[0], self.log_delta, 0.5 * x)
        inner = (x > self.inner[0]) & (x < self.inner[1])
        outer = (x > self.outer[0]) & (x < self.outer[1])
        log_rho = np.where(inner, self._inner_bridge(np.clip(x, *self.inner)), log_rho)
        log_rho = np.where(outer, self._outer_bridge(np.clip(x, *self.outer)), log_rho)
        log_rho = np.where(x >= 0.0, 0.0, log_rho)
        rho = np.clip(np.exp(log_rho), self.delta, 1.0)
        return float(rho) if scalar else rho


def weight_rho(p: SurfacePoint, delta: float) -> float:
    """ρ_t at the point p, in [δ, 1]"""
    return WeightFunction(delta)(math.sqrt(ambient_norm2(p)))


# --- sampled fields ---------------------------------------------------------

@attr.s(frozen=True, eq=False)
class FieldSamples:
    """
    A field sampled at n points.

    Args:
        rho: weight ρ at each point
        jets: jets[j] holds |∇ʲφ| (jets[0] may carry the signed value)
        coords: chart coordinates used for pair distances, shape (n, d)
        metric_scale: local metric factor so that d ≈ |Δcoords|·√(metric_scale at the midpoint)
    """

    rho: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float).reshape(-1))
    jets: List[np.ndarray] = attr.ib(
        converter=lambda js: [np.asarray(j, dtype=float).reshape(-1) for j in js])
    coords: Optional[np.ndarray] = attr.ib(default=None)
    metric_scale: Optional[np.ndarray] = attr.ib(default=None)

    def __attrs_post_init__(self):
        n = self.rho.size
        for j, jet in enumerate(self.jets):
            if jet.size != n:
                raise ValueError(f"Il jet {j} ha {jet.size} campioni, attesi {n}")

    @property
    def size(self) -> int:
        return int(self.rho.size)

    def scaled(self, factor: float) -> "FieldSamples":
        jets = [factor * self.jets[0]] + [abs(factor) * j for j in self.jets[1:]]
        return FieldSamples(self.rho, jets, self.coords, self.metric_scale)


def weighted_sup_norm(samples: FieldSamples, beta: float, k: int) -> float:
    """
    Σ_{j≤k} max ρ^{−(β−j)}|∇ʲφ| over the samples.

    Raises:
        EmptySample: no samples
    """
    if samples.size == 0:
        raise EmptySample("Nessun campione per la norma pesata")
    if len(samples.jets) <= k:
        raise ValueError(f"Servono jet fino all'ordine {k}, disponibili {len(samples.jets) - 1}")
    total = 0.0
    for j in range(k + 1):
        total += float(np.max(samples.rho ** (-(beta - j)) * np.abs(samples.jets[j])))
    return total


def weighted_holder_seminorm(samples: FieldSamples, beta: float, gamma: float, k: int,
                             pair_scale: float = 0.5, cap_exponent: float = 2.0) -> float:
    """
    Lower-bound estimate of the weighted C^{k,γ} seminorm

        sup min(ρ_p, ρ_q)^{k+γ−β} |∇ᵏφ(p) − ∇ᵏφ(q)| / d(p, q)^γ

    over sampled pairs with coordinate distance below pair_scale·min(ρ_p, ρ_q)^cap_exponent
    (2 for ambient chart coordinates, where |w| ~ ρ², 1 for geodesic coordinates).

    Raises:
        EmptySample: no samples
        NoValidPairs: no pair passes the distance cap
    """
    if samples.size == 0:
        raise EmptySample("Nessun campione per la seminorma di Hölder")
    if samples.coords is None:
        raise ValueError("La seminorma di Hölder richiede le coordinate dei campioni")
    coords = np.asarray(samples.coords, dtype=float).reshape(samples.size, -1)
    rho = samples.rho
    scale = np.ones(samples.size) if samples.metric_scale is None else np.asarray(
        samples.metric_scale, dtype=float)

    tree = cKDTree(coords)
    pairs = tree.query_pairs(r=pair_scale * float(np.max(rho)) ** cap_exponent,
                             output_type="ndarray")
    if len(pairs) == 0:
        raise NoValidPairs("Nessuna coppia entro la scala di campionamento")
    i, j = pairs[:, 0], pairs[:, 1]
    chart_distance = np.linalg.norm(coords[i] - coords[j], axis=1)
    rho_min = np.minimum(rho[i], rho[j])
    keep = (chart_distance <= pair_scale * rho_min ** cap_exponent) & (chart_distance > 0.0)
    if not np.any(keep):
        raise NoValidPairs("Nessuna coppia soddisfa il vincolo d <= c·ρ²")
    i, j, rho_min = i[keep], j[keep], rho_min[keep]
    d = chart_distance[keep] * np.sqrt(0.5 * (scale[i] + scale[j]))
    jet = samples.jets[k]
    quotient = rho_min ** (k + gamma - beta) * np.abs(jet[i] - jet[j]) / d ** gamma
    return float(np.max(quotient))


def radial_jets(values, d1, d2, s, t: float, lam1, lam2) -> List[np.ndarray]:
    """
    Jet norms of a radial field φ(s) against the radial metric with eigenvalues (λ1, λ2):
    |φ|, |∂φ|_g and the relative complex Hessian norm √((μ1/λ1)² + (μ2/λ2)²).
    """
    s = np.asarray(s, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    normal = (s - t) * (s + t) / s
    mu1 = d1
    mu2 = d1 + np.asarray(d2, dtype=float) * normal
    gradient = np.abs(d1) * np.sqrt(normal / lam2)
    hessian = np.sqrt((mu1 / lam1) ** 2 + (mu2 / lam2) ** 2)
    return [np.abs(np.asarray(values, dtype=float)), gradient, hessian]


def radial_derivatives(fn, s, rel_step: float = 1e-3) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value and central differences in log s of a vectorized radial function"""
    s = np.asarray(s, dtype=float)
    h = rel_step
    up, down = s * math.exp(h), s * math.exp(-h)
    f0, fp, fm = fn(s), fn(up), fn(down)
    d_log = (fp - fm) / (2.0 * h)
    dd_log = (fp - 2.0 * f0 + fm) / h ** 2
    d1 = d_log / s
    d2 = (dd_log - d_log) / s ** 2
    return f0, d1, d2


# --- sampling ---------------------------------------------------------------

def orthonormal_pairs(unit: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Real orthonormal pairs (x, y) in ℝ³ from three uniform coordinates per row"""
    cos_theta = 1.0 - 2.0 * unit[:, 0]
    sin_theta = np.sqrt(np.clip(1.0 - cos_theta ** 2, 0.0, None))
    phi = 2.0 * np.pi * unit[:, 1]
    x = np.stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta], axis=1)

    helper = np.tile([1.0, 0.0, 0.0], (len(x), 1))
    helper[np.abs(x[:, 0]) > 0.9] = [0.0, 1.0, 0.0]
    e1 = helper - np.sum(helper * x, axis=1)[:, None] * x
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(x, e1)
    psi = 2.0 * np.pi * unit[:, 2]
    y = np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2
    return x, y


def ambient_from_frame(s, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """w = A x + iB y with A² − B² = t and A² + B² = s lies on V_t with |w|² = s"""
    s = np.asarray(s, dtype=float)
    a = np.sqrt((s + t) / 2.0)
    b = np.sqrt(np.clip((s - t) / 2.0, 0.0, None))
    return a[:, None] * x + 1j * b[:, None] * y


def shell_samples_ambient(r_min: float, r_max: float, t: float, count: int,
                          seed: int = 0) -> np.ndarray:
    """
    Quasi-uniform points of V_t with |w| log-uniform in [r_min, r_max].

    Returns:
        (count, 3) complex array
    """
    if count < 1:
        raise ValueError(f"count deve essere positivo, ricevuto {count}")
    if r_min <= 0.0 or r_max < r_min:
        raise ValueError(f"Intervallo radiale non valido [{r_min}, {r_max}]")
    if r_min ** 2 < t * (1.0 - 1e-12):
        raise ValueError(f"r_min = {r_min} sotto il ciclo evanescente √t = {math.sqrt(t)}")
    unit = qmc.Halton(d=4, scramble=True, seed=seed).random(count)
    r = r_min * (r_max / r_min) ** unit[:, 0]
    s = np.maximum(r * r, t)
    x, y = orthonormal_pairs(unit[:, 1:])
    return ambient_from_frame(s, t, x, y)


def annulus_samples_ambient(alpha: float, delta: float, count: int, seed: int = 0) -> np.ndarray:
    if not (0.0 <= alpha <= 2.0):
        raise InvalidAlpha(f"alpha deve stare in [0, 2], ricevuto {alpha}")
    if count < 8:
        raise ValueError(f"Servono almeno 8 campioni, richiesti {count}")
    inner = delta ** alpha
    return shell_samples_ambient(inner, 2.0 * inner, delta ** 4, count, seed=seed)


def annulus_samples(alpha: float, delta: float, count: int, seed: int = 0) -> List[SurfacePoint]:
    """
    Campioni quasi-uniformi nell'anello δ^α ≤ |w| ≤ 2δ^α di V_t, t = δ⁴.

    Raises:
        InvalidAlpha: alpha outside [0, 2]
    """
    t = delta ** 4
    w = annulus_samples_ambient(alpha, delta, count, seed=seed)
    return [point_from_ambient(row, t) for row in w]


# --- decay regression -------------------------------------------------------

@attr.s(frozen=True)
class DecayFit:
    """Least-squares slope of log(norm) against log(δ)"""

    slope: float = attr.ib()
    intercept: float = attr.ib()
    r_squared: float = attr.ib()
    predicted: float = attr.ib()
    tolerance: float = attr.ib()
    mode: str = attr.ib(default="rate", validator=attr.validators.in_(FIT_MODES))
    n_points: int = attr.ib(default=0)

    @r_squared.validator
    def _check_r2(self, attribute, value):
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"r_squared fuori da [0, 1]: {value}")

    @property
    def passed(self) -> bool:
        if self.mode == "bound":
            return self.slope >= self.predicted - self.tolerance
        return abs(self.slope - self.predicted) <= self.tolerance

    def to_dict(self) -> dict:
        out = attr.asdict(self)
        out["pass"] = self.passed
        return out


def decay_fit(measurements: Sequence[Tuple[float, float]], predicted_exponent: float,
              tolerance: float = 0.15, mode: str = "rate") -> DecayFit:
    """
    Fit log norm = slope·log δ + intercept.

    Args:
        measurements: (delta, norm) pairs, at least four distinct δ
        predicted_exponent: exponent e of the estimate O(δ^e)
        tolerance: accepted deviation of the slope
        mode: 'rate' (slope ≈ e) or 'bound' (slope ≥ e − tolerance)

    Raises:
        DegenerateData: non-positive norms or repeated δ values
    """
    data = np.asarray(measurements, dtype=float).reshape(-1, 2)
    deltas, norms = data[:, 0], data[:, 1]
    if len(deltas) < 4:
        raise DegenerateData(f"Servono almeno 4 valori di delta, ricevuti {len(deltas)}")
    if np.any(~np.isfinite(norms)) or np.any(norms <= 0.0):
        raise DegenerateData("Tutte le norme devono essere positive e finite")
    if np.any(deltas <= 0.0) or len(np.unique(deltas)) != len(deltas):
        raise DegenerateData("I valori di delta devono essere positivi e distinti")
    result = linregress(np.log(deltas), np.log(norms))
    r_squared = min(max(float(result.rvalue) ** 2, 0.0), 1.0)
    fit = DecayFit(float(result.slope), float(result.intercept), r_squared,
                   float(predicted_exponent), float(tolerance), mode, len(deltas))
    logger.debug(f"Fit decadimento: pendenza {fit.slope:.4f} attesa {predicted_exponent:.4f} "
                 f"({mode}) -> {'OK' if fit.passed else 'FALLITO'}")
    return fit
