"""
Gluing models - potenziali e mappe del modello locale del nodo

Eguchi-Hanson family, model central potential, the smoothing diffeomorphism
ψ_t: V_0 ⊃ {|z|² > t/2} → V_t and its inverse, the exponential cut-off, the
pluriharmonic correction, the pre-glued potential and its Ricci potential.
"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ApexExcluded, CollapsedLocus, InvalidAlpha, NotPositive
from .surface_charts import (GluingParams, PluriharmonicField, RadialPotential,
                             SurfacePoint, ambient_norm2, eh_normalization,
                             point_from_ambient, radial_eigenvalues)
from .weighted_analysis import (annulus_samples_ambient, radial_derivatives, radial_jets,
                                shell_samples_ambient)

logger = logging.getLogger(__name__)

DELTA_MAX = 0.2
APEX_RADIUS = 1e-14


class RegionTag(str, Enum):
    """Regions of the local model in |w|; a boundary value belongs to the inner region"""

    CORE = "core"      # |w| ≤ δ^{4/3}
    GLUE = "glue"      # δ^{4/3} ≤ |w| ≤ 2δ^{4/3}
    NECK = "neck"      # 2δ^{4/3} ≤ |w| ≤ 1
    MATCH = "match"    # 1 ≤ |w| ≤ 2
    OUTER = "outer"    # |w| ≥ 2


def region_bounds(delta: float) -> Tuple[float, float, float, float]:
    c = delta ** (4.0 / 3.0)
    return c, 2.0 * c, 1.0, 2.0


def classify_region(r: float, delta: float) -> RegionTag:
    """RegionTag of the modulus r = |w|"""
    edges = region_bounds(delta)
    labels = (RegionTag.CORE, RegionTag.GLUE, RegionTag.NECK, RegionTag.MATCH)
    for edge, label in zip(edges, labels):
        if r <= edge:
            return label
    return RegionTag.OUTER


# --- cut-off ----------------------------------------------------------------

def _exp_flat(y: np.ndarray):
    """e^{−1/y} for y > 0 (zero otherwise) with its first two derivatives"""
    positive = y > 0.0
    ys = np.where(positive, y, 1.0)
    e = np.where(positive, np.exp(-1.0 / ys), 0.0)
    d1 = np.where(positive, e / ys ** 2, 0.0)
    d2 = np.where(positive, e * (1.0 / ys ** 4 - 2.0 / ys ** 3), 0.0)
    return e, d1, d2


def cutoff_profile(x, derivatives: bool = False):
    """
    Smoothstep di tipo esponenziale: χ = 0 per x ≤ 1, χ = 1 per x ≥ 2.

    Args:
        x: scalar or array
        derivatives: also return χ′ and χ″

    Returns:
        χ(x), or the tuple (χ, χ′, χ″)
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    a, a1, a2 = _exp_flat(x - 1.0)
    b, b1, b2 = _exp_flat(2.0 - x)
    b1 = -b1
    total = a + b
    chi = a / total
    if not derivatives:
        return float(chi) if scalar else chi
    numerator = a1 * b - a * b1
    chi1 = numerator / total ** 2
    chi2 = ((a2 * b - a * b2) * total - 2.0 * numerator * (a1 + b1)) / total ** 3
    if scalar:
        return float(chi), float(chi1), float(chi2)
    return chi, chi1, chi2


@lru_cache(maxsize=1)
def cutoff_derivative_bounds(points: int = 20001) -> Tuple[float, float]:
    """Sup norms (K1, K2) of χ′ and χ″, measured on a fine grid of [1, 2]"""
    _, d1, d2 = cutoff_profile(np.linspace(1.0, 2.0, points), derivatives=True)
    return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))


def _scaled_cutoff(r: np.ndarray, scale: float):
    """χ(r/scale) with its derivatives in s = r²"""
    chi, chi1, chi2 = cutoff_profile(r / scale, derivatives=True)
    s = r * r
    dx = 1.0 / (2.0 * scale * r)
    ddx = -1.0 / (4.0 * scale * r * s)
    return chi, chi1 * dx, chi2 * dx * dx + chi1 * ddx


# --- potentials -------------------------------------------------------------

class EguchiHansonPotential(RadialPotential):
    """√(s + t): under √t = δ² this is the scaled family (δ²/√t)√(|w|² + t)"""

    def __init__(self, t: float):
        self.t = float(t)

    def profile(self, s):
        a = np.asarray(s, dtype=float) + self.t
        root = np.sqrt(a)
        return root, 0.5 / root, -0.25 / (a * root)


class CentralModelPotential(RadialPotential):
    """φ¹₀ = |z| + c2|z|² on V_0, as a function of s₀ = |z|²"""

    t = 0.0

    def __init__(self, c2: float = 0.05):
        self.c2 = float(c2)

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        r = np.sqrt(s)
        return r + self.c2 * s, 0.5 / r + self.c2, -0.25 / (s * r)


def central_modulus2(s, t: float):
    """
    |z|² of ψ_t⁻¹(w) from s = |w|²: s₀ = (s + √(s² − t²))/2.

    Returns:
        (s₀, q) with q = √(s² − t²)
    """
    s = np.asarray(s, dtype=float)
    q = np.sqrt(np.clip((s - t) * (s + t), 0.0, None))
    return 0.5 * (s + q), q


class PulledBackCentralPotential(RadialPotential):
    """φ¹_δ = φ¹₀ ∘ ψ_t⁻¹ on V_t, defined for s > t"""

    def __init__(self, c2: float, t: float):
        self.central = CentralModelPotential(c2)
        self.t = float(t)

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        s0, q = central_modulus2(s, self.t)
        g, g1, g2 = self.central.profile(s0)
        ratio = s0 / q
        d1 = g1 * ratio
        d2 = g2 * ratio ** 2 - g1 * s0 * self.t ** 2 / ((s + q) * q ** 3)
        return g, d1, d2


def eh_potential(p: SurfacePoint, params: GluingParams) -> float:
    """√(s + δ⁴)"""
    _check_point_t(p, params)
    return float(EguchiHansonPotential(params.t).profile(ambient_norm2(p))[0])


def central_model_potential(z: SurfacePoint, c2: float) -> float:
    """
    φ¹₀(z) = |z| + c2|z|².

    Raises:
        ApexExcluded: for |z| < 1e-14
    """
    if z.t != 0.0:
        raise ValueError(f"Il potenziale centrale vive su V_0, ricevuto t={z.t}")
    r = math.sqrt(ambient_norm2(z))
    if r < APEX_RADIUS:
        raise ApexExcluded(f"|z| = {r:.3e} è il vertice del cono")
    return r + c2 * r * r


def _check_point_t(p: SurfacePoint, params: GluingParams):
    if not math.isclose(p.t, params.t, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"Il punto vive su V_t con t={p.t}, i parametri danno t={params.t}")


# --- smoothing diffeomorphism -----------------------------------------------

def smoothing_map_ambient(z: np.ndarray, t: float) -> np.ndarray:
    """w = z + t z̄/(2|z|²), row-wise on an (n, 3) array"""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    s0 = np.sum(np.abs(z) ** 2, axis=1)
    if np.any(s0 <= t / 2.0):
        raise CollapsedLocus(f"|z|² = {s0.min():.3e} <= t/2 = {t / 2.0:.3e}")
    return z + (t / (2.0 * s0))[:, None] * np.conj(z)


def inverse_map_ambient(w: np.ndarray, t: float) -> np.ndarray:
    """z = (w − t w̄/(2s₀))/(1 − t²/(4s₀²)), row-wise on an (n, 3) array"""
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    s = np.sum(np.abs(w) ** 2, axis=1)
    if np.any(s <= t * (1.0 + 1e-10)):
        raise CollapsedLocus(f"|w|² = {s.min():.3e} sul ciclo evanescente (t = {t:.3e})")
    s0, _ = central_modulus2(s, t)
    factor = t / (2.0 * s0)
    return (w - factor[:, None] * np.conj(w)) / (1.0 - factor ** 2)[:, None]


def smoothing_map(z: SurfacePoint, t: float) -> SurfacePoint:
    """ψ_t: V_0 → V_t"""
    if z.t != 0.0:
        raise ValueError(f"smoothing_map parte da V_0, ricevuto t={z.t}")
    w = smoothing_map_ambient(z.ambient(), t)[0]
    return point_from_ambient(w, t)


def inverse_map(w: SurfacePoint) -> SurfacePoint:
    """ψ_t⁻¹: V_t ∖ L_t → V_0"""
    z = inverse_map_ambient(w.ambient(), w.t)[0]
    return point_from_ambient(z, 0.0)


def pluriharmonic_correction(p: SurfacePoint, coeffs) -> float:
    """p_t = Re(Σ a_i w_i)"""
    return PluriharmonicField(coeffs).value(p.ambient())


def central_ricci_defect(s0, central: RadialPotential):
    """
    Radial part of the Ricci potential F₀ = −log N₀ − φ¹₀ of the central model at
    |z|² = s0; the pluriharmonic part Re(a·z) is added by the caller.
    """
    g, g1, g2 = central.profile(s0)
    n0 = 4.0 * np.asarray(s0, dtype=float) * g1 * (g1 + g2 * s0) / eh_normalization(0.0)
    return -np.log(n0) - g


# --- pre-glued model --------------------------------------------------------

class PregluedModel(RadialPotential):
    """
    Pre-glued potential ũ = U(s) − Re(a·w) on the local model, with

        U = τ·(χ_δ φ¹_δ + (1 − χ_δ) φ²_δ) + (1 − τ)·(φ¹_δ + κ)

    where χ_δ = χ(|w|/δ^{4/3}), τ = 1 − χ(|w|), φ² the Eguchi-Hanson potential and
    φ¹ the pulled-back central potential. Radial quantities are vectorized over s.
    """

    def __init__(self, params: GluingParams):
        self.params = params
        self.t = params.t
        self.scale = params.glue_scale
        self.eh = EguchiHansonPotential(params.t)
        self.pulled_back = PulledBackCentralPotential(params.c2, params.t)
        self.central = self.pulled_back.central
        self.kappa = params.match_offset
        self.coeffs = np.array(params.ph_coeffs)
        self.normalization = eh_normalization(params.t)
        self.logger = logging.getLogger(__name__)

    def blend_weights(self, s):
        """(χ_δ, τ) with their s-derivatives"""
        r = np.sqrt(np.asarray(s, dtype=float))
        chi = _scaled_cutoff(r, self.scale)
        c, c1, c2 = _scaled_cutoff(r, 1.0)
        return chi, (1.0 - c, -c1, -c2)

    def profile(self, s):
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        (X, X1, X2), (T, T1, T2) = self.blend_weights(s)
        G, G1, G2 = self.eh.profile(s)

        # φ¹ is only needed (and only defined) where χ_δ > 0
        outside = X > 0.0
        F, F1, F2 = G.copy(), G1.copy(), G2.copy()
        if np.any(outside):
            pf = self.pulled_back.profile(s[outside])
            F[outside], F1[outside], F2[outside] = pf

        B = X * F + (1.0 - X) * G
        B1 = X1 * (F - G) + X * F1 + (1.0 - X) * G1
        B2 = X2 * (F - G) + 2.0 * X1 * (F1 - G1) + X * F2 + (1.0 - X) * G2

        gap = B - F - self.kappa
        U = T * B + (1.0 - T) * (F + self.kappa)
        U1 = T1 * gap + T * B1 + (1.0 - T) * F1
        U2 = T2 * gap + 2.0 * T1 * (B1 - F1) + T * B2 + (1.0 - T) * F2
        if scalar:
            return float(U[0]), float(U1[0]), float(U2[0])
        return U, U1, U2

    def eigenvalues(self, s):
        _, d1, d2 = self.profile(s)
        return radial_eigenvalues(d1, d2, s, self.t)

    def check_positive(self, s):
        lam1, lam2 = self.eigenvalues(s)
        bad = (lam1 <= 0.0) | (lam2 <= 0.0)
        if np.any(bad):
            r = float(np.sqrt(np.asarray(s, dtype=float).reshape(-1)[np.argmax(bad)]))
            raise NotPositive(f"Metrica pre-incollata non positiva a |w| = {r:.4e} "
                              f"(delta = {self.params.delta})", location=r)

    def volume_ratio(self, s):
        """N = g²/(C Ω∧Ω̄) of the pre-glued metric"""
        lam1, lam2 = self.eigenvalues(s)
        return 4.0 * np.asarray(s, dtype=float) * lam1 * lam2 / self.normalization

    def ricci_radial(self, s):
        """Radial part of the Ricci potential (the whole of it when ph_coeffs = 0)"""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        (X, _, _), (T, _, _) = self.blend_weights(s)
        f = np.empty_like(s)

        # where χ_δ ≡ 1 the pre-glued potential is φ¹_δ and N(φ¹) = N₀(s₀)·(s + q)/(2q)
        exact = (X == 1.0) & ((T == 1.0) | (self.kappa == 0.0))
        if np.any(exact):
            se = s[exact]
            _, q = central_modulus2(se, self.t)
            f[exact] = -np.log1p(self.t ** 2 / (2.0 * q * (se + q)))

        generic = ~exact
        if np.any(generic):
            sg = s[generic]
            U, _, _ = self.profile(sg)
            value = -np.log(self.volume_ratio(sg)) - U + (1.0 - T[generic]) * self.kappa
            Xg = X[generic]
            active = Xg > 0.0
            if np.any(active):
                s0, _ = central_modulus2(sg[active], self.t)
                value[active] -= Xg[active] * central_ricci_defect(s0, self.central)
            f[generic] = value
        return float(f[0]) if scalar else f

    def ricci_ambient(self, w: np.ndarray) -> np.ndarray:
        """Ricci potential at the rows of an (n, 3) array of points of V_t"""
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        s = np.sum(np.abs(w) ** 2, axis=1)
        f = self.ricci_radial(s)
        if self.params.is_radial:
            return f
        (X, _, _), _ = self.blend_weights(s)
        f = f + (1.0 - X) * np.real(w @ self.coeffs)
        active = X > 0.0
        if np.any(active):
            z = inverse_map_ambient(w[active], self.t)
            s0 = np.sum(np.abs(z) ** 2, axis=1)
            # w − z = t z̄/(2|z|²)
            shift = (self.t / (2.0 * s0))[:, None] * np.conj(z)
            f[active] += X[active] * np.real(shift @ self.coeffs)
        return f

    def value(self, w):
        w = np.asarray(w, dtype=complex)
        s = float(np.sum(np.abs(w) ** 2))
        return float(self.profile(s)[0]) - float(np.real(np.dot(self.coeffs, w)))

    def radial_field(self) -> RadialPotential:
        return _ProfileView(self)


class _ProfileView(RadialPotential):
    """U(s) alone, without the pluriharmonic term"""

    def __init__(self, model: PregluedModel):
        self.model = model
        self.t = model.t

    def profile(self, s):
        return self.model.profile(s)


@lru_cache(maxsize=32)
def preglued_model(params: GluingParams) -> PregluedModel:
    return PregluedModel(params)


def preglued_potential(p: SurfacePoint, params: GluingParams,
                       delta_max: float = DELTA_MAX) -> Tuple[float, RegionTag]:
    """
    Valore del potenziale pre-incollato e regione del punto.

    Raises:
        NotPositive: when the induced metric is not positive at p
    """
    if params.delta > delta_max:
        raise ValueError(f"delta = {params.delta} oltre delta_max = {delta_max}")
    _check_point_t(p, params)
    model = preglued_model(params)
    s = ambient_norm2(p)
    model.check_positive(np.array([s]))
    return model.value(p.ambient()), classify_region(math.sqrt(s), params.delta)


def ricci_potential(p: SurfacePoint, params: GluingParams) -> float:
    """f with Ric ω̃ = ω̃ + i∂∂̄f on the local model (background density 1)"""
    _check_point_t(p, params)
    model = preglued_model(params)
    s = ambient_norm2(p)
    model.check_positive(np.array([s]))
    return float(model.ricci_ambient(p.ambient())[0])


# --- annulus estimates ------------------------------------------------------

def annulus_exponent(alpha: float, k: int = 0) -> float:
    """Exponent e of the sup of |∇ᵏ(φ¹_δ − φ²_δ)| ~ δ^e on the α-annulus"""
    return min(8.0 - 3.0 * alpha, 2.0 * alpha, 4.0 - alpha) - k * alpha / 2.0


def optimal_annulus_alpha() -> float:
    """The gluing scale exponent maximizing the annulus estimate (4/3)"""
    result = minimize_scalar(lambda a: -annulus_exponent(a), bounds=(0.0, 2.0),
                             method="bounded", options={"xatol": 1e-10})
    return float(result.x)


def annulus_difference(params: GluingParams, alpha: float, k: int,
                       count: int = 256, seed: int = 0) -> float:
    """sup over the α-annulus of the k-jet norm of φ¹_δ − φ²_δ, measured against η"""
    w = annulus_samples_ambient(alpha, params.delta, count, seed=seed)
    s = np.sum(np.abs(w) ** 2, axis=1)
    t = params.t
    F = PulledBackCentralPotential(params.c2, t).profile(s)
    G = EguchiHansonPotential(t).profile(s)
    lam1, lam2 = radial_eigenvalues(G[1], G[2], s, t)
    jets = radial_jets(F[0] - G[0], F[1] - G[1], F[2] - G[2], s, t, lam1, lam2)
    return float(np.max(jets[k]))


def cutoff_jet_norm(params: GluingParams, k: int, count: int = 256, seed: int = 0) -> float:
    """sup over the glue annulus of |∇ᵏχ_δ|_η, expected to scale as δ^{−2k/3}"""
    w = annulus_samples_ambient(4.0 / 3.0, params.delta, count, seed=seed)
    s = np.sum(np.abs(w) ** 2, axis=1)
    chi, chi1, chi2 = _scaled_cutoff(np.sqrt(s), params.glue_scale)
    G = EguchiHansonPotential(params.t).profile(s)
    lam1, lam2 = radial_eigenvalues(G[1], G[2], s, params.t)
    return float(np.max(radial_jets(chi, chi1, chi2, s, params.t, lam1, lam2)[k]))


# --- Ricci potential by region ----------------------------------------------

RICCI_REGIONS = ("core", "glue", "neck", "outer")
OUTER_SHELL = (2.0, 4.0)


def ricci_exponent(region: str, alpha: float, k: int) -> Tuple[float, str]:
    """
    Expected exponent of sup|∇ᵏf| ~ δ^e on a region. Every region is fitted as a
    rate: the measured slope has to land within the tolerance of the exponent.
    """
    if region == "core":
        return alpha - k * alpha / 2.0, "rate"
    if region == "glue":
        return (4.0 - 2.0 * k) / 3.0, "rate"
    if region == "neck":
        return 4.0 - 2.0 * alpha - k * alpha / 2.0, "rate"
    if region == "outer":
        return 4.0, "rate"
    raise ValueError(f"Regione sconosciuta: {region!r}")


def ricci_region_samples(region: str, delta: float, alpha: float, count: int,
                         seed: int = 0) -> np.ndarray:
    """Sample points of V_t for a region: the α-annulus, the glue annulus or the outer shell"""
    t = delta ** 4
    if region == "outer":
        return shell_samples_ambient(*OUTER_SHELL, t, count, seed=seed)
    if region == "glue":
        alpha = 4.0 / 3.0
    elif region not in ("core", "neck"):
        raise ValueError(f"Regione sconosciuta: {region!r}")
    if not (0.0 <= alpha <= 2.0):
        raise InvalidAlpha(f"alpha deve stare in [0, 2], ricevuto {alpha}")
    inner = delta ** alpha
    # radial differences step below |w| = δ^α, which must stay off the vanishing cycle
    r_min = max(inner, 1.01 * delta ** 2)
    return shell_samples_ambient(r_min, max(2.0 * inner, 1.01 * r_min), t, count, seed=seed)


def ricci_region_norm(params: GluingParams, region: str, k: int, alpha: float = 4.0 / 3.0,
                      count: int = 256, seed: int = 0) -> float:
    """
    sup of |∇ᵏf| over the region samples.

    k = 0 uses the full Ricci potential (pluriharmonic mismatch included); k ≥ 1 the
    jets of its radial part against the pre-glued metric.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k deve essere 0, 1 o 2, ricevuto {k}")
    model = preglued_model(params)
    w = ricci_region_samples(region, params.delta, alpha, count, seed)
    if k == 0:
        return float(np.max(np.abs(model.ricci_ambient(w))))
    s = np.sum(np.abs(w) ** 2, axis=1)
    f0, d1, d2 = radial_derivatives(model.ricci_radial, s)
    lam1, lam2 = model.eigenvalues(s)
    return float(np.max(radial_jets(f0, d1, d2, s, params.t, lam1, lam2)[k]))
