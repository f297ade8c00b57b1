"""
MA Solver - Operatore di Monge-Ampère sulla riduzione radiale e metodo di Newton

The operator E[φ] = (ω̃ + i∂∂̄φ)²/ω̃² − e^{f−φ} of the pre-glued model, its split into
the linearization 𝒟 and the nonlinearity ℛ, the weighted-norm constants of the
quantitative implicit function theorem and a damped Newton solve.

Fields are radial: they live on the cell-centred grid σ_i = (i + ½)h with
|w|² = t·cosh 2σ, so the first ghost node mirrors node 0 (even reflection through the
vanishing cycle) and the last node, at |w| = 2, carries the Dirichlet value.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import attr
import numpy as np
from scipy import sparse
from scipy.linalg import svdvals
from scipy.sparse.linalg import splu, spsolve

from .errors import (EmptySample, GateRejected, LineSearchStall, MaxIterations,
                     MetricDegenerate, NoValidPairs, NotPositive, SingularOperator)
from .gluing_models import preglued_model
from .surface_charts import GluingParams, radial_eigenvalues
from .weighted_analysis import FieldSamples, WeightFunction, weighted_holder_seminorm

logger = logging.getLogger(__name__)

MIN_GRID_NODES = 64
DEFAULT_GRID_NODES = 256
MAX_NEWTON_ITERATIONS = 50
ARMIJO_SLOPE = 1e-4
MIN_STEP_LENGTH = 2.0 ** -30
SINGULAR_THRESHOLD = 1e-14


class RadialGrid:
    """
    Griglia radiale adattata al ciclo evanescente.

    Args:
        t: smoothing parameter (δ⁴), positive
        nodes: number of nodes including the boundary node
        r_max: outer radius |w| of the truncated model
    """

    def __init__(self, t: float, nodes: int = DEFAULT_GRID_NODES, r_max: float = 2.0):
        if t <= 0.0:
            raise ValueError(f"La griglia radiale richiede t > 0, ricevuto {t}")
        if nodes < MIN_GRID_NODES:
            raise ValueError(f"Servono almeno {MIN_GRID_NODES} nodi, richiesti {nodes}")
        if r_max ** 2 <= t:
            raise ValueError(f"r_max = {r_max} non supera il ciclo evanescente")
        self.t = float(t)
        self.nodes = int(nodes)
        self.r_max = float(r_max)
        self.sigma_max = 0.5 * math.acosh(r_max ** 2 / t)
        self.h = self.sigma_max / (nodes - 0.5)
        self.sigma = (np.arange(nodes) + 0.5) * self.h
        self.s = t * np.cosh(2.0 * self.sigma)
        self.s[-1] = r_max ** 2
        self.s_sigma = 2.0 * t * np.sinh(2.0 * self.sigma)
        self.r = np.sqrt(self.s)

    @property
    def free_count(self) -> int:
        return self.nodes - 1

    @property
    def free_s(self) -> np.ndarray:
        return self.s[:-1]

    def refined(self) -> "RadialGrid":
        return RadialGrid(self.t, 2 * self.nodes, self.r_max)

    def arc_length(self, lam2: np.ndarray) -> np.ndarray:
        """Radial distance from the vanishing cycle at the free nodes, for eigenvalue λ2"""
        density = np.sqrt(2.0 * self.free_s * lam2)
        # first cell: from σ = 0 to σ_0 = h/2 with the node density
        steps = np.concatenate([[0.5 * self.h * density[0]],
                                0.5 * self.h * (density[1:] + density[:-1])])
        return np.cumsum(steps)


def _as_array(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


@attr.s(frozen=True, eq=False)
class RadialField:
    """A radial function: values at the free nodes plus the Dirichlet value at |w| = r_max"""

    grid: RadialGrid = attr.ib()
    values: np.ndarray = attr.ib(converter=_as_array)
    boundary: float = attr.ib(default=0.0, converter=float)

    @values.validator
    def _check_values(self, attribute, value):
        if value.size != self.grid.free_count:
            raise ValueError(f"Il campo ha {value.size} valori, attesi {self.grid.free_count}")
        if not np.all(np.isfinite(value)):
            raise ValueError("Il campo radiale contiene valori non finiti")

    @property
    def full_values(self) -> np.ndarray:
        return np.append(self.values, self.boundary)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values, self.boundary)

    def __add__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values + other.values, self.boundary + other.boundary)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values - other.values, self.boundary - other.boundary)

    def __mul__(self, factor: float) -> "RadialField":
        return RadialField(self.grid, factor * self.values, factor * self.boundary)

    __rmul__ = __mul__


FieldLike = Union[RadialField, np.ndarray]


class MongeAmpereOperator:
    """
    E, 𝒟 and ℛ of the pre-glued model on a radial grid.

    Per node the metric ω̃ + i∂∂̄φ has relative eigenvalues λ1 + μ1 and λ2 + μ2 with
    μ1 = φ_σ/s_σ and μ2 = φ_σσ/(4s), which makes

        E = (λ1+μ1)(λ2+μ2)/(λ1λ2) − e^{f−φ}
          = (1 − e^f) + [μ1/λ1 + μ2/λ2 + e^f φ] + [μ1μ2/(λ1λ2) − e^f(φ − 1 + e^{−φ})]

    an exact algebraic identity.

    Args:
        params: radial gluing parameters (ph_coeffs = 0)
        grid_nodes: number of grid nodes
        ricci: optional Ricci potential at the free nodes replacing the model's own
        r_max: outer radius of the truncated model
    """

    def __init__(self, params: GluingParams, grid_nodes: int = DEFAULT_GRID_NODES,
                 ricci: Optional[np.ndarray] = None, r_max: float = 2.0):
        if not params.is_radial:
            raise ValueError("Il solutore radiale richiede ph_coeffs = 0 "
                             "(i dati non radiali sono solo diagnostici)")
        self.params = params
        self.delta = params.delta
        self.t = params.t
        self.grid = RadialGrid(params.t, grid_nodes, r_max)
        self.logger = logging.getLogger(__name__)

        model = preglued_model(params)
        s = self.grid.free_s
        _, d1, d2 = model.profile(s)
        self.lam1, self.lam2 = radial_eigenvalues(d1, d2, s, self.t)
        bad = (self.lam1 <= 0.0) | (self.lam2 <= 0.0)
        if np.any(bad):
            node = int(np.argmax(bad))
            raise NotPositive(f"Metrica pre-incollata degenere al nodo {node}",
                              location=float(self.grid.r[node]))
        if ricci is None:
            self.f = model.ricci_radial(s)
        else:
            self.f = _as_array(ricci)
            if self.f.size != self.grid.free_count:
                raise ValueError(f"Potenziale di Ricci con {self.f.size} valori, "
                                 f"attesi {self.grid.free_count}")
        self.exp_f = np.exp(self.f)
        self.rho = WeightFunction(self.delta)(self.grid.r[:-1])
        self.normalization = model.normalization
        self._first, self._second = self._difference_matrices()
        self._linear_lu = None
        self.logger.debug(f"Operatore MA: delta={self.delta}, nodi={self.grid.nodes}, "
                          f"sup|f|={np.max(np.abs(self.f)):.3e}")

    # --- discretization -----------------------------------------------------

    def _difference_matrices(self):
        """μ1 and μ2 as sparse maps on the free values (boundary contribution excluded)"""
        n, h = self.grid.free_count, self.grid.h
        lower, upper = np.ones(n - 1), np.ones(n - 1)

        central = sparse.diags([-lower, upper], [-1, 1], shape=(n, n), format="lil")
        central[0, 0] = -1.0
        central = central.tocsr() / (2.0 * h)

        second = sparse.diags([lower, -2.0 * np.ones(n), upper], [-1, 0, 1],
                              shape=(n, n), format="lil")
        second[0, 0] = -1.0
        second = second.tocsr() / h ** 2

        s, s_sigma = self.grid.free_s, self.grid.s_sigma[:-1]
        first = sparse.diags(1.0 / s_sigma) @ central
        hessian = sparse.diags(1.0 / (4.0 * s)) @ second
        return first.tocsr(), hessian.tocsr()

    def field(self, values=None, boundary: float = 0.0) -> RadialField:
        if values is None:
            values = np.zeros(self.grid.free_count)
        return RadialField(self.grid, values, boundary)

    def _full(self, phi: FieldLike) -> np.ndarray:
        if isinstance(phi, RadialField):
            return phi.full_values
        return np.append(_as_array(phi), 0.0)

    def relative_eigenvalues(self, phi: FieldLike) -> Tuple[np.ndarray, np.ndarray]:
        """(μ1, μ2) of i∂∂̄φ at the free nodes"""
        full = self._full(phi)
        ext = np.concatenate([[full[0]], full])
        prev, cur, nxt = ext[:-2], ext[1:-1], ext[2:]
        h = self.grid.h
        phi_sigma = (nxt - prev) / (2.0 * h)
        phi_sigma2 = (nxt - 2.0 * cur + prev) / h ** 2
        mu1 = phi_sigma / self.grid.s_sigma[:-1]
        mu2 = phi_sigma2 / (4.0 * self.grid.free_s)
        return mu1, mu2

    def _check_metric(self, mu1: np.ndarray, mu2: np.ndarray):
        bad = (self.lam1 + mu1 <= 0.0) | (self.lam2 + mu2 <= 0.0)
        if np.any(bad):
            node = int(np.argmax(bad))
            raise MetricDegenerate(f"ω̃ + i∂∂̄φ non positiva al nodo {node} "
                                   f"(|w| = {self.grid.r[node]:.4e})", node=node)

    # --- operators ----------------------------------------------------------

    def E_op(self, phi: FieldLike) -> RadialField:
        """
        Residuo di Monge-Ampère nei nodi liberi.

        Raises:
            MetricDegenerate: ω̃ + i∂∂̄φ not positive at some node
        """
        mu1, mu2 = self.relative_eigenvalues(phi)
        self._check_metric(mu1, mu2)
        values = self._full(phi)[:-1]
        ratio = (self.lam1 + mu1) * (self.lam2 + mu2) / (self.lam1 * self.lam2)
        return self.field(ratio - np.exp(self.f - values))

    def D_op(self, phi: FieldLike) -> RadialField:
        """Δ_ω̃ φ + e^f φ"""
        mu1, mu2 = self.relative_eigenvalues(phi)
        values = self._full(phi)[:-1]
        return self.field(mu1 / self.lam1 + mu2 / self.lam2 + self.exp_f * values)

    def R_op(self, phi: FieldLike) -> RadialField:
        """(i∂∂̄φ)²/ω̃² − e^f (φ − 1 + e^{−φ})"""
        mu1, mu2 = self.relative_eigenvalues(phi)
        values = self._full(phi)[:-1]
        quadratic = mu1 * mu2 / (self.lam1 * self.lam2)
        return self.field(quadratic - self.exp_f * (values + np.expm1(-values)))

    def initial_defect(self) -> RadialField:
        """E(0) = 1 − e^f"""
        return self.field(-np.expm1(self.f))

    def linear_matrix(self) -> sparse.csr_matrix:
        """Matrix of 𝒟 on the free values"""
        return (sparse.diags(1.0 / self.lam1) @ self._first
                + sparse.diags(1.0 / self.lam2) @ self._second
                + sparse.diags(self.exp_f)).tocsr()

    def solve_linear(self, values: FieldLike) -> RadialField:
        """𝒟⁻¹ of a codomain field, zero at the boundary node"""
        if self._linear_lu is None:
            self._linear_lu = splu(self.linear_matrix().tocsc())
        array = values.values if isinstance(values, RadialField) else _as_array(values)
        return self.field(self._linear_lu.solve(array))

    def jacobian(self, phi: FieldLike) -> sparse.csr_matrix:
        """Derivative of E at φ: a tridiagonal sparse matrix"""
        mu1, mu2 = self.relative_eigenvalues(phi)
        values = self._full(phi)[:-1]
        denom = self.lam1 * self.lam2
        return (sparse.diags((self.lam2 + mu2) / denom) @ self._first
                + sparse.diags((self.lam1 + mu1) / denom) @ self._second
                + sparse.diags(np.exp(self.f - values))).tocsr()

    # --- norms --------------------------------------------------------------

    def solution_jets(self, phi: FieldLike) -> List[np.ndarray]:
        """|φ|, |∂φ| and the relative Hessian norm √((μ1/λ1)² + (μ2/λ2)²) at the free nodes"""
        full = self._full(phi)
        ext = np.concatenate([[full[0]], full])
        phi_sigma = (ext[2:] - ext[:-2]) / (2.0 * self.grid.h)
        mu1, mu2 = self.relative_eigenvalues(phi)
        gradient = np.abs(phi_sigma) / (2.0 * np.sqrt(self.grid.free_s * self.lam2))
        hessian = np.sqrt((mu1 / self.lam1) ** 2 + (mu2 / self.lam2) ** 2)
        return [np.abs(full[:-1]), gradient, hessian]

    def domain_norm(self, phi: FieldLike, beta: float) -> float:
        """Weighted C²_β sup norm: Σ_j sup ρ^{j−β}|∇ʲφ|"""
        jets = self.solution_jets(phi)
        return float(sum(np.max(self.rho ** (j - beta) * jets[j]) for j in range(3)))

    def codomain_norm(self, values: FieldLike, beta: float) -> float:
        """Weighted C⁰_{β−2} sup norm: sup ρ^{2−β}|·|"""
        array = values.values if isinstance(values, RadialField) else _as_array(values)
        return float(np.max(self.rho ** (2.0 - beta) * np.abs(array)))

    def codomain_holder(self, values: FieldLike, beta: float, gamma: float) -> float:
        """Weighted γ-Hölder seminorm of a codomain field, on radial geodesic distance"""
        array = values.values if isinstance(values, RadialField) else _as_array(values)
        samples = FieldSamples(self.rho, [array], coords=self.grid.arc_length(self.lam2)[:, None])
        return weighted_holder_seminorm(samples, beta - 2.0, gamma, 0, cap_exponent=1.0)

    def einstein_check(self, phi: FieldLike) -> float:
        """max |e^{f−φ} ω̃²/(ω̃ + i∂∂̄φ)² − 1| over the free nodes"""
        mu1, mu2 = self.relative_eigenvalues(phi)
        self._check_metric(mu1, mu2)
        values = self._full(phi)[:-1]
        ratio = np.exp(self.f - values) * self.lam1 * self.lam2 / (
            (self.lam1 + mu1) * (self.lam2 + mu2))
        return float(np.max(np.abs(ratio - 1.0)))

    def inverse_norm_estimate(self, beta: float) -> float:
        """
        1/σ_min of diag(ρ^{2−β})·𝒟·diag(ρ^β), the discrete proxy for the norm of
        𝒟⁻¹: C⁰_{β−2} → C⁰_β.

        Raises:
            SingularOperator: smallest singular value below 1e-14
        """
        scaled = (self.rho[:, None] ** (2.0 - beta)) * self.linear_matrix().toarray() \
            * (self.rho[None, :] ** beta)
        sigma_min = float(np.min(svdvals(scaled)))
        if sigma_min < SINGULAR_THRESHOLD:
            raise SingularOperator(f"Valore singolare minimo {sigma_min:.3e} "
                                   f"(delta = {self.delta}, beta = {beta})")
        return 1.0 / sigma_min


def inverse_norm_estimate(params: GluingParams, beta: float,
                          grid_nodes: int = DEFAULT_GRID_NODES) -> float:
    return MongeAmpereOperator(params, grid_nodes).inverse_norm_estimate(beta)


# --- Lipschitz constant -----------------------------------------------------

def random_even_field(operator: MongeAmpereOperator, beta: float, rng: np.random.Generator,
                      width_range: Tuple[float, float] = (0.5, 2.0)) -> np.ndarray:
    """Smooth even field concentrated near the vanishing cycle, vanishing at the boundary"""
    sigma = operator.grid.sigma[:-1]
    width = rng.uniform(*width_range)
    coeffs = rng.normal(size=3)
    x = (sigma / width) ** 2
    bump = np.exp(-x) * (coeffs[0] + coeffs[1] * x + coeffs[2] * x ** 2)
    taper = 1.0 - (sigma / operator.grid.sigma_max) ** 2
    return operator.rho ** beta * bump * taper


def lipschitz_estimate(operator: MongeAmpereOperator, beta: float, pairs: int = 16,
                       radius: float = 1e-3, seed: int = 0,
                       preconditioned: bool = False) -> float:
    """
    Largest sampled quotient ‖ℛφ₁ − ℛφ₂‖ / (‖φ₁ − φ₂‖ (‖φ₁‖ + ‖φ₂‖)) over random pairs in
    the ball of the given domain-norm radius.

    With preconditioned the numerator is ‖𝒟⁻¹(ℛφ₁ − ℛφ₂)‖ in the domain norm, the constant
    of the map φ ↦ −𝒟⁻¹(E(0) + ℛφ) whose fixed points solve E(φ) = 0.
    """
    if pairs < 1:
        raise ValueError(f"Servono almeno una coppia, richieste {pairs}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(pairs):
        fields = []
        for _ in range(2):
            raw = random_even_field(operator, beta, rng)
            target = radius * rng.uniform(0.2, 1.0)
            fields.append(raw * target / operator.domain_norm(raw, beta))
        phi1, phi2 = fields
        difference = operator.domain_norm(phi1 - phi2, beta)
        if difference == 0.0:
            continue
        jump = operator.R_op(phi1).values - operator.R_op(phi2).values
        if preconditioned:
            numerator = operator.domain_norm(operator.solve_linear(jump), beta)
        else:
            numerator = operator.codomain_norm(jump, beta)
        scale = operator.domain_norm(phi1, beta) + operator.domain_norm(phi2, beta)
        best = max(best, numerator / (difference * scale))
    logger.debug(f"Costante di Lipschitz stimata: {best:.4e} (delta={operator.delta}, "
                 f"raggio={radius:.3e}, coppie={pairs}, precondizionata={preconditioned})")
    return best


# --- implicit function gate --------------------------------------------------

@attr.s(frozen=True)
class IFTGate:
    """
    Quantitative implicit function test: with r = 2·C·err the fixed point exists in the
    r-ball when r < min(r0, 1/(2·L·C)).
    """

    C_inv: float = attr.ib()
    L: float = attr.ib()
    r0: float = attr.ib()
    initial_error: float = attr.ib()
    admissible_r: Optional[float] = attr.ib(default=None)
    violated: Optional[str] = attr.ib(default=None)

    @property
    def accepted(self) -> bool:
        return self.admissible_r is not None

    @property
    def margin(self) -> float:
        """4C²L·err, below 1 exactly when the Lipschitz inequality holds"""
        return 4.0 * self.C_inv ** 2 * self.L * self.initial_error

    def to_dict(self) -> dict:
        return {
            "C_inv": self.C_inv,
            "L": self.L,
            "r0": self.r0,
            "initial_error": self.initial_error,
            "admissible_r": self.admissible_r if self.accepted else "rejected",
            "violated": self.violated,
            "margin": self.margin,
        }


def ift_gate(C_inv: float, L: float, r0: float, initial_error: float) -> IFTGate:
    """
    Applica il test del teorema della funzione implicita quantitativo.

    Rejection is returned as a value: `admissible_r` is None and `violated` names the
    inequality that failed.
    """
    for name, value in (("C_inv", C_inv), ("L", L), ("r0", r0)):
        if not value > 0.0:
            raise ValueError(f"{name} deve essere positivo, ricevuto {value}")
    if initial_error < 0.0:
        raise ValueError(f"initial_error deve essere non negativo, ricevuto {initial_error}")

    r = 2.0 * C_inv * initial_error
    violated = None
    if not r < 1.0 / (2.0 * L * C_inv):
        violated = "r < 1/(2·L·C_inv)"
    elif not r < r0:
        violated = "r < r0"
    gate = IFTGate(C_inv, L, r0, initial_error,
                   admissible_r=None if violated else r, violated=violated)
    logger.debug(f"Gate IFT: r={r:.4e}, r0={r0:.4e}, 1/(2LC)={1.0 / (2.0 * L * C_inv):.4e} "
                 f"-> {'accettato' if gate.accepted else 'rifiutato: ' + violated}")
    return gate


def ift_radius(delta: float, beta: float, factor: float = 50.0) -> float:
    """r0 = factor·δ^{(8−2β)/3}, the ball radius the initial-error estimate calls for"""
    return factor * delta ** ((8.0 - 2.0 * beta) / 3.0)


# --- Newton -----------------------------------------------------------------

def _strictly_decreasing_after_first(instance, attribute, value):
    tail = value[1:]
    if any(b >= a for a, b in zip(tail, tail[1:])):
        raise ValueError("residual_history deve decrescere strettamente dopo il primo passo")


@attr.s(frozen=True)
class SolveReport:
    """Esito di una risoluzione di Newton a (δ, β) fissati"""

    delta: float = attr.ib()
    beta: float = attr.ib()
    residual_history: List[float] = attr.ib(converter=list,
                                            validator=_strictly_decreasing_after_first)
    solution_norm_weighted: float = attr.ib(validator=attr.validators.ge(0.0))
    ift: dict = attr.ib()
    converged: bool = attr.ib()
    iterations: int = attr.ib(default=0)
    solution_sup: float = attr.ib(default=0.0)
    gradient_sup: float = attr.ib(default=0.0)
    hessian_sup: float = attr.ib(default=0.0)
    einstein_defect: float = attr.ib(default=0.0)
    grid_nodes: int = attr.ib(default=DEFAULT_GRID_NODES)
    normalization: float = attr.ib(default=float("nan"))

    def to_dict(self) -> dict:
        return attr.asdict(self)


def _line_search(operator: MongeAmpereOperator, phi: np.ndarray, step: np.ndarray,
                 residual: float, iteration: int) -> Tuple[np.ndarray, float]:
    """Armijo backtracking on the sup norm of E"""
    length = 1.0
    while length >= MIN_STEP_LENGTH:
        trial = phi + length * step
        try:
            trial_residual = operator.E_op(trial).sup()
        except MetricDegenerate:
            trial_residual = math.inf
        if trial_residual <= (1.0 - ARMIJO_SLOPE * length) * residual:
            if length < 1.0:
                logger.debug(f"Newton iter {iteration}: passo smorzato {length:.3e}")
            return trial, trial_residual
        length *= 0.5
    raise LineSearchStall(f"Ricerca lineare bloccata all'iterazione {iteration} "
                          f"(residuo {residual:.3e})", iterations=iteration, residual=residual)


def newton_iterate(operator: MongeAmpereOperator, tol: float = 1e-8,
                   max_iterations: int = MAX_NEWTON_ITERATIONS,
                   initial: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List[float]]:
    """
    Newton smorzato per E(φ) = 0.

    Raises:
        MetricDegenerate: the starting field leaves the positivity cone
        MaxIterations: tol not reached within max_iterations
        LineSearchStall: no Armijo step found
    """
    phi = np.zeros(operator.grid.free_count) if initial is None else _as_array(initial).copy()
    residual_field = operator.E_op(phi)
    residual = residual_field.sup()
    history = [residual]
    for iteration in range(1, max_iterations + 1):
        if residual <= tol:
            return phi, history
        step = spsolve(operator.jacobian(phi).tocsc(), -residual_field.values)
        phi, residual = _line_search(operator, phi, np.asarray(step), residual, iteration)
        residual_field = operator.E_op(phi)
        history.append(residual)
        logger.debug(f"Newton iter {iteration}: residuo {residual:.3e}")
    if residual <= tol:
        return phi, history
    raise MaxIterations(f"Nessuna convergenza in {max_iterations} iterazioni "
                        f"(residuo {residual:.3e})", iterations=max_iterations, residual=residual)


def newton_solve(params: GluingParams, beta: float = -1.0, tol: float = 1e-8,
                 grid_nodes: int = DEFAULT_GRID_NODES,
                 max_iterations: int = MAX_NEWTON_ITERATIONS, r0_factor: float = 50.0,
                 lipschitz_pairs: int = 16, gamma: Optional[float] = None,
                 override: bool = False, seed: int = 0,
                 ricci: Optional[np.ndarray] = None) -> Tuple[RadialField, SolveReport]:
    """
    Measure the implicit function constants, run the gate and solve E(φ) = 0.

    Args:
        params: radial gluing parameters
        beta: weight exponent in (−2, 0)
        tol: sup-norm tolerance on the residual
        grid_nodes: radial grid size
        max_iterations: Newton iteration cap
        r0_factor: r0 = r0_factor·δ^{(8−2β)/3}
        lipschitz_pairs: random pairs for the Lipschitz quotient
        gamma: Hölder exponent of the codomain seminorm (params.gamma when None)
        override: solve even when both gates reject
        seed: seed of the Lipschitz sampling
        ricci: replacement Ricci potential at the free nodes

    Returns:
        (solution, report)

    Raises:
        GateRejected: classical and preconditioned gates rejected, override not set
        MetricDegenerate, MaxIterations, LineSearchStall: from the Newton iteration
    """
    if not (-2.0 < beta < 0.0):
        raise ValueError(f"beta deve stare in (-2, 0), ricevuto {beta}")
    gamma = params.gamma if gamma is None else gamma
    operator = MongeAmpereOperator(params, grid_nodes, ricci=ricci)

    defect = operator.initial_defect()
    initial_error = operator.codomain_norm(defect, beta)
    C_inv = operator.inverse_norm_estimate(beta)
    r0 = ift_radius(params.delta, beta, r0_factor)
    L = lipschitz_estimate(operator, beta, lipschitz_pairs, r0, seed=seed)
    gate = ift_gate(C_inv, max(L, SINGULAR_THRESHOLD), r0, initial_error)

    ift = gate.to_dict()
    try:
        holder = operator.codomain_holder(defect, beta, gamma)
        holder_gate = ift_gate(C_inv, max(L, SINGULAR_THRESHOLD), r0, initial_error + holder)
        ift["holder_seminorm"] = holder
        ift["holder_admissible_r"] = holder_gate.to_dict()["admissible_r"]
    except (NoValidPairs, EmptySample) as e:
        logger.warning(f"Seminorma di Hölder non disponibile a delta={params.delta}: {e}")
        ift["holder_seminorm"] = None
        ift["holder_admissible_r"] = None

    # Kantorovich form: C_inv = 1 once 𝒟⁻¹ is folded into the error and the Lipschitz constant
    precond_error = operator.domain_norm(operator.solve_linear(defect), beta)
    precond_L = lipschitz_estimate(operator, beta, lipschitz_pairs, r0, seed=seed,
                                   preconditioned=True)
    precond_gate = ift_gate(1.0, max(precond_L, SINGULAR_THRESHOLD), r0, precond_error)
    ift["preconditioned"] = precond_gate.to_dict()
    if gate.accepted:
        ift["accepted_by"] = "classical"
    elif precond_gate.accepted:
        ift["accepted_by"] = "preconditioned"
    else:
        ift["accepted_by"] = None

    if ift["accepted_by"] is None:
        if not override:
            raise GateRejected(f"Gate IFT rifiutato a delta={params.delta}: {gate.violated}; "
                               f"precondizionato: {precond_gate.violated}",
                               gate=gate, ift=ift)
        logger.warning(f"Gate IFT rifiutato a delta={params.delta} (margine {gate.margin:.3e}, "
                       f"precondizionato {precond_gate.margin:.3e}): risoluzione esplorativa")

    values, history = newton_iterate(operator, tol, max_iterations)
    solution = operator.field(values)
    jets = operator.solution_jets(solution)
    report = SolveReport(
        delta=params.delta,
        beta=beta,
        residual_history=history,
        solution_norm_weighted=operator.domain_norm(solution, beta),
        ift=ift,
        converged=True,
        iterations=len(history) - 1,
        solution_sup=float(np.max(jets[0])),
        gradient_sup=float(np.max(jets[1])),
        hessian_sup=float(np.max(jets[2])),
        einstein_defect=operator.einstein_check(solution),
        grid_nodes=operator.grid.nodes,
        normalization=operator.normalization,
    )
    logger.info(f"Newton a delta={params.delta}: {report.iterations} iterazioni, "
                f"residuo {history[-1]:.3e}, norma pesata {report.solution_norm_weighted:.4e}")
    return solution, report
