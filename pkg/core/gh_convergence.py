"""
GH Convergence - distanze geodetiche, diametro del ciclo evanescente e stime di Gromov-Hausdorff

Sampled metric spaces on the cone V_0 and on the smoothing V_t, graph-geodesic
distances on k-nearest-neighbour graphs with edge lengths from the local Kähler
metric, ε-quasi-isometry distortion and the 3ε Gromov-Hausdorff bound.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import attr
import networkx as nx
import numpy as np
from scipy.integrate import quad
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree

from .errors import EmptyCorrespondence, GluingLabError, OutOfRange
from .gluing_models import (CentralModelPotential, RegionTag, classify_region,
                            preglued_model, smoothing_map_ambient)
from .ma_solver import MongeAmpereOperator, newton_solve
from .surface_charts import GluingParams, RadialPotential, radial_eigenvalues
from .weighted_analysis import DecayFit, decay_fit, shell_samples_ambient

logger = logging.getLogger(__name__)

TRIANGLE_SLACK = 1e-8
DEFAULT_KNN = 8
MIN_EDGE_LENGTH = 1e-15


# --- sampled metric spaces ---------------------------------------------------

def _check_distances(instance, attribute, value):
    d = np.asarray(value)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"Matrice delle distanze non quadrata: {d.shape}")
    if d.shape[0] != len(instance.points):
        raise ValueError(f"{d.shape[0]} distanze per {len(instance.points)} punti")
    if np.any(np.diag(d) != 0.0):
        raise ValueError("La diagonale delle distanze deve essere nulla")
    if np.any(d < 0.0) or not np.all(np.isfinite(d)):
        raise ValueError("Distanze negative o non finite")
    if not np.allclose(d, d.T, rtol=0.0, atol=TRIANGLE_SLACK):
        raise ValueError("Matrice delle distanze non simmetrica")


@attr.s(frozen=True, eq=False)
class SampledMetricSpace:
    """
    Finite metric space of ambient sample points.

    Args:
        points: (n, 3) complex ambient coordinates
        distances: (n, n) symmetric matrix with zero diagonal
        provenance: 'cone' or 'smoothing(δ)'
        t: smoothing parameter of the variety carrying the points
    """

    points: np.ndarray = attr.ib(converter=lambda p: np.atleast_2d(np.asarray(p, dtype=complex)))
    distances: np.ndarray = attr.ib(converter=lambda d: np.asarray(d, dtype=float),
                                    validator=_check_distances)
    provenance: str = attr.ib(default="cone")
    t: float = attr.ib(default=0.0)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def diameter(self) -> float:
        return float(np.max(self.distances)) if self.size else 0.0

    def triangle_defect(self) -> float:
        """max over triples of d(i,j) − d(i,k) − d(k,j), nonpositive for a metric"""
        d = self.distances
        worst = -math.inf
        for k in range(self.size):
            worst = max(worst, float(np.max(d - d[:, k][:, None] - d[k, :][None, :])))
        return worst

    def satisfies_triangle(self, slack: float = TRIANGLE_SLACK) -> bool:
        return self.triangle_defect() <= slack

    def rescaled(self, factor: float) -> "SampledMetricSpace":
        return SampledMetricSpace(self.points, factor * self.distances, self.provenance, self.t)


# --- radial distance ---------------------------------------------------------

def _radial_density(potential: RadialPotential, s: float, t: float) -> float:
    _, d1, d2 = potential.profile(np.array([s]))
    _, lam2 = radial_eigenvalues(d1, d2, np.array([s]), t)
    return math.sqrt(max(2.0 * s * float(lam2[0]), 0.0))


def radial_distance(potential: RadialPotential, r1: float, r2: float, t: float,
                    r_max: float = 2.0) -> float:
    """
    Lunghezza del segmento radiale tra |w| = r1 e |w| = r2 per la metrica i∂∂̄u.

    The integrand is √(2sλ2) in the coordinate σ with s = t·cosh 2σ (s = e^{2σ} on the
    cone), so the integral is additive along ordered radii.

    Raises:
        OutOfRange: radius outside [√t, r_max] (outside (0, r_max] on the cone)
    """
    for r in (r1, r2):
        if t > 0.0:
            if not (math.sqrt(t) * (1.0 - 1e-12) <= r <= r_max * (1.0 + 1e-12)):
                raise OutOfRange(f"r = {r} fuori da [√t, {r_max}] con t = {t}")
        elif not (0.0 < r <= r_max * (1.0 + 1e-12)):
            raise OutOfRange(f"r = {r} fuori da (0, {r_max}] sul cono")
    if r1 == r2:
        return 0.0
    lo, hi = sorted((r1, r2))

    if t > 0.0:
        def to_sigma(r):
            return 0.5 * math.acosh(max(r * r / t, 1.0))

        def integrand(sigma):
            return _radial_density(potential, t * math.cosh(2.0 * sigma), t)
    else:
        def to_sigma(r):
            return math.log(r)

        def integrand(sigma):
            return _radial_density(potential, math.exp(2.0 * sigma), 0.0)

    value, _ = quad(integrand, to_sigma(lo), to_sigma(hi), epsabs=1e-14, epsrel=1e-12,
                    limit=400)
    return float(value)


def cone_radial_distance(r1: float, r2: float) -> float:
    """Closed form for the cone potential |z|: √2·|√r2 − √r1|"""
    return math.sqrt(2.0) * abs(math.sqrt(r2) - math.sqrt(r1))


# --- graph geodesics ---------------------------------------------------------

def _real_coords(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    if np.iscomplexobj(points):
        return np.hstack([points.real, points.imag])
    return np.asarray(points, dtype=float)


def levi_edge_lengths(potential: RadialPotential, w: np.ndarray, i: np.ndarray,
                      j: np.ndarray) -> np.ndarray:
    """Riemannian lengths √(2·i∂∂̄u(Δ, Δ̄)) of the chords w_j − w_i, metric taken at the midpoint"""
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    delta = w[j] - w[i]
    mid = 0.5 * (w[i] + w[j])
    s_mid = np.maximum(np.sum(np.abs(mid) ** 2, axis=1), 1e-300)
    _, d1, d2 = potential.profile(s_mid)
    pairing = np.sum(np.conj(mid) * delta, axis=1)
    q = d1 * np.sum(np.abs(delta) ** 2, axis=1) + d2 * np.abs(pairing) ** 2
    return np.maximum(np.sqrt(2.0 * np.maximum(q, 0.0)), MIN_EDGE_LENGTH)


def knn_edges(points: np.ndarray, k: int = DEFAULT_KNN) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Edges of the symmetric k-nearest-neighbour graph, k doubled until it is connected.

    Returns:
        (i, j, k_used) with i < j
    """
    coords = _real_coords(points)
    n = len(coords)
    if n < 2:
        raise ValueError(f"Servono almeno 2 punti per il grafo, ricevuti {n}")
    tree = cKDTree(coords)
    k = min(max(int(k), 1), n - 1)
    while True:
        _, neighbours = tree.query(coords, k=k + 1)
        rows = np.repeat(np.arange(n), k)
        cols = neighbours[:, 1:].reshape(-1)
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
        if nx.is_connected(graph) or k >= n - 1:
            break
        logger.warning(f"Grafo kNN non connesso con k={k} su {n} punti: raddoppio k")
        k = min(2 * k, n - 1)
    edges = np.array(sorted((min(a, b), max(a, b)) for a, b in graph.edges() if a != b))
    return edges[:, 0], edges[:, 1], k


def graph_distances(n: int, i: np.ndarray, j: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths of the weighted graph on n nodes"""
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_weighted_edges_from(zip(i.tolist(), j.tolist(), np.asarray(lengths).tolist()))
    matrix = nx.to_scipy_sparse_array(graph, nodelist=range(n), weight="weight", format="csr")
    distances = shortest_path(matrix, method="D", directed=False)
    distances = 0.5 * (distances + distances.T)
    np.fill_diagonal(distances, 0.0)
    return distances


def knn_graph_distances(points: np.ndarray, edge_length: Callable[[np.ndarray, np.ndarray], np.ndarray],
                        k: int = DEFAULT_KNN) -> Tuple[np.ndarray, int]:
    """Graph-geodesic distance matrix of the kNN graph with the given edge lengths"""
    i, j, k_used = knn_edges(points, k)
    return graph_distances(len(np.atleast_2d(points)), i, j, edge_length(i, j)), k_used


# --- vanishing cycle ---------------------------------------------------------

def fibonacci_sphere(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors of ℝ³"""
    if count < 2:
        raise ValueError(f"Servono almeno 2 punti sulla sfera, richiesti {count}")
    index = np.arange(count) + 0.5
    z = 1.0 - 2.0 * index / count
    radius = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * index
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=1)


def cycle_samples(t: float, count: int) -> np.ndarray:
    """Points √t·x of the vanishing cycle L_t = V_t ∩ ℝ³"""
    return (math.sqrt(t) * fibonacci_sphere(count)).astype(complex)


def exact_cycle_diameter(t: float) -> float:
    """Intrinsic diameter π(t/2)^{1/4} of L_t under the Eguchi-Hanson metric"""
    return math.pi * (t / 2.0) ** 0.25


@attr.s(frozen=True)
class CycleDiameter:
    delta: float = attr.ib()
    diameter: float = attr.ib()
    exact: float = attr.ib()
    k_used: int = attr.ib()

    @property
    def constant(self) -> float:
        """c in Diam(L_t) = c·δ"""
        return self.diameter / self.delta

    @property
    def mesh_factor(self) -> float:
        return self.diameter / self.exact

    def to_dict(self) -> dict:
        out = attr.asdict(self)
        out.update(constant=self.constant, mesh_factor=self.mesh_factor)
        return out


def vanishing_cycle_diameter(params: GluingParams, count: int = 400,
                             k: int = DEFAULT_KNN) -> CycleDiameter:
    """Graph-geodesic diameter of the sampled vanishing cycle under the pre-glued metric"""
    t = params.t
    w = cycle_samples(t, count)
    potential = preglued_model(params).radial_field()
    distances, k_used = knn_graph_distances(
        w, lambda i, j: levi_edge_lengths(potential, w, i, j), k)
    result = CycleDiameter(params.delta, float(np.max(distances)), exact_cycle_diameter(t), k_used)
    logger.debug(f"Diametro del ciclo a delta={params.delta}: {result.diameter:.6e} "
                 f"(c={result.constant:.5f}, maglia {result.mesh_factor:.4f})")
    return result


# --- quasi-isometries --------------------------------------------------------

@attr.s(frozen=True)
class Distortion:
    """ε of a sampled ε-quasi-isometry, with its two contributions"""

    epsilon: float = attr.ib()
    distance_defect: float = attr.ib()
    covering_defect: float = attr.ib()
    worst_pair: Tuple[int, int] = attr.ib(default=(0, 0))


def distortion(mapping: Optional[Sequence[int]], X: SampledMetricSpace,
               Y: SampledMetricSpace) -> Distortion:
    """
    ε such that p ↦ Y.points[mapping[p]] is an ε-quasi-isometry on the samples:
    the larger of max |d_X(p,q) − d_Y(F p, F q)| and the covering defect of the image.

    Args:
        mapping: index into Y per point of X (None for the identity)

    Raises:
        EmptyCorrespondence: X has no points or the mapping is empty
    """
    if X.size == 0:
        raise EmptyCorrespondence("Lo spazio di partenza non ha punti")
    index = np.arange(X.size) if mapping is None else np.asarray(mapping, dtype=int)
    if index.size == 0:
        raise EmptyCorrespondence("Corrispondenza vuota")
    if index.size != X.size:
        raise ValueError(f"La corrispondenza copre {index.size} punti su {X.size}")
    if np.any(index < 0) or np.any(index >= Y.size):
        raise ValueError("Indici della corrispondenza fuori da Y")

    image = Y.distances[np.ix_(index, index)]
    gap = np.abs(X.distances - image)
    flat = int(np.argmax(gap))
    worst = (flat // X.size, flat % X.size)
    distance_defect = float(gap.flat[flat])
    covering_defect = float(np.max(np.min(Y.distances[:, index], axis=1)))
    return Distortion(max(distance_defect, covering_defect), distance_defect,
                      covering_defect, worst)


def gh_upper_bound(epsilon: float) -> float:
    """d_GH ≤ 3ε for an ε-quasi-isometry"""
    if epsilon < 0.0:
        raise ValueError(f"epsilon deve essere non negativo, ricevuto {epsilon}")
    return 3.0 * epsilon


def two_leg_bound(epsilon_solved: float, epsilon_preglued: float) -> float:
    """Triangle inequality through the pre-glued metric"""
    return gh_upper_bound(epsilon_solved) + gh_upper_bound(epsilon_preglued)


# --- cone versus smoothing ---------------------------------------------------

def cone_samples(count: int, r_floor: float = 1e-4, seed: int = 0) -> np.ndarray:
    """Points of V_0 with |z| log-uniform in [r_floor, 2]"""
    return shell_samples_ambient(r_floor, 2.0, 0.0, count, seed=seed)


def cone_to_smoothing(z: np.ndarray, t: float) -> np.ndarray:
    """
    ψ_t on the cone samples; the collapsed core |z|² ≤ t/2 goes to the cycle through the
    continuous extension z ↦ 2 Re z = √t·x.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    s0 = np.sum(np.abs(z) ** 2, axis=1)
    collapsed = s0 <= 0.5 * t * (1.0 + 1e-12)
    w = np.empty_like(z)
    if np.any(~collapsed):
        w[~collapsed] = smoothing_map_ambient(z[~collapsed], t)
    if np.any(collapsed):
        x = z[collapsed].real
        norms = np.linalg.norm(x, axis=1)
        x = x / np.where(norms > 0.0, norms, 1.0)[:, None]
        w[collapsed] = math.sqrt(t) * x
    return w


@attr.s(frozen=True)
class PregluedDistortion:
    delta: float = attr.ib()
    epsilon: float = attr.ib()
    distance_defect: float = attr.ib()
    covering_defect: float = attr.ib()
    worst_region: str = attr.ib()
    diameter: float = attr.ib()
    k_used: int = attr.ib()


def preglued_vs_cone(params: GluingParams, count: int = 400, cycle_count: int = 100,
                     r_floor: Optional[float] = None, k: int = DEFAULT_KNN,
                     seed: int = 0) -> Tuple[PregluedDistortion, SampledMetricSpace,
                                             SampledMetricSpace]:
    """
    Distortion of ψ_t from the cone (metric of the central potential) to the smoothing
    with the pre-glued metric.

    Both graphs share the edge set of the cone samples; the Y side adds points of the
    vanishing cycle, linked to their nearest neighbours, for the covering defect. The
    default r_floor (0.1·δ²) puts samples inside the collapsed core.
    """
    t = params.t
    r_floor = 0.1 * params.sqrt_t if r_floor is None else r_floor
    z = cone_samples(count, r_floor, seed)
    w = cone_to_smoothing(z, t)
    cone = CentralModelPotential(params.c2)
    model = preglued_model(params).radial_field()

    i, j, k_used = knn_edges(z, k)
    X = SampledMetricSpace(z, graph_distances(count, i, j, levi_edge_lengths(cone, z, i, j)),
                           "cone", 0.0)

    cycle = cycle_samples(t, cycle_count)
    y_points = np.vstack([w, cycle])
    extra_i, extra_j, _ = knn_edges(y_points, k)
    attach = (extra_i >= count) | (extra_j >= count)
    # every cycle point also gets an edge to its nearest image point
    _, nearest = cKDTree(_real_coords(w)).query(_real_coords(cycle))
    yi = np.concatenate([i, extra_i[attach], np.atleast_1d(nearest)])
    yj = np.concatenate([j, extra_j[attach], count + np.arange(cycle_count)])
    y_lengths = levi_edge_lengths(model, y_points, yi, yj)
    Y = SampledMetricSpace(y_points, graph_distances(len(y_points), yi, yj, y_lengths),
                           f"smoothing({params.delta})", t)

    result = distortion(np.arange(count), X, Y)
    a, b = result.worst_pair
    r_pair = math.sqrt(min(np.sum(np.abs(w[a]) ** 2), np.sum(np.abs(w[b]) ** 2)))
    region = classify_region(r_pair, params.delta).value
    row = PregluedDistortion(params.delta, result.epsilon, result.distance_defect,
                             result.covering_defect, region, Y.diameter, k_used)
    logger.debug(f"Distorsione cono/pre-incollata a delta={params.delta}: "
                 f"eps={row.epsilon:.4e} (regione {region})")
    return row, X, Y


def solved_vs_preglued(operator: MongeAmpereOperator, solution, diameter: float) -> float:
    """
    Distortion bound of the identity from the pre-glued to the solved metric:
    D·max|√(1 + μ/λ) − 1| over both eigen-directions and all nodes.
    """
    mu1, mu2 = operator.relative_eigenvalues(solution)
    stretch = np.concatenate([mu1 / operator.lam1, mu2 / operator.lam2])
    return float(diameter * np.max(np.abs(np.sqrt(1.0 + stretch) - 1.0)))


# --- convergence experiment --------------------------------------------------

@attr.s(frozen=True)
class ConvergenceRow:
    delta: float = attr.ib()
    eps_preglued: float = attr.ib(default=float("nan"))
    eps_solved: float = attr.ib(default=float("nan"))
    gh_bound: float = attr.ib(default=float("nan"))
    worst_region: str = attr.ib(default="")
    cycle_diameter: float = attr.ib(default=float("nan"))
    error: Optional[str] = attr.ib(default=None)

    @property
    def ok(self) -> bool:
        return self.error is None


@attr.s(frozen=True)
class ConvergenceTable:
    rows: List[ConvergenceRow] = attr.ib()
    solved_fit: Optional[DecayFit] = attr.ib(default=None)
    preglued_fit: Optional[DecayFit] = attr.ib(default=None)
    diameter_fit: Optional[DecayFit] = attr.ib(default=None)

    @property
    def monotone(self) -> bool:
        """Total bound strictly decreasing as δ decreases"""
        ordered = sorted((r for r in self.rows if r.ok), key=lambda r: r.delta)
        bounds = [r.gh_bound for r in ordered]
        return len(bounds) > 1 and all(a < b for a, b in zip(bounds, bounds[1:]))


def convergence_row(params: GluingParams, beta: float = -1.0, count: int = 400,
                    cycle_count: int = 100, k: int = DEFAULT_KNN, grid_nodes: int = 256,
                    tol: float = 1e-8, override: bool = False, seed: int = 0) -> ConvergenceRow:
    """One δ of the experiment; solver and sampling errors end up in the row"""
    try:
        preglued, _, Y = preglued_vs_cone(params, count, cycle_count, k=k, seed=seed)
        solution, _ = newton_solve(params, beta, tol, grid_nodes=grid_nodes,
                                   override=override, seed=seed)
        operator = MongeAmpereOperator(params, grid_nodes)
        eps_solved = solved_vs_preglued(operator, solution, Y.diameter)
        cycle = vanishing_cycle_diameter(params, cycle_count, k)
    except GluingLabError as e:
        logger.error(f"Riga GH a delta={params.delta} fallita: {type(e).__name__}: {e}")
        return ConvergenceRow(params.delta, error=type(e).__name__)
    return ConvergenceRow(params.delta, preglued.epsilon, eps_solved,
                          two_leg_bound(eps_solved, preglued.epsilon),
                          preglued.worst_region, cycle.diameter)


def _fit_or_none(rows, attribute, predicted, tolerance, mode):
    data = [(r.delta, getattr(r, attribute)) for r in rows
            if r.ok and getattr(r, attribute) > 0.0]
    if len(data) < 4:
        return None
    return decay_fit(data, predicted, tolerance, mode)


def convergence_experiment(deltas: Sequence[float], params: GluingParams, beta: float = -1.0,
                           workers: int = 1, progress: Optional[Callable] = None,
                           **row_options) -> ConvergenceTable:
    """
    Esperimento di convergenza Gromov-Hausdorff sulla lista di δ.

    Args:
        deltas: δ values of the sweep
        params: template parameters (delta replaced per row)
        beta: weight exponent of the solves
        workers: threads for independent rows
        progress: optional wrapper around the row iterator (e.g. tqdm)
        row_options: forwarded to convergence_row
    """
    def run(delta):
        return convergence_row(params.with_delta(delta), beta, **row_options)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        iterator = executor.map(run, deltas)
        if progress is not None:
            iterator = progress(iterator, total=len(deltas))
        rows = list(iterator)

    return ConvergenceTable(
        rows,
        solved_fit=_fit_or_none(rows, "eps_solved", (2.0 + beta) / 6.0, 0.2, "rate"),
        preglued_fit=_fit_or_none(rows, "eps_preglued", 0.0, 0.0, "bound"),
        diameter_fit=_fit_or_none(rows, "cycle_diameter", 1.0, 0.05, "rate"),
    )


def worst_region_at_largest_delta(table: ConvergenceTable) -> Optional[RegionTag]:
    rows = [r for r in table.rows if r.ok]
    if not rows:
        return None
    return RegionTag(max(rows, key=lambda r: r.delta).worst_region)
