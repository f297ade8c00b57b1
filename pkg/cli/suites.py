"""
Suites - le suite di esperimenti del laboratorio

verify-identities, sweep-decay, solve, gh and report. Each suite returns a SuiteResult;
write_suite_result turns it into the report files of the output directory and
run_suites chains the requested suites into one session.
"""

import glob
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import attr
import numpy as np
from tqdm import tqdm

try:
    from ..core.errors import DegenerateData, GateRejected, GluingLabError
    from ..core.gh_convergence import (cone_radial_distance, convergence_experiment,
                                       radial_distance)
    from ..core.gluing_models import (CentralModelPotential, EguchiHansonPotential,
                                      PulledBackCentralPotential, annulus_difference,
                                      annulus_exponent, cutoff_jet_norm,
                                      preglued_model, ricci_exponent, ricci_region_norm)
    from ..core.ma_solver import (MongeAmpereOperator, ift_gate, inverse_norm_estimate,
                                  newton_solve, random_even_field)
    from ..core.surface_charts import (GluingParams, PluriharmonicField, QuadraticField,
                                       complex_hessian, point_from_ambient,
                                       radial_volume_ratio, vol_ratio_to_omega)
    from ..core.weighted_analysis import decay_fit, shell_samples_ambient
    from ..utils.utils import (create_output_filename, get_resume_info, read_csv_rows,
                               write_csv_atomic, write_json_atomic)
except ImportError:
    from core.errors import DegenerateData, GateRejected, GluingLabError
    from core.gh_convergence import (cone_radial_distance, convergence_experiment,
                                     radial_distance)
    from core.gluing_models import (CentralModelPotential, EguchiHansonPotential,
                                    PulledBackCentralPotential, annulus_difference,
                                    annulus_exponent, cutoff_jet_norm,
                                    preglued_model, ricci_exponent, ricci_region_norm)
    from core.ma_solver import (MongeAmpereOperator, ift_gate, inverse_norm_estimate,
                                newton_solve, random_even_field)
    from core.surface_charts import (GluingParams, PluriharmonicField, QuadraticField,
                                     complex_hessian, point_from_ambient,
                                     radial_volume_ratio, vol_ratio_to_omega)
    from core.weighted_analysis import decay_fit, shell_samples_ambient
    from utils.utils import (create_output_filename, get_resume_info, read_csv_rows,
                             write_csv_atomic, write_json_atomic)

from .node_bound import node_bound
from .report_plots import plot_decay_series

logger = logging.getLogger(__name__)

FIT_COLUMNS = ("series", "predicted", "slope", "intercept", "r_squared", "tolerance",
               "mode", "n_points", "pass")
POINT_COLUMNS = ("series", "delta", "value")
CHECK_COLUMNS = ("check", "delta", "value", "tolerance", "pass")

IDENTITY_DELTA = 2.0 ** -4
HESSIAN_POINTS = 16
CUT_ANGLE_LIMIT = 0.9 * math.pi
CHARTED_RICCI_POINTS = 20
FRECHET_STEPS = (1e-1, 1e-2)
FRECHET_ORDER_SLACK = 0.1
RADIAL_DISTANCE_TOL = 1e-8
FIELD_AMPLITUDE = 0.1

SWEEP_REGIONS = ("annulus", "cutoff", "core", "glue", "neck", "outer")


@attr.s
class SuiteResult:
    """Righe, fit e controlli prodotti da una suite"""

    name: str = attr.ib()
    rows: List[Dict] = attr.ib(factory=list)
    columns: Sequence[str] = attr.ib(default=CHECK_COLUMNS)
    sort_key: Optional[Sequence[str]] = attr.ib(default=None)
    fits: List[Dict] = attr.ib(factory=list)
    points: List[Dict] = attr.ib(factory=list)
    checks: List[Dict] = attr.ib(factory=list)
    extra_json: Dict[str, Dict] = attr.ib(factory=dict)

    @property
    def failures(self) -> List[str]:
        failed = []
        for row in self.rows:
            if row.get("pass") is False or row.get("error"):
                failed.append(str(row.get("check") or row.get("series") or row.get("delta")))
        failed += [f"fit {f['series']}" for f in self.fits if not f.get("pass")]
        failed += [f"check {c['check']}" for c in self.checks if not c.get("pass")]
        return failed

    @property
    def passed(self) -> bool:
        return not self.failures


# --- helpers ----------------------------------------------------------------

def model_params(config, delta: Optional[float] = None, ricci: bool = False) -> GluingParams:
    """GluingParams from the [model] section; ricci selects the pluriharmonic test data"""
    model = config.model
    return GluingParams(
        delta=config.sweep.deltas[0] if delta is None else delta,
        alpha=config.sweep.annulus_alpha,
        beta=model.beta,
        gamma=model.gamma,
        c2=model.c2,
        ph_coeffs=model.ricci_ph_coeffs if ricci else model.ph_coeffs,
        match_offset=model.match_offset,
    )


def _parallel_map(fn: Callable, items: Iterable, workers: int, desc: str,
                  progress: bool) -> List:
    items = list(items)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        iterator = executor.map(fn, items)
        if progress:
            iterator = tqdm(iterator, total=len(items), desc=desc, leave=False)
        return list(iterator)


def _check_row(check: str, delta, value: float, tolerance: float) -> Dict:
    return {"check": check, "delta": delta, "value": value, "tolerance": tolerance,
            "pass": bool(np.isfinite(value) and value <= tolerance)}


def fit_row(series: str, measurements: Sequence, predicted: float, tolerance: float,
            mode: str = "rate") -> Dict:
    """Fit row for the fits CSV; too few usable points give a failing row without slope"""
    usable = [(d, v) for d, v in measurements
              if v is not None and np.isfinite(v) and v > 0.0]
    try:
        fit = decay_fit(usable, predicted, tolerance, mode)
    except DegenerateData as e:
        logger.error(f"Fit della serie {series} impossibile: {e}")
        return {"series": series, "predicted": predicted, "tolerance": tolerance,
                "mode": mode, "n_points": len(usable), "pass": False}
    row = fit.to_dict()
    row["series"] = series
    return row


def _scaled_field(operator: MongeAmpereOperator, beta: float, rng: np.random.Generator,
                  amplitude: float = FIELD_AMPLITUDE) -> np.ndarray:
    """Random even field scaled so that |φ| and |μ/λ| stay below the amplitude"""
    raw = random_even_field(operator, beta, rng)
    mu1, mu2 = operator.relative_eigenvalues(raw)
    size = max(np.max(np.abs(raw)), np.max(np.abs(mu1 / operator.lam1)),
               np.max(np.abs(mu2 / operator.lam2)))
    return raw * (amplitude / size)


# --- verify-identities ------------------------------------------------------

def eh_ricci_flatness(delta: float, count: int, seed: int = 0) -> float:
    """max |N − 1| of the Eguchi-Hanson metric, closed form and through the charts"""
    t = delta ** 4
    w = shell_samples_ambient(1.01 * delta ** 2, 2.0, t, count, seed=seed)
    s = np.sum(np.abs(w) ** 2, axis=1)
    eh = EguchiHansonPotential(t)
    _, d1, d2 = eh.profile(s)
    worst = float(np.max(np.abs(radial_volume_ratio(d1, d2, s, t) - 1.0)))
    for row in w[:CHARTED_RICCI_POINTS]:
        p = point_from_ambient(row, t)
        worst = max(worst, abs(vol_ratio_to_omega(complex_hessian(eh, p), p) - 1.0))
    return worst


def hessian_mode_agreement(params: GluingParams, count: int = HESSIAN_POINTS,
                           seed: int = 0) -> float:
    """Largest relative Frobenius gap between analytic and finite-difference Hessians"""
    t = params.t
    fields = [EguchiHansonPotential(t), PulledBackCentralPotential(params.c2, t),
              QuadraticField() + PluriharmonicField((1.0, 1j, 0.5))]
    w = shell_samples_ambient(2.0 * params.sqrt_t, 2.0, t, count, seed=seed)
    worst = 0.0
    for row in w:
        p = point_from_ambient(row, t)
        solved = p.ambient()[p.chart_index]
        # the stencil must not cross the cut of the solved square root
        if abs(np.angle(solved * solved)) > CUT_ANGLE_LIMIT:
            continue
        for field in fields:
            exact = complex_hessian(field, p, mode="analytic").entries
            approx = complex_hessian(field, p, mode="finite-difference").entries
            worst = max(worst, float(np.linalg.norm(exact - approx) / np.linalg.norm(exact)))
    return worst


def decomposition_defect(operator: MongeAmpereOperator, beta: float, fields: int,
                         seed: int = 0) -> float:
    """max over random fields of sup|E(φ) − E(0) − 𝒟φ − ℛφ|"""
    rng = np.random.default_rng(seed)
    base = operator.initial_defect().values
    worst = 0.0
    for _ in range(fields):
        phi = _scaled_field(operator, beta, rng)
        split = base + operator.D_op(phi).values + operator.R_op(phi).values
        worst = max(worst, float(np.max(np.abs(operator.E_op(phi).values - split))))
    return worst


def frechet_order(operator: MongeAmpereOperator, beta: float, seed: int = 0) -> float:
    """|log10 of the remainder ratio between the two steps − 2|; 0 for a quadratic remainder"""
    rng = np.random.default_rng(seed)
    phi = _scaled_field(operator, beta, rng)
    base = operator.initial_defect().values
    linear = operator.D_op(phi).values
    remainders = [float(np.max(np.abs(operator.E_op(eps * phi).values - base - eps * linear)))
                  for eps in FRECHET_STEPS]
    expected = 2.0 * math.log10(FRECHET_STEPS[0] / FRECHET_STEPS[1])
    return abs(math.log10(remainders[0] / remainders[1]) - expected)


def gate_example_mismatches() -> int:
    """Worked gate examples with known outcome"""
    examples = [
        # r = 0.2 < min(r0 = 1, 1/(2LC) = 0.5)
        ((1.0, 1.0, 1.0, 0.1), True),
        # r = 0.8 > 1/(2LC) = 0.25
        ((2.0, 1.0, 1.0, 0.2), False),
        # r = 0.2 > r0 = 0.1
        ((1.0, 0.1, 0.1, 0.1), False),
    ]
    return sum(ift_gate(*args).accepted != expected for args, expected in examples)


def node_bound_mismatches() -> int:
    expected = {1: 8, 3: 4, 4: 2, 5: 0, 9: -8}
    return sum(node_bound(d) != n for d, n in expected.items())


def radial_distance_defect(params: GluingParams) -> float:
    """Cone closed form and additivity of the pre-glued radial distance"""
    cone = CentralModelPotential(0.0)
    worst = max(abs(radial_distance(cone, r1, r2, 0.0) - cone_radial_distance(r1, r2))
                for r1, r2 in ((0.01, 1.0), (0.25, 2.0)))
    model = preglued_model(params).radial_field()
    r1, r2, r3 = 2.0 * params.sqrt_t, params.delta, 1.5
    whole = radial_distance(model, r1, r3, params.t)
    parts = radial_distance(model, r1, r2, params.t) + radial_distance(model, r2, r3, params.t)
    return max(worst, abs(whole - parts))


def verify_identities(config, progress: bool = False) -> SuiteResult:
    """Identità numeriche: Ricci-piattezza EH, decomposizione di E, Hessiane, gate, nodi"""
    tol = config.tolerances
    counts = config.samples

    def ricci_flat(delta):
        return _check_row("eh_ricci_flat", delta,
                          eh_ricci_flatness(delta, counts.identities, config.seed),
                          tol["ricci_flat"])

    rows = _parallel_map(ricci_flat, config.sweep.deltas, config.workers,
                         "eh_ricci_flat", progress)

    params = model_params(config, IDENTITY_DELTA)
    try:
        operator = MongeAmpereOperator(params, config.solver.grid_nodes)
        rows.append(_check_row("decomposition", IDENTITY_DELTA,
                               decomposition_defect(operator, config.model.beta,
                                                    counts.random_fields, config.seed),
                               tol["decomposition"]))
        rows.append(_check_row("frechet_derivative", IDENTITY_DELTA,
                               frechet_order(operator, config.model.beta, config.seed),
                               FRECHET_ORDER_SLACK))
    except (GluingLabError, ValueError) as e:
        logger.error(f"Operatore non disponibile a delta={IDENTITY_DELTA}: {e}")
        for check in ("decomposition", "frechet_derivative"):
            rows.append({"check": check, "delta": IDENTITY_DELTA, "value": float("nan"),
                         "pass": False})

    largest = model_params(config, max(config.sweep.deltas))
    rows.append(_check_row("hessian_modes", largest.delta,
                           hessian_mode_agreement(largest, seed=config.seed),
                           tol["hessian_modes"]))
    rows.append(_check_row("radial_distance", largest.delta,
                           radial_distance_defect(largest), RADIAL_DISTANCE_TOL))
    rows.append(_check_row("ift_gate_examples", None, gate_example_mismatches(), 0))
    rows.append(_check_row("node_bound", None, node_bound_mismatches(), 0))

    for row in rows:
        logger.info(f"verify-identities {row['check']} delta={row['delta']}: "
                    f"{row['value']} -> {'OK' if row['pass'] else 'FALLITO'}")
    return SuiteResult("verify-identities", rows, CHECK_COLUMNS, sort_key=("check", "delta"))


# --- sweep-decay ------------------------------------------------------------

def _sweep_series(config, region: Optional[str], k: Optional[int]) -> List[Dict]:
    """One entry per fitted series: what to measure and what exponent to expect"""
    tol = config.tolerances
    alpha = config.sweep.annulus_alpha
    series = []
    for order in (0, 1, 2):
        series.append({"series": f"annulus-a{alpha:.4g}-k{order}", "region": "annulus",
                       "alpha": alpha, "k": order, "predicted": annulus_exponent(alpha, order),
                       "mode": "rate",
                       "tolerance": tol["annulus_k0"] if order == 0 else tol["annulus_k2"]})
    for order in (1, 2):
        series.append({"series": f"cutoff-k{order}", "region": "cutoff", "alpha": 4.0 / 3.0,
                       "k": order, "predicted": -2.0 * order / 3.0, "mode": "rate",
                       "tolerance": tol["annulus_k2"]})

    ricci_alphas = {"core": config.sweep.core_alphas, "glue": (4.0 / 3.0,),
                    "neck": config.sweep.neck_alphas, "outer": (None,)}
    for name, alphas in ricci_alphas.items():
        for a in alphas:
            for order in (0, 1, 2):
                predicted, mode = ricci_exponent(name, a if a is not None else 0.0, order)
                label = f"ricci-{name}" + (f"-a{a:.4g}" if a is not None else "")
                series.append({"series": f"{label}-k{order}", "region": name, "alpha": a,
                               "k": order, "predicted": predicted, "mode": mode,
                               "tolerance": tol["ricci"]})

    return [s for s in series
            if (region is None or s["region"] == region) and (k is None or s["k"] == k)]


def _measure(config, entry: Dict, delta: float) -> float:
    samples = config.samples
    if entry["region"] == "annulus":
        return annulus_difference(model_params(config, delta), entry["alpha"], entry["k"],
                                  samples.annulus, seed=config.seed)
    if entry["region"] == "cutoff":
        return cutoff_jet_norm(model_params(config, delta), entry["k"], samples.annulus,
                               seed=config.seed)
    return ricci_region_norm(model_params(config, delta, ricci=True), entry["region"],
                             entry["k"], alpha=entry["alpha"] or 0.0, count=samples.ricci,
                             seed=config.seed)


def sweep_decay(config, region: Optional[str] = None, k: Optional[int] = None,
                progress: bool = False) -> SuiteResult:
    """
    Sweep in δ delle norme di decadimento con fit log-log.

    Args:
        config: experiment configuration
        region: restrict to one of SWEEP_REGIONS
        k: restrict to one derivative order
    """
    if region is not None and region not in SWEEP_REGIONS:
        raise ValueError(f"Regione sconosciuta: {region!r}")
    series = _sweep_series(config, region, k)
    tasks = [(entry, delta) for entry in series for delta in config.sweep.deltas]

    def run(task):
        entry, delta = task
        row = {key: entry[key] for key in ("series", "region", "alpha", "k", "predicted",
                                           "mode")}
        row["delta"] = delta
        try:
            row["value"] = _measure(config, entry, delta)
        except (GluingLabError, ValueError) as e:
            logger.error(f"{entry['series']} a delta={delta}: {type(e).__name__}: {e}")
            row["error"] = type(e).__name__
        return row

    rows = _parallel_map(run, tasks, config.workers, "sweep-decay", progress)

    fits, points = [], []
    for entry in series:
        measured = [(r["delta"], r["value"]) for r in rows
                    if r["series"] == entry["series"] and "value" in r]
        points += [{"series": entry["series"], "delta": d, "value": v} for d, v in measured]
        fit = fit_row(entry["series"], measured, entry["predicted"], entry["tolerance"],
                      entry["mode"])
        fits.append(fit)
        logger.info(f"sweep-decay {entry['series']}: pendenza {fit.get('slope')} "
                    f"(attesa {entry['predicted']:.4f}, {entry['mode']}) -> "
                    f"{'OK' if fit['pass'] else 'FALLITO'}")

    columns = ("series", "region", "alpha", "k", "delta", "value", "predicted", "mode", "error")
    return SuiteResult("sweep-decay", rows, columns, sort_key=("series", "delta"),
                       fits=fits, points=points)


# --- solve ------------------------------------------------------------------

SOLVE_COLUMNS = ("delta", "beta", "converged", "iterations", "final_residual",
                 "solution_norm_weighted", "solution_sup", "gradient_sup", "hessian_sup",
                 "einstein_defect", "C_inv", "C_inv_refined", "L", "initial_error", "r0",
                 "margin", "margin_preconditioned", "gate", "accepted_by", "violated", "error")


def _gate_fields(ift: dict) -> Dict:
    """Gate constants of a solve, rejected or not"""
    precond = ift.get("preconditioned") or {}
    return {
        "C_inv": ift["C_inv"],
        "L": ift["L"],
        "initial_error": ift["initial_error"],
        "r0": ift["r0"],
        "margin": ift["margin"],
        "margin_preconditioned": precond.get("margin"),
        "gate": "accepted" if ift.get("accepted_by") else "rejected",
        "accepted_by": ift.get("accepted_by"),
        "violated": ift["violated"],
    }


def _solve_row(config, delta: float, beta: float):
    params = model_params(config, delta)
    solver = config.solver
    row = {"delta": delta, "beta": beta, "converged": False}
    report = None
    try:
        _, report = newton_solve(params, beta, solver.tol, grid_nodes=solver.grid_nodes,
                                 max_iterations=solver.max_iterations,
                                 r0_factor=solver.r0_factor,
                                 lipschitz_pairs=solver.lipschitz_pairs,
                                 override=solver.ift_override, seed=config.seed)
        row["C_inv_refined"] = inverse_norm_estimate(params, beta, 2 * solver.grid_nodes)
    except GateRejected as e:
        logger.error(f"solve a delta={delta}: {e}")
        row["error"] = "GateRejected"
        if e.ift is not None:
            row.update(_gate_fields(e.ift))
        elif e.gate is not None:
            row.update(e.gate.to_dict())
            row["gate"] = "rejected"
        return row, None
    except (GluingLabError, ValueError) as e:
        logger.error(f"solve a delta={delta}: {type(e).__name__}: {e}")
        row["error"] = type(e).__name__
        return row, report.to_dict() if report is not None else None

    row.update(_gate_fields(report.ift))
    row.update(
        converged=report.converged,
        iterations=report.iterations,
        final_residual=report.residual_history[-1],
        solution_norm_weighted=report.solution_norm_weighted,
        solution_sup=report.solution_sup,
        gradient_sup=report.gradient_sup,
        hessian_sup=report.hessian_sup,
        einstein_defect=report.einstein_defect,
    )
    return row, report.to_dict()


def solve_suite(config, deltas: Optional[Sequence[float]] = None, beta: Optional[float] = None,
                progress: bool = False) -> SuiteResult:
    """
    Newton solves per δ with the implicit-function constants, their decay fits and the
    invertibility checks.
    """
    deltas = tuple(config.sweep.deltas if deltas is None else deltas)
    beta = config.model.beta if beta is None else float(beta)
    tol = config.tolerances

    results = _parallel_map(lambda d: _solve_row(config, d, beta), deltas, config.workers,
                            "solve", progress)
    rows = [row for row, _ in results]
    extra = {f"solve_delta_{row['delta']:.6g}.json": payload
             for row, payload in results if payload is not None}

    good = [r for r in rows if not r.get("error")]
    expectations = [
        ("solution_norm_weighted", (8.0 - 2.0 * beta) / 3.0, "rate", tol["solution_slope"]),
        ("hessian_sup", (2.0 + beta) / 3.0, "rate", tol["hessian_slope"]),
        ("initial_error", (8.0 - 2.0 * beta) / 3.0, "rate", tol["solution_slope"]),
        ("L", beta - 2.0, "rate", tol["solution_slope"]),
        ("solution_sup", (8.0 + beta) / 3.0, "bound", tol["solution_slope"]),
        ("gradient_sup", (5.0 + beta) / 3.0, "bound", tol["solution_slope"]),
        ("margin", (2.0 + beta) / 3.0, "rate", tol["solution_slope"]),
    ]
    fits, points = [], []
    for key, predicted, mode, tolerance in expectations:
        # rows rejected by the gate still carry its constants
        measured = [(r["delta"], r.get(key)) for r in rows if r.get(key) is not None]
        points += [{"series": key, "delta": d, "value": v} for d, v in measured]
        fits.append(fit_row(key, measured, predicted, tolerance, mode))

    checks = []
    constants = [r["C_inv"] for r in rows if r.get("C_inv") is not None]
    if constants:
        ratio = max(constants) / min(constants)
        checks.append(_check_row("C_inv_ratio", None, ratio, tol["invertibility_ratio"]))
        refined = [r for r in good if r.get("C_inv_refined") is not None]
        if refined:
            drift = max(abs(r["C_inv_refined"] / r["C_inv"] - 1.0) for r in refined)
            checks.append(_check_row("C_inv_grid_stability", None, drift,
                                     tol["grid_stability"]))
    else:
        checks.append({"check": "C_inv_ratio", "value": float("nan"), "pass": False})
    for r in rows:
        if r.get("gate") is None:
            continue
        best = min(m for m in (r.get("margin"), r.get("margin_preconditioned")) if m is not None)
        checks.append({"check": "ift_gate", "delta": r["delta"], "value": best,
                       "tolerance": 1.0, "pass": r["gate"] == "accepted"})

    gate_summary = {"beta": beta,
                    "accepted": {f"{r['delta']:.6g}": r.get("gate") == "accepted" for r in rows},
                    "accepted_by": {f"{r['delta']:.6g}": r.get("accepted_by") for r in rows}}
    margin_fit = next(f for f in fits if f["series"] == "margin")
    if margin_fit.get("slope"):
        # δ at which the fitted margin 4C²L·err reaches 1
        gate_summary["extrapolated_gate_delta"] = math.exp(-margin_fit["intercept"]
                                                           / margin_fit["slope"])
    extra["solve-gate_report.json"] = gate_summary
    logger.info(f"solve: {len(good)}/{len(rows)} risoluzioni riuscite, "
                f"gate accettato in {sum(gate_summary['accepted'].values())} casi")

    return SuiteResult("solve", rows, SOLVE_COLUMNS, sort_key=("delta",), fits=fits,
                       points=points, checks=checks, extra_json=extra)


# --- gh ---------------------------------------------------------------------

GH_COLUMNS = ("delta", "eps_preglued", "eps_solved", "gh_bound", "worst_region",
              "cycle_diameter", "cycle_constant", "error")


def gh_suite(config, progress: bool = False) -> SuiteResult:
    """Gromov-Hausdorff convergence of the smoothings to the nodal cone"""
    beta = config.model.beta
    tol = config.tolerances
    samples = config.samples
    solver = config.solver

    wrapper = None
    if progress:
        def wrapper(iterator, total):
            return tqdm(iterator, total=total, desc="gh", leave=False)

    table = convergence_experiment(
        config.sweep.deltas, model_params(config), beta, workers=config.workers,
        progress=wrapper, count=samples.gh_points, cycle_count=samples.gh_cycle,
        k=samples.knn, grid_nodes=solver.grid_nodes, tol=solver.tol,
        override=solver.ift_override, seed=config.seed)

    rows = []
    for row in table.rows:
        data = attr.asdict(row)
        data["cycle_constant"] = row.cycle_diameter / row.delta if row.ok else None
        rows.append(data)

    good = [r for r in table.rows if r.ok]
    fits, points = [], []
    for key, predicted, mode, tolerance in (
            ("eps_solved", (2.0 + beta) / 6.0, "rate", tol["gh_slope"]),
            ("eps_preglued", 0.0, "bound", tol["gh_slope"]),
            ("cycle_diameter", 1.0, "rate", tol["diameter_slope"])):
        measured = [(r.delta, getattr(r, key)) for r in good]
        points += [{"series": key, "delta": d, "value": v} for d, v in measured]
        fits.append(fit_row(key, measured, predicted, tolerance, mode))

    checks = [{"check": "gh_bound_monotone", "value": int(table.monotone),
               "tolerance": None, "pass": table.monotone}]
    constants = [r.cycle_diameter / r.delta for r in good]
    if constants:
        spread = max(constants) / min(constants) - 1.0
        checks.append(_check_row("cycle_constant_stability", None, spread,
                                 tol["diameter_constant"]))

    extra = {}
    if good:
        largest = max(good, key=lambda r: r.delta)
        extra["gh-regions_report.json"] = {
            "largest_delta": largest.delta,
            "worst_region": largest.worst_region,
            "cycle_constant": constants[good.index(largest)],
        }
    logger.info(f"gh: bound monotono {table.monotone}, {len(good)}/{len(rows)} righe valide")
    return SuiteResult("gh", rows, GH_COLUMNS, sort_key=("delta",), fits=fits, points=points,
                       checks=checks, extra_json=extra)


# --- report -----------------------------------------------------------------

def _as_float(value: str) -> Optional[float]:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def report_suite(config, reports_dir: str, plots_dir: str,
                 progress: bool = False) -> SuiteResult:
    """
    Collect the fits written by the other suites, plot every fitted series and write
    summary.json.
    """
    suffix = "-fits_report.csv"
    output_dir = os.path.dirname(os.path.abspath(reports_dir))
    rows, summary = [], {"suites": {}}
    for fits_path in sorted(glob.glob(os.path.join(reports_dir, f"*{suffix}"))):
        suite = os.path.basename(fits_path)[:-len(suffix)]
        points_path = os.path.join(reports_dir, f"{suite}-points_report.csv")
        points = read_csv_rows(points_path) if os.path.exists(points_path) else []
        suite_fits = []
        for fit in read_csv_rows(fits_path):
            passed = fit.get("pass", "").lower() == "true"
            entry = {"suite": suite, "series": fit["series"], "pass": passed, "plot": None}
            series_points = [(_as_float(p["delta"]), _as_float(p["value"])) for p in points
                             if p["series"] == fit["series"]]
            series_points = [(d, v) for d, v in series_points
                             if d is not None and v is not None and v > 0.0]
            if _as_float(fit.get("slope")) is not None and len(series_points) >= 2:
                name = f"{suite}-{fit['series']}.svg"
                written = plot_decay_series(os.path.join(plots_dir, name),
                                            fit["series"], series_points, fit)
                # relative to the output directory so the report survives a move
                entry["plot"] = os.path.relpath(written, output_dir)
            rows.append(entry)
            suite_fits.append({key: fit.get(key) for key in FIT_COLUMNS})
        summary["suites"][suite] = {"fits": suite_fits,
                                    "passed": all(f["pass"] == "true" for f in suite_fits)}

    summary["all_passed"] = all(s["passed"] for s in summary["suites"].values())
    logger.info(f"report: {len(rows)} serie da {len(summary['suites'])} suite")
    return SuiteResult("report", rows, ("suite", "series", "plot", "pass"),
                       sort_key=("suite", "series"), extra_json={"summary.json": summary})


# --- session ----------------------------------------------------------------

def write_suite_result(result: SuiteResult, reports_dir: str, manager=None) -> List[str]:
    """Scrive i CSV e i JSON di una suite; restituisce i path scritti"""
    written = [write_csv_atomic(create_output_filename(result.name, reports_dir),
                                result.rows, result.columns, result.sort_key)]
    if result.fits:
        written.append(write_csv_atomic(create_output_filename(f"{result.name}-fits",
                                                               reports_dir),
                                        result.fits, FIT_COLUMNS, ("series",)))
    if result.points:
        written.append(write_csv_atomic(create_output_filename(f"{result.name}-points",
                                                               reports_dir),
                                        result.points, POINT_COLUMNS, ("series", "delta")))
    if result.checks:
        written.append(write_csv_atomic(create_output_filename(f"{result.name}-checks",
                                                               reports_dir),
                                        result.checks, CHECK_COLUMNS, ("check",)))
    for name, payload in result.extra_json.items():
        written.append(write_json_atomic(os.path.join(reports_dir, name), payload))

    if manager is not None:
        for path in written:
            manager.add_written_file(path, "json" if path.endswith(".json") else "report")
        if result.name == "report":
            output_dir = os.path.dirname(os.path.abspath(reports_dir))
            for row in result.rows:
                if row.get("plot"):
                    manager.add_written_file(os.path.join(output_dir, row["plot"]), "plot")
    return written


def _written_passed(suite: str, reports_dir: str) -> bool:
    """Pass status of a suite already on disk (resume)"""
    for name in (suite, f"{suite}-fits", f"{suite}-checks"):
        path = create_output_filename(name, reports_dir)
        if not os.path.exists(path):
            continue
        for row in read_csv_rows(path):
            if row.get("pass", "").lower() == "false" or row.get("error"):
                return False
    return True


def run_suites(config, suites: Sequence[str], paths: Dict[str, str], manager=None,
               progress: bool = False, resume: bool = False,
               options: Optional[Dict[str, Dict]] = None) -> int:
    """
    Run suites in order and write their reports.

    Args:
        config: experiment configuration
        suites: suite names, in order
        paths: directories from ExperimentManager.get_paths()
        manager: records the written files when given
        progress: show tqdm bars
        resume: skip suites whose CSV report already exists
        options: extra keyword arguments per suite name

    Returns:
        0 when every check and fit passed, 1 otherwise
    """
    options = options or {}
    reports_dir, plots_dir = paths["reports"], paths["plots"]
    to_run, done = list(suites), []
    if resume:
        to_run, done = get_resume_info(suites, reports_dir)
        if done:
            logger.info(f"Suite già completate, saltate: {', '.join(done)}")

    failed = [s for s in done if s != "report" and not _written_passed(s, reports_dir)]
    for name in to_run:
        kwargs = dict(options.get(name, {}))
        logger.info(f"Avvio suite {name}")
        try:
            if name == "verify-identities":
                result = verify_identities(config, progress=progress, **kwargs)
            elif name == "sweep-decay":
                result = sweep_decay(config, progress=progress, **kwargs)
            elif name == "solve":
                result = solve_suite(config, progress=progress, **kwargs)
            elif name == "gh":
                result = gh_suite(config, progress=progress, **kwargs)
            elif name == "report":
                result = report_suite(config, reports_dir, plots_dir, progress=progress)
            else:
                raise ValueError(f"Suite sconosciuta: {name!r}")
        except GluingLabError as e:
            logger.exception(f"Suite {name} interrotta: {type(e).__name__}: {e}")
            failed.append(name)
            continue

        write_suite_result(result, reports_dir, manager)
        if not result.passed:
            logger.warning(f"Suite {name}: controlli falliti: {', '.join(result.failures)}")
            failed.append(name)
        else:
            logger.info(f"Suite {name} completata senza errori")

    if failed:
        logger.warning(f"Suite con controlli falliti: {', '.join(failed)}")
    return 1 if failed else 0
