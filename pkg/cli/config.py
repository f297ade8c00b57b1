"""
Config - Configurazione degli esperimenti

INI-style text with [section] headers validated into frozen value classes.
Precedence: command-line flag > NODE_GLUING_LAB_OUTPUT (output dir only) > file >
built-in defaults (equal to configs/default.ini).
"""

import configparser
import logging
import os
import re
from typing import Dict, Optional, Tuple

import attr

try:
    from ..core.errors import ConfigParseError
    from ..core.gluing_models import DELTA_MAX
    from ..core.ma_solver import MIN_GRID_NODES
except ImportError:
    from core.errors import ConfigParseError
    from core.gluing_models import DELTA_MAX
    from core.ma_solver import MIN_GRID_NODES

logger = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "NODE_GLUING_LAB_OUTPUT"
KNOWN_SUITES = ("verify-identities", "sweep-decay", "solve", "gh", "report")
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                                   "configs", "default.ini")

DEFAULT_TOLERANCES = {
    "ricci_flat": 1e-6,
    "decomposition": 1e-10,
    "hessian_modes": 1e-4,
    "annulus_k0": 0.15,
    "annulus_k2": 0.2,
    "ricci": 0.2,
    "invertibility_ratio": 2.0,
    "grid_stability": 0.2,
    "solution_slope": 0.2,
    "hessian_slope": 0.2,
    "gh_slope": 0.2,
    "diameter_slope": 0.05,
    "diameter_constant": 0.02,
}


def _tuple_of_floats(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@attr.s(frozen=True)
class SweepSettings:
    deltas: Tuple[float, ...] = attr.ib(
        default=(2.0 ** -3, 2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8),
        converter=_tuple_of_floats)
    delta_max: float = attr.ib(default=DELTA_MAX)
    annulus_alpha: float = attr.ib(default=4.0 / 3.0)
    neck_alphas: Tuple[float, ...] = attr.ib(default=(0.5, 1.0), converter=_tuple_of_floats)
    core_alphas: Tuple[float, ...] = attr.ib(default=(5.0 / 3.0, 2.0), converter=_tuple_of_floats)


@attr.s(frozen=True)
class ModelSettings:
    beta: float = attr.ib(default=-1.0)
    gamma: float = attr.ib(default=0.5)
    c2: float = attr.ib(default=0.05)
    ph_coeffs: Tuple[complex, ...] = attr.ib(default=(0j, 0j, 0j))
    ricci_ph_coeffs: Tuple[complex, ...] = attr.ib(default=(0.5 + 0j, 0.25j, 0j))
    match_offset: float = attr.ib(default=0.0)


@attr.s(frozen=True)
class SolverSettings:
    grid_nodes: int = attr.ib(default=256)
    tol: float = attr.ib(default=1e-8)
    max_iterations: int = attr.ib(default=50)
    r0_factor: float = attr.ib(default=50.0)
    lipschitz_pairs: int = attr.ib(default=16)
    ift_override: bool = attr.ib(default=False)


@attr.s(frozen=True)
class SampleSettings:
    identities: int = attr.ib(default=200)
    random_fields: int = attr.ib(default=100)
    annulus: int = attr.ib(default=256)
    ricci: int = attr.ib(default=256)
    gh_points: int = attr.ib(default=400)
    gh_cycle: int = attr.ib(default=100)
    knn: int = attr.ib(default=8)


@attr.s(frozen=True)
class ExperimentConfig:
    """Configurazione completa di una sessione del laboratorio"""

    sweep: SweepSettings = attr.ib(factory=SweepSettings)
    model: ModelSettings = attr.ib(factory=ModelSettings)
    solver: SolverSettings = attr.ib(factory=SolverSettings)
    samples: SampleSettings = attr.ib(factory=SampleSettings)
    tolerances: Dict[str, float] = attr.ib(factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = attr.ib(default=0)
    workers: int = attr.ib(default=1)
    output_dir: str = attr.ib(default="output")
    suites: Tuple[str, ...] = attr.ib(default=KNOWN_SUITES, converter=tuple)

    def with_overrides(self, output_dir: Optional[str] = None, seed: Optional[int] = None,
                       workers: Optional[int] = None, beta: Optional[float] = None,
                       deltas=None, suites=None) -> "ExperimentConfig":
        """Apply command-line overrides (None leaves a field unchanged)"""
        changes = {}
        if output_dir is not None:
            changes["output_dir"] = output_dir
        if seed is not None:
            changes["seed"] = int(seed)
        if workers is not None:
            changes["workers"] = max(1, int(workers))
        if suites is not None:
            changes["suites"] = tuple(suites)
        config = attr.evolve(self, **changes)
        if beta is not None:
            _check_beta(beta, None)
            config = attr.evolve(config, model=attr.evolve(config.model, beta=float(beta)))
        if deltas is not None:
            deltas = tuple(float(d) for d in deltas)
            _check_deltas(deltas, config.sweep.delta_max, None)
            config = attr.evolve(config, sweep=attr.evolve(config.sweep, deltas=deltas))
        return config

    def snapshot(self) -> dict:
        """Plain dictionary for run_metadata.json"""
        data = attr.asdict(self)
        for key in ("ph_coeffs", "ricci_ph_coeffs"):
            data["model"][key] = [repr(complex(c)) for c in data["model"][key]]
        return data


# --- parsing ----------------------------------------------------------------

_SECTIONS = {
    "run": {"suites", "seed", "workers", "output_dir"},
    "sweep": set(attr.fields_dict(SweepSettings)),
    "model": set(attr.fields_dict(ModelSettings)),
    "solver": set(attr.fields_dict(SolverSettings)),
    "samples": set(attr.fields_dict(SampleSettings)),
    "tolerances": set(DEFAULT_TOLERANCES),
}


def _line_numbers(text: str) -> Dict[Tuple[Optional[str], Optional[str]], int]:
    """Line number of every [section] header and key assignment"""
    locations = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        header = re.match(r"^\[([^\]]+)\]$", stripped)
        if header:
            section = header.group(1).strip()
            locations.setdefault((section, None), number)
            continue
        key = re.match(r"^([^=:]+)[=:]", stripped)
        if key:
            locations.setdefault((section, key.group(1).strip().lower()), number)
    return locations


class _Reader:
    """Typed access to a parsed configuration, raising ConfigParseError with line and field"""

    def __init__(self, parser: configparser.ConfigParser, lines: Dict):
        self.parser = parser
        self.lines = lines

    def error(self, section: str, key: Optional[str], message: str) -> ConfigParseError:
        field = f"{section}.{key}" if key else section
        return ConfigParseError(message, line=self.lines.get((section, key)), field=field)

    def raw(self, section: str, key: str) -> Optional[str]:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return None

    def get(self, section: str, key: str, cast, default):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            return cast(raw.strip())
        except (TypeError, ValueError) as e:
            raise self.error(section, key, f"valore non valido '{raw.strip()}': {e}")

    def get_list(self, section: str, key: str, cast, default):
        raw = self.raw(section, key)
        if raw is None:
            return default
        items = [item.strip() for item in raw.split(",") if item.strip()]
        try:
            return tuple(cast(item) for item in items)
        except (TypeError, ValueError) as e:
            raise self.error(section, key, f"lista non valida '{raw.strip()}': {e}")


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"booleano atteso, ricevuto '{text}'")


def _check_beta(beta: float, reader: Optional[_Reader]):
    if not (-2.0 < beta < 0.0):
        message = f"beta deve stare nell'intervallo aperto (-2, 0), ricevuto {beta}"
        if reader is None:
            raise ConfigParseError(message, field="model.beta")
        raise reader.error("model", "beta", message)


def _check_deltas(deltas, delta_max: float, reader: Optional[_Reader]):
    problems = []
    if not deltas:
        problems.append("la lista dei delta è vuota")
    if any(d <= 0.0 for d in deltas):
        problems.append("i delta devono essere positivi")
    if any(d > delta_max for d in deltas):
        problems.append(f"i delta devono essere <= delta_max = {delta_max}")
    if len(set(deltas)) != len(deltas):
        problems.append("i delta devono essere distinti")
    if problems:
        message = "; ".join(problems)
        if reader is None:
            raise ConfigParseError(message, field="sweep.deltas")
        raise reader.error("sweep", "deltas", message)


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse and validate configuration text.

    Raises:
        ConfigParseError: syntax errors, unknown sections or keys, invalid values
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigParseError(f"sintassi non valida: {e}", line=getattr(e, "lineno", None))
    lines = _line_numbers(text)
    reader = _Reader(parser, lines)

    for section in parser.sections():
        if section not in _SECTIONS:
            raise reader.error(section, None, f"sezione sconosciuta [{section}]")
        for key in parser.options(section):
            if key not in _SECTIONS[section]:
                raise reader.error(section, key, f"chiave sconosciuta '{key}'")

    defaults = ExperimentConfig()
    suites = reader.get_list("run", "suites", str, defaults.suites)
    for suite in suites:
        if suite not in KNOWN_SUITES:
            raise reader.error("run", "suites", f"suite sconosciuta '{suite}'")

    sweep = SweepSettings(
        deltas=reader.get_list("sweep", "deltas", float, defaults.sweep.deltas),
        delta_max=reader.get("sweep", "delta_max", float, defaults.sweep.delta_max),
        annulus_alpha=reader.get("sweep", "annulus_alpha", float, defaults.sweep.annulus_alpha),
        neck_alphas=reader.get_list("sweep", "neck_alphas", float, defaults.sweep.neck_alphas),
        core_alphas=reader.get_list("sweep", "core_alphas", float, defaults.sweep.core_alphas),
    )
    _check_deltas(sweep.deltas, sweep.delta_max, reader)
    for key in ("neck_alphas", "core_alphas"):
        if any(not (0.0 <= a <= 2.0) for a in getattr(sweep, key)):
            raise reader.error("sweep", key, "gli esponenti alpha devono stare in [0, 2]")

    model = ModelSettings(
        beta=reader.get("model", "beta", float, defaults.model.beta),
        gamma=reader.get("model", "gamma", float, defaults.model.gamma),
        c2=reader.get("model", "c2", float, defaults.model.c2),
        ph_coeffs=reader.get_list("model", "ph_coeffs", complex, defaults.model.ph_coeffs),
        ricci_ph_coeffs=reader.get_list("model", "ricci_ph_coeffs", complex,
                                        defaults.model.ricci_ph_coeffs),
        match_offset=reader.get("model", "match_offset", float, defaults.model.match_offset),
    )
    _check_beta(model.beta, reader)
    if not (0.0 < model.gamma < 1.0):
        raise reader.error("model", "gamma", f"gamma deve stare in (0, 1), ricevuto {model.gamma}")
    for key in ("ph_coeffs", "ricci_ph_coeffs"):
        if len(getattr(model, key)) != 3:
            raise reader.error("model", key, "servono esattamente tre coefficienti complessi")

    solver = SolverSettings(
        grid_nodes=reader.get("solver", "grid_nodes", int, defaults.solver.grid_nodes),
        tol=reader.get("solver", "tol", float, defaults.solver.tol),
        max_iterations=reader.get("solver", "max_iterations", int,
                                  defaults.solver.max_iterations),
        r0_factor=reader.get("solver", "r0_factor", float, defaults.solver.r0_factor),
        lipschitz_pairs=reader.get("solver", "lipschitz_pairs", int,
                                   defaults.solver.lipschitz_pairs),
        ift_override=reader.get("solver", "ift_override", _parse_bool,
                                defaults.solver.ift_override),
    )
    if solver.grid_nodes < MIN_GRID_NODES:
        raise reader.error("solver", "grid_nodes",
                           f"servono almeno {MIN_GRID_NODES} nodi, ricevuti {solver.grid_nodes}")
    if solver.tol <= 0.0 or solver.max_iterations < 1:
        raise reader.error("solver", "tol" if solver.tol <= 0.0 else "max_iterations",
                           "tolleranza e numero di iterazioni devono essere positivi")

    samples = SampleSettings(**{
        name: reader.get("samples", name, int, getattr(defaults.samples, name))
        for name in attr.fields_dict(SampleSettings)
    })
    for name, value in attr.asdict(samples).items():
        if value < 1:
            raise reader.error("samples", name, f"il conteggio deve essere positivo: {value}")

    tolerances = dict(DEFAULT_TOLERANCES)
    for name in DEFAULT_TOLERANCES:
        tolerances[name] = reader.get("tolerances", name, float, tolerances[name])
        if tolerances[name] <= 0.0:
            raise reader.error("tolerances", name, "le tolleranze devono essere positive")

    workers = reader.get("run", "workers", int, defaults.workers)
    if workers < 1:
        raise reader.error("run", "workers", f"workers deve essere >= 1, ricevuto {workers}")

    return ExperimentConfig(
        sweep=sweep,
        model=model,
        solver=solver,
        samples=samples,
        tolerances=tolerances,
        seed=reader.get("run", "seed", int, defaults.seed),
        workers=workers,
        output_dir=reader.get("run", "output_dir", str, defaults.output_dir),
        suites=suites,
    )


def load_config(path: Optional[str] = None, output_dir: Optional[str] = None,
                environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Load a configuration file applying the precedence rules.

    Args:
        path: config file (configs/default.ini when None and present, else built-ins)
        output_dir: command-line output directory
        environ: environment mapping (os.environ when None)
    """
    environ = os.environ if environ is None else environ
    if path is None and os.path.exists(DEFAULT_CONFIG_PATH):
        path = DEFAULT_CONFIG_PATH
    if path is None:
        config = ExperimentConfig()
    else:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigParseError(f"impossibile leggere {path}: {e}")
        config = parse_config_text(text, source=path)
        logger.debug(f"Configurazione caricata da {path}")

    if output_dir is not None:
        return config.with_overrides(output_dir=output_dir)
    if environ.get(OUTPUT_ENV_VAR):
        return config.with_overrides(output_dir=environ[OUTPUT_ENV_VAR])
    return config
