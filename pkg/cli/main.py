#!/usr/bin/env python3
"""
Node Gluing Lab - Interfaccia a riga di comando

Uso:
    python3 run_lab.py [opzioni globali] <comando> [opzioni]

Comandi: verify-identities, sweep-decay, solve, gh, report, node-bound, run.
Exit status 0 when every check passes, 1 when some check fails, 2 for usage and
configuration errors.
"""

import logging
import sys
from typing import Dict, List, Optional, Sequence

import attr
import click

try:
    from ..core.errors import ConfigParseError, DegreeOutOfRange
    from ..core.gluing_models import DELTA_MAX
    from ..utils.lab_logger import create_logger_for_experiment
except ImportError:
    from core.errors import ConfigParseError, DegreeOutOfRange
    from core.gluing_models import DELTA_MAX
    from utils.lab_logger import create_logger_for_experiment

from . import __version__
from .config import KNOWN_SUITES, ExperimentConfig, load_config
from .experiment_manager import ExperimentManager
from .node_bound import node_bound
from .suites import SWEEP_REGIONS, run_suites

logger = logging.getLogger(__name__)

CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@attr.s
class LabContext:
    config: ExperimentConfig = attr.ib()
    progress: bool = attr.ib(default=False)
    resume: bool = attr.ib(default=False)


def _configure_logging(verbose: int, quiet: bool):
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _load(config_path: Optional[str], output_dir: Optional[str], seed: Optional[int],
          workers: Optional[int]) -> ExperimentConfig:
    try:
        config = load_config(config_path, output_dir=output_dir)
        return config.with_overrides(seed=seed, workers=workers)
    except ConfigParseError as e:
        raise click.UsageError(f"Configurazione non valida: {e}")


def _run_session(lab: LabContext, suites: Sequence[str],
                 options: Optional[Dict[str, Dict]] = None) -> int:
    """Prepara la cartella di output, esegue le suite e chiude la sessione"""
    config = lab.config
    manager = ExperimentManager(config.output_dir)
    manager.start(config.snapshot(), list(suites), __version__)
    session_logger = create_logger_for_experiment(manager)
    status = 1
    try:
        if session_logger:
            session_logger.log_operation_start("sessione", {"suites": ", ".join(suites)})
        status = run_suites(config, suites, manager.get_paths(), manager,
                            progress=lab.progress, resume=lab.resume, options=options)
    finally:
        manager.finish(status)
        if session_logger:
            session_logger.log_operation_end("sessione", status == 0, {"exit": status})
            session_logger.close()

    if status == 0:
        click.echo(f"✅ Suite completate: {', '.join(suites)} -> {config.output_dir}")
    else:
        click.echo(f"❌ Alcuni controlli sono falliti (dettagli in {config.output_dir}/reports)",
                   err=True)
    return status


@click.group(context_settings=CONTEXT_SETTINGS)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="File di configurazione INI (default: configs/default.ini)")
@click.option("--output-dir", type=click.Path(file_okay=False),
              help="Cartella di output (precede NODE_GLUING_LAB_OUTPUT)")
@click.option("--seed", type=int, help="Seed dei campionamenti")
@click.option("--workers", type=click.IntRange(min=1), help="Thread per le righe indipendenti")
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug")
@click.option("-q", "--quiet", is_flag=True, help="Solo errori, nessuna barra di avanzamento")
@click.option("--resume", is_flag=True, help="Salta le suite con report già scritto")
@click.version_option(__version__, prog_name="node-gluing-lab")
@click.pass_context
def cli(ctx, config_path, output_dir, seed, workers, verbose, quiet, resume):
    """Laboratorio numerico per l'incollamento di metriche di Kähler-Einstein ai nodi"""
    _configure_logging(verbose, quiet)
    if ctx.invoked_subcommand == "node-bound":
        ctx.obj = LabContext(ExperimentConfig())
        return
    config = _load(config_path, output_dir, seed, workers)
    ctx.obj = LabContext(config, progress=not quiet and sys.stderr.isatty(), resume=resume)


@cli.command("verify-identities")
@click.pass_obj
def verify_identities_command(lab: LabContext):
    """Identità numeriche del modello locale"""
    sys.exit(_run_session(lab, ["verify-identities"]))


@cli.command("sweep-decay")
@click.option("--region", type=click.Choice(SWEEP_REGIONS), help="Una sola regione")
@click.option("--k", "order", type=click.IntRange(0, 2), help="Un solo ordine di derivata")
@click.pass_obj
def sweep_decay_command(lab: LabContext, region, order):
    """Sweep in delta delle stime di decadimento"""
    sys.exit(_run_session(lab, ["sweep-decay"],
                          {"sweep-decay": {"region": region, "k": order}}))


def _check_delta(ctx, param, values):
    for value in values:
        if not (0.0 < value <= DELTA_MAX):
            raise click.BadParameter(f"delta deve stare in (0, {DELTA_MAX}], ricevuto {value}")
    return values


def _check_beta(ctx, param, value):
    if value is not None and not (-2.0 < value < 0.0):
        raise click.BadParameter(f"beta deve stare in (-2, 0), ricevuto {value}")
    return value


@cli.command("solve")
@click.option("--delta", "deltas", type=float, multiple=True, callback=_check_delta,
              help="Valori di delta (ripetibile; default: lo sweep della configurazione)")
@click.option("--beta", type=float, callback=_check_beta, help="Esponente del peso in (-2, 0)")
@click.pass_obj
def solve_command(lab: LabContext, deltas, beta):
    """Risoluzione di Newton con il test della funzione implicita"""
    options = {"deltas": deltas or None, "beta": beta}
    sys.exit(_run_session(lab, ["solve"], {"solve": options}))


@cli.command("gh")
@click.pass_obj
def gh_command(lab: LabContext):
    """Convergenza di Gromov-Hausdorff al cono nodale"""
    sys.exit(_run_session(lab, ["gh"]))


@cli.command("report")
@click.pass_obj
def report_command(lab: LabContext):
    """Grafici e summary.json dai fit già scritti"""
    sys.exit(_run_session(lab, ["report"]))


@cli.command("node-bound")
@click.option("--degree", "degrees", type=int, multiple=True, required=True,
              help="Grado della superficie di Del Pezzo (ripetibile)")
def node_bound_command(degrees: List[int]):
    """Numero massimo di nodi per grado"""
    for degree in degrees:
        try:
            bound = node_bound(degree)
        except DegreeOutOfRange as e:
            raise click.BadParameter(str(e), param_hint="--degree")
        click.echo(f"{degree}\t{bound}")


@cli.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Configurazione della sessione (sostituisce quella globale)")
@click.pass_context
def run_command(ctx, config_path):
    """Esegue le suite elencate in [run] suites"""
    lab = ctx.obj
    if config_path is not None:
        parent = ctx.parent.params
        lab = attr.evolve(lab, config=_load(config_path, parent["output_dir"],
                                            parent["seed"], parent["workers"]))
    sys.exit(_run_session(lab, _configured_suites(lab.config)))


def _configured_suites(config: ExperimentConfig) -> List[str]:
    """Suites of [run] suites in execution order (report last)"""
    return [s for s in KNOWN_SUITES if s in config.suites]


def run_config(path: Optional[str] = None, output_dir: Optional[str] = None,
               resume: bool = False) -> int:
    """
    Carica una configurazione ed esegue le sue suite.

    Returns:
        0 when every pass flag is true, 1 otherwise

    Raises:
        ConfigParseError: unreadable or invalid configuration
    """
    config = load_config(path, output_dir=output_dir)
    return _run_session(LabContext(config, resume=resume), _configured_suites(config))


def main(argv: Optional[Sequence[str]] = None):
    cli.main(args=argv, prog_name="node-gluing-lab")


if __name__ == "__main__":
    main()
