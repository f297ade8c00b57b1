"""
Node Gluing Lab - Laboratorio numerico per metriche di Kähler-Einstein incollate

Questo modulo verifica numericamente la costruzione per incollamento di metriche
di Kähler-Einstein sulle smussature di superfici di Del Pezzo nodali: modello
locale del nodo, stime di decadimento pesate, equazione di Monge-Ampère e
convergenza di Gromov-Hausdorff al cono nodale.

Struttura del modulo:
- core/: carte di V_t, modelli locali, analisi pesata, solutore, stime GH
- utils/: logger di sessione e scrittura atomica dei report
- cli/: configurazione, suite di esperimenti e riga di comando
- configs/: configurazione di default

Uso principale:
    # Riga di comando
    python3 run_lab.py run --config configs/default.ini

    # Uso programmatico
    from node_gluing_lab.core import GluingParams, newton_solve
"""

from .cli import __version__

__author__ = "Node Gluing Lab"

from .core import GluingParams, PregluedModel, convergence_experiment, newton_solve
from .cli.main import run_config

__all__ = [
    'GluingParams',
    'PregluedModel',
    'newton_solve',
    'convergence_experiment',
    'run_config'
]
