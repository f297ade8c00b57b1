"""
CLI - Configurazione, orchestrazione delle suite e report

Componenti:
- ExperimentConfig, load_config: configurazione INI con precedenze
- ExperimentManager: cartella di output della sessione
- suites: verify-identities, sweep-decay, solve, gh, report
- node_bound: numero massimo di nodi per grado
"""

__version__ = "1.0.0"

from .config import ExperimentConfig, load_config, parse_config_text
from .experiment_manager import ExperimentManager
from .node_bound import node_bound

__all__ = [
    'ExperimentConfig',
    'load_config',
    'parse_config_text',
    'ExperimentManager',
    'node_bound'
]
