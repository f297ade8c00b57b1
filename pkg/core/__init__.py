"""
Core - Nuclei numerici del laboratorio di gluing

Questo modulo contiene le carte della superficie, i modelli locali del nodo,
l'analisi pesata, il solutore di Monge-Ampère e gli esperimenti di Gromov-Hausdorff.

Componenti:
- GluingParams, SurfacePoint: parametri e punti di V_t
- PregluedModel: potenziale pre-incollato e potenziale di Ricci
- MongeAmpereOperator, newton_solve: operatore E e soluzione di Newton
- SampledMetricSpace, convergence_experiment: stime GH
"""

from .errors import GluingLabError
from .gh_convergence import SampledMetricSpace, convergence_experiment, gh_upper_bound
from .gluing_models import PregluedModel, RegionTag, preglued_potential, ricci_potential
from .ma_solver import MongeAmpereOperator, SolveReport, ift_gate, newton_solve
from .surface_charts import GluingParams, HermitianForm2, SurfacePoint, complex_hessian
from .weighted_analysis import DecayFit, WeightFunction, decay_fit

__all__ = [
    'GluingLabError',
    'GluingParams',
    'SurfacePoint',
    'HermitianForm2',
    'complex_hessian',
    'PregluedModel',
    'RegionTag',
    'preglued_potential',
    'ricci_potential',
    'WeightFunction',
    'DecayFit',
    'decay_fit',
    'MongeAmpereOperator',
    'SolveReport',
    'ift_gate',
    'newton_solve',
    'SampledMetricSpace',
    'convergence_experiment',
    'gh_upper_bound'
]
