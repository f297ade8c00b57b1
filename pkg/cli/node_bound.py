"""
Node bound - numero massimo di nodi di una superficie di Del Pezzo nodale smussabile
"""

try:
    from ..core.errors import DegreeOutOfRange
except ImportError:
    from core.errors import DegreeOutOfRange


def node_bound(degree: int) -> int:
    """
    10 − 2·degree: the largest number of nodes of a smoothable nodal Del Pezzo surface of
    that degree with finite automorphism group (≤ 0 means none exists).

    Raises:
        DegreeOutOfRange: degree outside 1..9
    """
    if isinstance(degree, bool) or int(degree) != degree or not (1 <= degree <= 9):
        raise DegreeOutOfRange(f"Il grado deve essere un intero tra 1 e 9, ricevuto {degree}")
    return 10 - 2 * int(degree)
