"""Figure rendering for the simulation lab's CSV outputs.

Strictly a consumer of the documented CSV contracts: scripts here never
re-run simulations.
"""

__version__ = "0.1.0"
