"""Data-driven QSR-dissipativity certification and compositional stability
analysis of interconnected discrete-time LTI systems.

Submodules
----------
signals
    Trajectories, block-Hankel matrices, excitation/rank informativity tests.
lti
    State-space models, exact simulation, ZOH discretization, equilibria.
realization
    Non-minimal data-based realizations and their minimal reduction.
certify
    Supply rates, passivity indices, dissipativity LMIs and certificates.
network
    Interconnection graphs, compositional stability, index optimization.
microgrid
    Four-area DC microgrid scenario generator for end-to-end runs.
cli
    Batch command-line front end (``dissipacert`` entry point).
"""

from . import certify, cli, lti, microgrid, network, realization, signals  # noqa: F401

__version__ = "0.1.0"
