"""Replication toolkit: deferred-update engines over a multiversion store.

Submodules: core (shared types), mvstore (versioned storage), ordering
(sequenced group delivery), dur / pdur (the two engines), workloads
(benchmark generators), model (analytic scaling), checker (serializability
validation), driver (experiment runner), cli (command line).
"""

__version__ = "0.1.0"
