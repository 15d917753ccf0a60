"""Directed spatial permutations on asymmetric tori.

Exact equilibrium samplers built on per-column hard-core models, the
contact-driven split-merge Glauber dynamics, cycle and traversal geometry,
the ideal gap chain, and reference models (stick breaking, uniform
permutation cycles, random transpositions) with a seeded experiment
runner for verifying the model's structural behavior at desk scale.
"""

__version__ = "0.1.0"
