"""
VLD Navigation

Deterministic window-level drone delivery: request understanding, floor
localization, depth-discontinuity exploration and approach in a procedural
building world, with pluggable perception backends and an evaluation harness.
"""

__version__ = "0.1.0"
