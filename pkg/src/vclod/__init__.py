"""Velocity-contingent level-of-detail toolkit.

Quadric mesh simplification into LOD chains, speed-thresholded LOD
scheduling over head-rotation traces, a simulated two-interval forced
choice experiment and maximum-likelihood psychometric analysis.
"""

__version__ = "0.1.0"
TOOL_NAME = "vclod"
