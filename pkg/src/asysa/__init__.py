"""Asymmetric systolic-array floorplanning.

Wirelength model and optimal PE aspect ratio (``model``), GEMM workloads
(``workload``), a weight-stationary array simulator with bus toggle counts
(``sim``), interconnect energy comparison (``power``) and the ``asysa``
command line (``cli``).
"""

__version__ = "0.1.0"
