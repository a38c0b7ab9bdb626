"""Robust integral reinforcement learning for glucose regulation.

Modules, bottom up: :mod:`matrix_core` (symmetric linear algebra),
:mod:`sdp` (LMI feasibility), :mod:`critic` (value-kernel estimation),
:mod:`actor` (robust gain synthesis), :mod:`plant` (virtual patient) and
:mod:`harness` (scenarios, metrics, CSV and the command line).
"""

__version__ = "0.1.0"
