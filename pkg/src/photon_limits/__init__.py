"""Simulation and theory of the resolution/noise trade-off in single-photon LiDAR arrays."""

from __future__ import annotations

__version__ = "0.1.0"
