"""Unstable-manifold fans, the mesh of Gamma and its topology."""

from .fan import Edge, OrbitFan, trace_edge, trace_fan
from .mesh import ChartInfo, GammaMesh, build_gamma, chart_map, trace_all
from .topology import (
    TopologyReport,
    classify_combinatorial,
    classify_topology,
    classify_triangles,
    edge_table,
)

__all__ = [
    "ChartInfo",
    "Edge",
    "GammaMesh",
    "OrbitFan",
    "TopologyReport",
    "build_gamma",
    "chart_map",
    "classify_combinatorial",
    "classify_topology",
    "classify_triangles",
    "edge_table",
    "trace_all",
    "trace_edge",
    "trace_fan",
]
