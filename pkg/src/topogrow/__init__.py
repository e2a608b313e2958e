"""topogrow: 2D SIMP topology optimization with logarithmic volume growth,
minimum-thickness erosion filtering and frequency design queries."""

__version__ = "0.1.0"

from .mesh_fem import (DensityField, FieldMap, GridMesh, LoadCase, MaterialLaw,
                       assemble_and_solve, compliance, element_stiffness, field_map)
from .growth import (GrowthCurve, HorizontalJump, VerticalJump, curve_points,
                     make_curve, next_volume, solid_compliance)
from .simp_core import (ConeFilter, FixedVolumeSchedule, HistoryRecord,
                        LinearGrowthSchedule, LogGrowthSchedule, OptimizerConfig,
                        OptimizationState, PlanSchedule, convolution_filter,
                        oc_update, run, sensitivities)
from .twigcutter import ErosionReport, ErosionSpec
from .freq_design import BandGap, FreqPoint, band_query, freq_point

__all__ = [
    "BandGap", "ConeFilter", "DensityField", "ErosionReport", "ErosionSpec",
    "FieldMap", "FixedVolumeSchedule", "FreqPoint", "GridMesh", "GrowthCurve",
    "HistoryRecord", "HorizontalJump", "LinearGrowthSchedule", "LoadCase",
    "LogGrowthSchedule", "MaterialLaw", "OptimizationState", "OptimizerConfig",
    "PlanSchedule", "VerticalJump", "assemble_and_solve", "band_query",
    "compliance", "convolution_filter", "curve_points", "element_stiffness",
    "field_map", "freq_point", "make_curve", "next_volume", "oc_update", "run",
    "sensitivities", "solid_compliance",
]
