"""Eigenvector analysis: symmetry, classification, pairing and coupling sweeps."""

from .modes import (
    ANTISYMMETRIC,
    MIXED,
    NON_TUNNELING,
    SYMMETRIC,
    TUNNELING,
    UNRESOLVED,
    ContourGrid,
    ModeClass,
    ModeRecord,
    Thresholds,
    analysis_components,
    analyze_modes,
    classify_mode,
    contour_grid,
    local_transform,
    pair_tunneling_modes,
    quanta_group,
    symmetrize,
    symmetry_label,
    symmetry_names,
    write_contour,
    write_mode_csv,
)
from .sweep import (
    AvoidedCrossing,
    SweepResult,
    coupling_sweep,
    detect_avoided_crossings,
    write_crossings_json,
    write_sweep_csv,
)
