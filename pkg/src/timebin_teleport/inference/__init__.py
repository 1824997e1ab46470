"""Curve fits, tomography, decoy bounds and resampling."""

from .decoy import DecoyBound, DecoyDataset, DecoyRow, decoy_bound, read_decoy_csv, write_decoy_csv
from .fit import FitResult, fit_fringe, fit_hom_dip
from .resample import poisson_resample, poisson_resample_detailed
from .tomography import (
    DensityMatrix,
    TomographyData,
    qst_mle,
    qst_mle_detailed,
    read_counts_csv,
    state_fidelity,
    trace_distance,
    write_counts_csv,
)

__all__ = [
    "DecoyBound", "DecoyDataset", "DecoyRow", "decoy_bound", "read_decoy_csv", "write_decoy_csv",
    "FitResult", "fit_fringe", "fit_hom_dip",
    "poisson_resample", "poisson_resample_detailed",
    "DensityMatrix", "TomographyData", "qst_mle", "qst_mle_detailed", "read_counts_csv",
    "state_fidelity", "trace_distance", "write_counts_csv",
]
