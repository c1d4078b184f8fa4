"""Subsampled nonmonotone spectral gradient methods for finite sums."""

from .dataset import Dataset, Split, load, load_csv, load_libsvm, split, synthesize, write_libsvm
from .linesearch import LineSearchParams, backtrack, zeta
from .objective import ComponentSum, CostCounters, ExpCache, FiniteSumObjective, LogisticObjective
from .sampling import SampleSchedule, SampleSet, intersection, next_nested, next_non_nested
from .solver import (
    GradNorm,
    IterationRecord,
    MaxIter,
    Method,
    RunResult,
    SpectralSolver,
    Status,
    ValidationStall,
    evaluate_stop,
    run,
    run_full,
)
from .spectral import bb_coefficient, direction

__version__ = "0.1.0"
