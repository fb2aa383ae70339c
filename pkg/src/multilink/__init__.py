"""Multiple record linkage of K datafiles over the lattice of set partitions."""
from ._kernels import BACKEND
from .comparison import (DataFile, FieldComparator, PatternTable, Record, blocking_pattern,
                         build_pattern_table, compare_field, derive_banded_fields)
from .decision import Assignments, ErrorLevels, classify, complement_likelihood, weight
from .errors import (ConfigError, DegeneratePatternError, DegeneratePrevalenceError, DimensionError,
                     FitError, InitializationError, InputError, LinkageError, ScoringError,
                     SizeLimitError, SpecError, UndefinedMetricError, UndefinedWeightError)
from .evaluation import ConfusionMatrix, confusion, mwge, ome
from .lattice import (Partition, PatternSpace, bell_number, enumerate_patterns, hasse_edges,
                      is_refinement, meet, partition_from_labels)
from .model import FitResult, ModelParams, e_step, fit, initial_params, m_step, observed_loglik
from .synthetic import (FieldSpec, GroundTruth, PopulationSpec, corrupt_files, generate_population,
                        hit_miss_categorical, hit_miss_numeric)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Assignments", "ConfigError", "ConfusionMatrix", "DataFile", "DegeneratePatternError",
    "DegeneratePrevalenceError", "DimensionError", "ErrorLevels", "FieldComparator", "FieldSpec",
    "FitError", "FitResult", "GroundTruth", "InitializationError", "InputError", "LinkageError",
    "ModelParams", "Partition", "PatternSpace", "PatternTable", "PopulationSpec", "Record",
    "ScoringError", "SizeLimitError", "SpecError", "UndefinedMetricError", "UndefinedWeightError",
    "bell_number", "blocking_pattern", "build_pattern_table", "classify", "compare_field",
    "complement_likelihood", "confusion", "corrupt_files", "derive_banded_fields", "e_step",
    "enumerate_patterns", "fit", "generate_population", "hasse_edges", "hit_miss_categorical",
    "hit_miss_numeric", "initial_params", "is_refinement", "m_step", "meet", "mwge",
    "observed_loglik", "ome", "partition_from_labels", "weight",
]
