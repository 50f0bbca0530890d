"""Coarse scalar-quantization hashing with sequence matching."""

from ._coarsehash import (
    DegenerateInput,
    FormatError,
    Index,
    Pca,
    Quantizer,
    SequenceMatcher,
    System,
    build_dataset,
    match_sequence,
    op_count,
    recall_at,
    recall_curve,
    storage_report,
)

__all__ = [
    "DegenerateInput",
    "FormatError",
    "Index",
    "Pca",
    "Quantizer",
    "SequenceMatcher",
    "System",
    "build_dataset",
    "match_sequence",
    "op_count",
    "recall_at",
    "recall_curve",
    "storage_report",
]
