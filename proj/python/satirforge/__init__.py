"""Pseudo-label composition, RLE codec and segmentation metrics."""

from ._core import (
    DimensionMismatch,
    EmptyEvaluation,
    EmptyForeground,
    IoError,
    LabelOutOfRange,
    MalformedCounts,
    SatirforgeError,
    SchemaError,
    TooManyCategories,
    bitmask_to_counts,
    compose,
    confusion_matrix,
    counts_to_bitmask,
    decode_counts,
    distance_transform,
    encode_counts,
    evaluate,
    label_dump,
    miou,
    naive_miou,
    read_label_png,
    selfcheck,
    weighted_fbeta,
    weighted_fbeta_multiclass,
    write_label_png,
)

__all__ = [name for name in dir() if not name.startswith("_")]
