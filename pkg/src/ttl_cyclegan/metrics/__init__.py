from .classification import (
    ConfusionMatrix,
    DistanceRow,
    accuracy_by_distance,
    confusion_from_predictions,
    evaluate_classifier,
    predict,
)
from .features import classifier_penultimate, extract_features, get_extractor
from .fid import FidResult, fid, frechet_distance
from .reports import (
    JsonlWriter,
    image_grid,
    read_jsonl,
    write_confusion_csv,
    write_confusion_png,
    write_distance_csv,
    write_summary_csv,
)

__all__ = [
    "ConfusionMatrix",
    "DistanceRow",
    "FidResult",
    "JsonlWriter",
    "accuracy_by_distance",
    "classifier_penultimate",
    "confusion_from_predictions",
    "evaluate_classifier",
    "extract_features",
    "fid",
    "frechet_distance",
    "get_extractor",
    "image_grid",
    "predict",
    "read_jsonl",
    "write_confusion_csv",
    "write_confusion_png",
    "write_distance_csv",
    "write_summary_csv",
]
