from .store import (AnnotationRecord, BenchmarkPair, BenchmarkSet, RecordStore,
                    GRACE_S, TIME_LIMIT_S)
from .metrics import (ROCCurve, binary_accuracy, eer_auroc_from_roc,
                      interpolated_roc, model_accuracy_threshold)
from .service import create_app

__all__ = [
    "AnnotationRecord", "BenchmarkPair", "BenchmarkSet", "RecordStore",
    "GRACE_S", "TIME_LIMIT_S", "ROCCurve", "binary_accuracy",
    "eer_auroc_from_roc", "interpolated_roc", "model_accuracy_threshold",
    "create_app",
]
