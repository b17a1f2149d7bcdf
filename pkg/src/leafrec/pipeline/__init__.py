"""Feature extraction, fold planning, cross-validation and reports."""
from .cv import CvConfig, CvReport, FoldResult, fuse, run_cv, unfuse
from .features import FeatureConfig, LeafFeatureSet, branch_inputs, extract_features
from .folds import DatasetManifest, FoldPlan, audit_plan, make_fold_plan
from .report import write_report
from .synth import synth_leaf, write_dataset

__all__ = ["CvConfig", "CvReport", "DatasetManifest", "FeatureConfig", "FoldPlan", "FoldResult",
           "LeafFeatureSet", "audit_plan", "branch_inputs", "extract_features", "fuse",
           "make_fold_plan", "run_cv", "synth_leaf", "unfuse", "write_dataset", "write_report"]
