"""Agile-practice measurements from repository artifacts and nonparametric survey analysis."""

from .analysis import AnalysisConfig, AnalysisReport, run_analysis
from .measurements import MeasureId, MeasurementRecord, compute_all, parse_story_refs
from .stats import (
    StatTestResult,
    bonferroni,
    dunn_test,
    friedman_test,
    kendall_tau,
    krippendorff_alpha,
    kruskal_wallis,
    midranks,
    wilcoxon_signed_rank,
)
from .store import ProjectDataset, classify_path, load_archive, slice_sprint
from .survey import QuestionId, descriptive_stats, encode_likert, load_survey

__version__ = "0.1.0"
