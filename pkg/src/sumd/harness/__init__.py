from .experiments import ExperimentConfig, SyntheticParams, run_detection, run_replay
from .reports import ReportTable

__all__ = ["ExperimentConfig", "SyntheticParams", "ReportTable", "run_replay", "run_detection"]
