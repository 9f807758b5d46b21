"""Experiment orchestration, metrics, reports and the CLI."""
from transferids.harness.config import ConfigError, ExperimentConfig, fixture_config, load_config
from transferids.harness.experiments import (
    ExperimentReport, Pipeline, run_dr_experiment, run_ensemble_experiment, run_experiment,
    run_transfer_experiment,
)
from transferids.harness.metrics import MetricRecord, compute_metrics
from transferids.harness.report import read_metrics_csv, write_report

__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentReport", "MetricRecord", "Pipeline", "compute_metrics",
    "fixture_config", "load_config", "read_metrics_csv", "run_dr_experiment", "run_ensemble_experiment",
    "run_experiment", "run_transfer_experiment", "write_report",
]
