"""Benchmark harness: TOML experiments, CSV traces, SVG plots and the CLI."""

from .config import ConfigError, ExperimentConfig, MethodSpec, ProblemSpec, load_config, parse_config
from .emit import CSV_COLUMNS, emit_plot_svg, emit_trace_csv, read_trace_csv
from .runner import MethodResult, RunSummary, build_problem, run_experiment, starting_point
