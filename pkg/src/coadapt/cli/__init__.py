"""Command-line interface and experiment configuration."""

from coadapt.cli.config import PRESETS, ExperimentConfig, parse_flat, resolve_config
from coadapt.cli.main import build_parser, main

__all__ = ["PRESETS", "ExperimentConfig", "build_parser", "main", "parse_flat", "resolve_config"]
