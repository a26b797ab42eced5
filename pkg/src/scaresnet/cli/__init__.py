"""CLI package for scaresnet."""

from scaresnet.cli.main import build_parser, main, parse_args, run_cli

__all__ = ["build_parser", "main", "parse_args", "run_cli"]
