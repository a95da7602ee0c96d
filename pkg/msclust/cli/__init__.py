"""msclust - Command Line Interface Package."""

from msclust.cli.app import app, cli_main

__all__ = ["app", "cli_main"]
