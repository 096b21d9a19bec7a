"""python -m nanonetsim delegates to the CLI."""

from .cli import entrypoint

entrypoint()
