"""Command-line interface for causal-cpd, built on typer_main.py."""
