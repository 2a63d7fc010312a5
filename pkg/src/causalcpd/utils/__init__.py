"""Ambient services shared by the library and the CLI: configuration, logging, errors, progress, parallelism."""
