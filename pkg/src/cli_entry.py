# Explicit imports to help PyInstaller bundle all dependencies
import typer  # noqa: F401
import rich  # noqa: F401
import tenacity  # noqa: F401
import pydantic  # noqa: F401
import numpy  # noqa: F401
import scipy  # noqa: F401
import pandas  # noqa: F401
import matplotlib  # noqa: F401

from causalcpd.cli.typer_main import run

if __name__ == "__main__":
    run()
