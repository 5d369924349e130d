"""Entry point for ``python -m srd``."""

from .cli import main

main()
