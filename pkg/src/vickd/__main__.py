"""Entry point for python -m vickd."""

from .cli import main

main()
