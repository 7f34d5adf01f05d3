"""Multibang penalties and semismooth Newton solvers for optimal control
problems whose controls take values in a finite set."""

__version__ = "0.1.0"
