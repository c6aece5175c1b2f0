"""Harness for extracting and scoring cause/effect spans in financial text."""

__version__ = "0.1.0"
