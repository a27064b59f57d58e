"""Trace-mining toolkit for crowd-sourced smartphone measurement logs."""

__version__ = "0.1.0"
