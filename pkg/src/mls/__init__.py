"""Desk-scale IMS mobile learning platform."""

__version__ = "0.1.0"
