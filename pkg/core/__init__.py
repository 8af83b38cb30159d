"""Core module: shared models and utilities."""
