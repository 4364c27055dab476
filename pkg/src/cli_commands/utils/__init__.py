"""Utility modules for CLI commands."""
