"""Trajectory error metrics."""
