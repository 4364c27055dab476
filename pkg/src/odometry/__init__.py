"""Velocity integration, trajectories and the PDR baseline."""
