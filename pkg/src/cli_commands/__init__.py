"""CLI command modules for VeloNet odometry."""
