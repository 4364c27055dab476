"""VeloNet odometry - deep inertial odometry with a Res2Net/CBAM velocity network."""

__version__ = "0.1.0"
