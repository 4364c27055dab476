"""IMU sequences, frames, windowing and synthetic data."""
