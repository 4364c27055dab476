"""Core plumbing: configuration, errors, the tensor engine and gradient checks."""
