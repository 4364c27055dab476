"""Loss, optimiser, learning-rate schedule and the fit loop."""
