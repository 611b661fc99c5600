"""Numerical core: geometry, forward solvers, detection, reconstruction and fusion."""
