"""End-to-end and convergence tests for mfeit (run with ``-m slow``)."""
