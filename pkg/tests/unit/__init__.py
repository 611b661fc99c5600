"""Unit tests for mfeit."""
