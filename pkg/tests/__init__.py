"""Test package for mfeit."""
