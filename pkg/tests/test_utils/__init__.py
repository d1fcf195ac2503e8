"""Test package for onehomog utilities."""
