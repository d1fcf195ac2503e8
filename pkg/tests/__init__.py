"""Test package for onehomog."""
