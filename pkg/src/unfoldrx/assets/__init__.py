"""Bundled data assets."""
