"""Bundled experiment configs."""
