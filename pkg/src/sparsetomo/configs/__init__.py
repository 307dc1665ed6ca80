"""Bundled run configurations (desk-scale geometry, self-contained)."""
