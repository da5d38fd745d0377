"""Bundled experiment configurations, loadable by name."""
