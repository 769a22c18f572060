"""schemreview: a reproducible multi-agent schematic design-review pipeline."""

__version__ = "0.1.0"
