"""PMU-driven under-frequency load shedding on a reduced grid frequency model."""

__version__ = "0.1.0"
