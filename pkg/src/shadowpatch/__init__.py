"""shadowpatch: production-driven patch generation behind an HTTP shadow proxy."""

__version__ = "0.1.0"
