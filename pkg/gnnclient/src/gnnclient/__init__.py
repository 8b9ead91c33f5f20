"""Reference learned-simulator client for the flowbench container format."""

__version__ = "0.1.0"
