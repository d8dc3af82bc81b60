"""Near-field localization with a 1-bit dynamic metasurface antenna receiver."""

__version__ = "0.1.0"
