"""HTTP service wrapping the mechanism library."""

from .app import app

__all__ = ["app"]
