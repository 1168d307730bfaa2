"""HTTP front end for the scenario runner."""
from .app import app

__all__ = ['app']
