"""Decision-tree guided intent annotation for tutoring dialogs."""

__version__ = "0.1.0"
