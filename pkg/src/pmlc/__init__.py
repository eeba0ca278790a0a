"""pmlc: compile counting modal logic into exact message passing networks."""

__version__ = "0.1.0"
