"""Buyer/seller agent price negotiation: engine, metrics, bandit prompt optimizer."""

__version__ = "0.1.0"
