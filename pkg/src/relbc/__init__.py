"""Simulator for relativistic bit commitment by transmitting BB84 measurement outcomes."""

__version__ = "0.1.0"
