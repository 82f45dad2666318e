"""Correlator-based signatures of multi-photon interference."""
__version__ = "0.1.0"
