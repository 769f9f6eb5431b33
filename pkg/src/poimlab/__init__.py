"""Fixed-point on-chain classifiers with stake-governed updates, simulated end to end."""

__version__ = "0.1.0"
