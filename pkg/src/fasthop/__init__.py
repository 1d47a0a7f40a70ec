"""IP fast hopping: per-packet server address hopping against DDoS floods."""

__version__ = "0.1.0"
