"""matcoach: simulated-patient toolkit for behaviour-change intervention models."""

__version__ = "0.1.0"
