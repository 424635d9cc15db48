"""frachk - optimal leader control for the fractional Hegselmann-Krause consensus model."""

__version__ = "0.1.0"
