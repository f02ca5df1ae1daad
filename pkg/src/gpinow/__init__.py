"""Nowcasting a yearly peace index from monthly news-event counts."""

__version__ = "0.1.0"
