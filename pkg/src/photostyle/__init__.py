"""Face detection, race classification and demographic comparison for
legislators' photo collections."""

__version__ = "0.1.0"
