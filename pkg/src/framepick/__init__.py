"""Frame recommendation for interactive video-object-segmentation annotation."""

__version__ = "0.1.0"
