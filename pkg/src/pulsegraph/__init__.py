"""Framework-free remote pulse (BVP) estimation on synthetic video.

Subpackages: :mod:`pulsegraph.nn` holds the numpy network with hand-written
backward passes; the top-level modules cover signals, augmentation,
preprocessing, the temporal graph, baselines, metrics and file I/O.
"""
__version__ = "0.1.0"
