"""Vehicle speed estimation from monocular video features.

Core package: interchange formats, feature extraction, polynomial
least-squares speed models, and a pinhole synthetic oracle, wrapped by a
FastAPI service (`speedcam.api`) with a thin CLI client (`speedcam.cli`).
"""

__version__ = "0.1.0"
