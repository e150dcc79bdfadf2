"""Self-Attention Interaction Localizer - Image-Queried Activity Localization"""

__version__ = "1.0.0"
