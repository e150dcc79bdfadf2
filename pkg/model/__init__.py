"""Model package: attention primitives, encoders and the order-sensitive localizer"""

from .attention import dot_atten, multi_head, local_multi_head, additive_atten
from .region_encoder import ImageQuery, encode_regions
from .video_encoder import encode_video
from .localizer import BoundaryPrediction, predict_boundaries, nll_loss

__all__ = [
    'dot_atten',
    'multi_head',
    'local_multi_head',
    'additive_atten',
    'ImageQuery',
    'encode_regions',
    'encode_video',
    'BoundaryPrediction',
    'predict_boundaries',
    'nll_loss'
]
