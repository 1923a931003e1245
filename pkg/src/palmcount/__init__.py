"""palmcount: counting and localizing palm-tree crowns in raster scenes.

Pipeline: a small convolutional classifier is trained on 40x40 crops,
swept across a scene to build a confidence map, which is smoothed with a
uniform filter; crown peaks are extracted by non-maximal suppression and
counts are scored by the margin-of-error metric.
"""

from .dataset import Dataset, LabeledCrop, SplitSpec, add_crop, load_dataset, sample_negatives, save_dataset, split
from .detector import ConfidenceMap, DetectorParams, PeakList, box_filter, cell_to_pixel, detect, nms, slide
from .evaluation import CountReport, GroundTruth, MatchReport, evaluate_scene, margin_of_error, match_detections
from .nn import Model, ModelConfig, TrainConfig, TrainReport, build_model, forward, load_model, save_model, train
from .raster import PixelPoint, Raster, crop, load_raster, render_overlay, save_raster
from .synth import SynthConfig, generate_crops, generate_scene

__version__ = "0.1.0"
