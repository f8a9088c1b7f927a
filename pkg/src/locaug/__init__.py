"""Location-augmented fully-convolutional segmentation networks.

A small, self-contained stack: dense float64 tensors, location-channel
input augmentation (coordinates / center distance / linear index), an
encoder-decoder CNN with hand-derived backprop, Adam and momentum-SGD,
F-measure and mean-IoU metrics, synthetic datasets that make the location
effect measurable on a CPU, and a CLI tying it together.
"""

from .augment import AugmentSpec, augment_image, make_coord_channels, \
    make_distance_channel, make_linear_index_channel
from .backend import BACKEND
from .data import CircleTaskConfig, LocationBiasConfig, Sample, \
    gen_circle_dataset, gen_location_bias_dataset
from .metrics import MetricReport, evaluate_dataset, f_measure, precision_recall
from .model import SegNet, build, forward, load_model, param_count, save_model
from .tensor import concat_channels, read_tensor, write_tensor
from .train import TrainConfig, bench_variants, fit, train_run

__version__ = "0.1.0"

__all__ = [
    "AugmentSpec", "augment_image", "make_coord_channels",
    "make_distance_channel", "make_linear_index_channel",
    "BACKEND", "CircleTaskConfig", "LocationBiasConfig", "Sample",
    "gen_circle_dataset", "gen_location_bias_dataset",
    "MetricReport", "evaluate_dataset", "f_measure", "precision_recall",
    "SegNet", "build", "forward", "load_model", "param_count", "save_model",
    "concat_channels", "read_tensor", "write_tensor",
    "TrainConfig", "bench_variants", "fit", "train_run",
    "__version__",
]
