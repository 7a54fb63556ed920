"""splitwire: split inference over a simulated wireless channel.

Build ResNet-style classifier graphs, partition them at seven named split
points, execute the encoder/channel/decoder pipeline with AWGN corruption
of the transmitted feature vector, account FLOPs/parameters and latency per
side, and plan the split under accuracy and resource constraints — locally
or across two processes.
"""

__version__ = "0.1.0"

from .accounting import FlopReport, ParamReport, count_flops, count_params
from .channel import (
    ChannelProfile,
    FeatureVector,
    awgn,
    dequantize,
    normalize_and_scale,
    payload_bits,
    quantize,
    sigma_from_snr,
)
from .cost import CostReport, DeviceProfile, beta_sweep, computation_time, normalized_comp, total_task_time
from .engine import run_graph
from .graph import (
    INNER_SPLIT_POINTS,
    SPLIT_POINTS,
    ModelGraph,
    SplitModel,
    SplitPoint,
    TensorShape,
    apply_split,
    build_resnet,
    infer_shapes,
    split_point,
)
from .pipeline import monolithic_graph, run_local, run_monolithic
from .planner import AccuracyRecord, AccuracyTable, PlanResult, load_accuracy_table, load_bundled_table, min_nc, plan
from .weights import WeightStore, load_weights, random_weights, save_weights
from .wire import FeatureServer, Frame, SessionConfig, decode_frame, encode_frame, send, serve
