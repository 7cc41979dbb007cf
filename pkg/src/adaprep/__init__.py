"""Adaptive pre-processing for domain-generalized video activity recognition.

Object detections become a per-clip class array and a per-frame count
tensor; a learnable gate picks the raw or the masked frame stack per clip,
frame-wise attention re-weights the frames, and any video encoder follows.
"""

__version__ = "0.1.0"

from .attention import apply_attention, attention_vector
from .detections import (CELL_PHONE, CUP, HANDBAG, KEYBOARD, MOUSE, PERSON, TV, ClipDetections, Detection, build_class_array, build_frame_tensor,
                         read_detections, write_detections)
from .encoder import (ClassifierHead, ToyEncoder, build_encoder, classify, cross_entropy_loss,
                      encode, register_encoder)
from .evaluation import (ExperimentReport, attention_traces, degradation_report, mean_report,
                         object_attention_contrast, run_ablation)
from .frames import (MASKED, RAW, FrameStack, Palette, default_palette, render_masked_stack, resize_stack,
                     subsample_frames)
from .gate import GateModule, GateOutput, gate_coupling, gate_decision, mlp_forward, select_stream
from .metrics import Metrics, compute_metrics, confusion_matrix
from .model import VARIANTS, AdaptiveClassifier, PreparedClip, RawClip, prepare_clip
from .synthetic import (ActivitySpec, BONDataset, ClipDataset, DatasetManifest, DomainSpec,
                        generate_clip, generate_dataset)
from .plotting import plot_attention, plot_degradation, plot_metric_bars
from .training import (CheckpointSet, TrainConfig, build_model, prepare_clips, select_best_epoch,
                       train)
