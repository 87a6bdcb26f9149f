"""Handshape classification: canonicalization, Radon/SIFT descriptors and ProbSom."""

from .dataset import (Dataset, GloveFilterConfig, SampleRecord, SegmentedImage, load_manifest,
                      segment_glove)
from .estimators import Canonicalizer, DescriptorExtractor, ProbSomClassifier
from .evaluation import (EvaluationReport, KNNBaseline, SplitSpec, leave_one_subject_out,
                         run_protocol, stratified_random_split, top_k_accuracy)
from .preprocess import CanonicalHandImage, canonicalize
from .probsom import ProbSomModel, SomConfig, classify, load_model, save_model
from .radon import DescriptorSet, radon_transform, resample_sinogram

__version__ = "0.1.0"

__all__ = [
    "Canonicalizer", "CanonicalHandImage", "Dataset", "DescriptorExtractor", "DescriptorSet",
    "EvaluationReport", "GloveFilterConfig", "KNNBaseline", "ProbSomClassifier", "ProbSomModel",
    "SampleRecord", "SegmentedImage", "SomConfig", "SplitSpec", "canonicalize", "classify",
    "leave_one_subject_out", "load_manifest", "load_model", "radon_transform",
    "resample_sinogram", "run_protocol", "save_model", "segment_glove",
    "stratified_random_split", "top_k_accuracy",
]
