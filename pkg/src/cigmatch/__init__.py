"""Long-document pair matching over concept interaction graphs."""

from cigmatch.cig import ConceptInteractionGraph, CigVertex, build_pair_cig
from cigmatch.data import LabeledPair, gen_synthetic, load_jsonl, split
from cigmatch.estimator import CIGMatcher, PairGraphBuilder
from cigmatch.baselines import BM25ThresholdClassifier, SimNetClassifier
from cigmatch.model import VARIANTS, ModelConfig

__version__ = "0.1.0"

__all__ = [
    "BM25ThresholdClassifier",
    "CIGMatcher",
    "CigVertex",
    "ConceptInteractionGraph",
    "LabeledPair",
    "ModelConfig",
    "PairGraphBuilder",
    "SimNetClassifier",
    "VARIANTS",
    "build_pair_cig",
    "gen_synthetic",
    "load_jsonl",
    "split",
]
