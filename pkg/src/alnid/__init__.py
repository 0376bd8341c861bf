"""Decision-tree attribute relearning (ALNID) and zero-shot inference on KDD Cup 99."""

from .dtree import DecisionTree, Rule, best_split, build_tree, class_info, extract_rules, split_entropy, trace_path
from .kdd import CLASS_TABLE, Dataset, attribute_stats, load_dataset, split_zero_shot
from .relearn import relearn_dataset, relearn_instance, separability_report
from .zsl import build_signature_matrix, evaluate, knn_predict, predict_eszsl, train_eszsl

__version__ = "0.1.0"
