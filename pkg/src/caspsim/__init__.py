"""Desk-scale continual-learning simulator for class-adaptive replay buffers."""

from .analytics import (ClassScore, ConfidenceTrace, SampleScore, categorize_samples,
                        class_scores, sample_scores)
from .buffer import (AllocationPlan, ReplayBuffer, SampleStrategy, allocate_quota,
                     largest_remainder, select_samples)
from .metrics import (AccuracyMatrix, average_end_accuracy, average_end_forgetting,
                      pearson, per_class_forgetting)
from .model import (ModelParams, SgdConfig, evaluate_accuracy, forward_logits,
                    init_params, softmax, target_confidence, train_epoch)
from .policy import CaspConfig, ClassStrategy, build_trace, class_weights, run_casp
from .runner import (ExperimentConfig, ResultRow, correlation_profile, default_stream,
                     emit_results, graded_task_stream, read_results, run_er, run_er_casp,
                     run_grid, run_subset_study, vulnerability_forgetting)
from .stream import (DatasetSchema, FormatError, Sample, SampleSet, StreamConfig, Task,
                     corrupt_features, load_delimited_dataset, make_gaussian_stream,
                     shuffle_class_order, write_delimited_dataset)

__version__ = "0.1.0"
