"""Run replay on a dataset stored as delimited text.

Rows are ``x1,...,xd,label`` (optionally ``x1,...,xd,task,label``).  Here a
synthetic stream is written out first so the example is self-contained;
point ``dataset`` at your own files instead.
"""

from dataclasses import replace

from caspsim import (DatasetSchema, ExperimentConfig, StreamConfig, make_gaussian_stream,
                     run_er_casp, write_delimited_dataset)

stream = make_gaussian_stream(StreamConfig(tasks=3, classes_per_task=2, train_per_class=60,
                                           test_per_class=30, feature_dim=5, seed=4))
write_delimited_dataset(stream, "train.csv", "train")
write_delimited_dataset(stream, "test.csv", "test")

cfg = replace(ExperimentConfig(buffer=40, epochs=3), dataset="train.csv",
              dataset_test="test.csv", dataset_schema=DatasetSchema(classes_per_task=2))
matrix, row = run_er_casp(cfg, seed=0)
print("accuracy matrix (row = after task, column = evaluated task):")
print(matrix.values.round(3))
print(f"\nend accuracy {row.avg_end_acc:.3f}, forgetting {row.avg_end_forget:.3f}")
