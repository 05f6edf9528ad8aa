"""Stroke-prediction analytics workbench for EHR tabular data.

Library layers: ingestion/encoding (:mod:`strokelab.ingest`), seeded
sampling (:mod:`strokelab.sampling`), correlation/importance/CHADS2
(:mod:`strokelab.stats`), PCA (:mod:`strokelab.pca`), from-scratch
classifiers (:mod:`strokelab.classifiers`), metrics
(:mod:`strokelab.metrics`), and the benchmark harness
(:mod:`strokelab.experiments`). The ``strokelab`` command exposes the
pipeline as subcommands.
"""

__version__ = "0.1.0"
