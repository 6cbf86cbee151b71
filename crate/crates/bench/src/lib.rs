//! Criterion benchmarks for the hot paths of the training loop.
