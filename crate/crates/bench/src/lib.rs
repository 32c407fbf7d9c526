//! Synthetic-data helpers for the criterion benchmarks.
