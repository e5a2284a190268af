//! Criterion benchmarks for the fairprune kernels; see `benches/kernels.rs`.
