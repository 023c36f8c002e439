//! Criterion benchmarks for the density and graph kernels; see `benches/`.
