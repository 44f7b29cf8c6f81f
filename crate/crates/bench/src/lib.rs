//! Criterion benchmarks of the hot paths; see `benches/hot_paths.rs`.
