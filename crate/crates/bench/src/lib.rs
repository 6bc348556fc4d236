//! Criterion benchmarks for the network and the planners; see `benches/`.
