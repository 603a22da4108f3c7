//! Benchmarks for the simulation kernel and region-graph construction live in `benches/`.
