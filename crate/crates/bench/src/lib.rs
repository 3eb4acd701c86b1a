//! Benchmarks for bandtrace; see `benches/`.
