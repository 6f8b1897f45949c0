//! Criterion benchmarks for the vocsid pipeline live in `benches/`.
