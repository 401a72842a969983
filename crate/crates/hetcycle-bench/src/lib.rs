//! Criterion benchmarks for the `hetcycle` crate; see `benches/`.
