//! Criterion benchmarks for glpinn; see `benches/`.
