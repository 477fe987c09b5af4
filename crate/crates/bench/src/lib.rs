//! Criterion benchmarks for `boxprop-core`; see `benches/`.
