//! Criterion benchmarks for `adelic-core`; see `benches/`.
