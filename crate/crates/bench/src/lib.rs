//! Criterion benchmarks for `dphase-core`; see `benches/`.
