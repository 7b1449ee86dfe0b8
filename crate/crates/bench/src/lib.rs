//! Criterion benchmarks for `sqbpaths`; see `benches/`.
