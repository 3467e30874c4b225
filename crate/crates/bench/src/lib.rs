//! Criterion benchmarks for the wavekit pipeline stages live in `benches/`.
