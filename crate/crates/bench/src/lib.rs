//! Benchmark-only crate; see `benches/expansion.rs`.
