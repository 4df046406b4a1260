//! Benchmarks live in `benches/`; run them with `cargo bench -p robpoly-bench`.
