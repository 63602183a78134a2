//! Benchmark-only crate; the measurements live in `benches/kernels.rs`.
//! Run them with `cargo bench -p mtm-bench`.
