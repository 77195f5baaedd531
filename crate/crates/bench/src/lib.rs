//! Benchmark-only crate. The measurements live in `benches/engine.rs`;
//! nothing here is meant for reuse.
