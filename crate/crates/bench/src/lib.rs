//! Criterion benchmarks for the solver and the linewidth objective; see
//! `benches/`.
