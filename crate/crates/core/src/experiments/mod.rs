//! Drivers that test monotonicity and Brunn-Minkowski concavity of the
//! functional `F(K) = ∫ f dS_i(K, ·)` against condition (M)_i.

pub mod bm;
pub mod local;
pub mod monotone;
pub mod oscillating;

pub use bm::{
    bm_second_order_test, bm_segment_test, bm_violation_search, segment_probe, BmForm, BmSearchConfig, BmSweepPoint,
    BmViolation, SecondOrderReport, SegmentProbe,
};
pub use local::LocalPerturbation;
pub use monotone::{
    empirical_monotonicity, monotonicity_counterexample, monotonicity_test, random_nested_pairs, Counterexample,
    EmpiricalMonotonicity, HuntConfig, MonotonicityReport, PairRecord, SweepPoint,
};
pub use oscillating::{odd_extension, oscillating_phi, OscillatingTestFunction};
