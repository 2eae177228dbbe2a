//! JSON report types and serialization helpers.

use serde::{Serialize, Serializer};

use crate::criteria::{FinitenessRuling, MeanSquareReport, RegimeVerdict};
use crate::stats::{Agreement, RegimeEvidence};

/// Non-finite values are written as the strings `"inf"`, `"-inf"`, `"nan"`
/// so that JSON output stays lossless.
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub verdict: RegimeVerdict,
    /// Integral-criterion rulings at the same `ε` as the verdict's series rulings.
    pub integral_rulings: Vec<FinitenessRuling>,
    /// True when both criteria give the same status at every `ε`.
    pub criteria_agree: bool,
    pub mean_square: MeanSquareReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub csv: String,
    pub paths: usize,
    pub d: usize,
    pub dt: f64,
    pub t_end: f64,
    pub recorded_times: usize,
    pub seeds: Vec<u64>,
    /// Ensemble mean and variance of each component at `t_end`.
    pub final_mean: Vec<f64>,
    pub final_variance: Vec<f64>,
    pub final_mean_sq: f64,
    pub final_mean_sq_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub verdict: RegimeVerdict,
    pub evidence: RegimeEvidence,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub period: f64,
    /// Monodromy matrix by rows.
    pub psi_t: Vec<Vec<f64>>,
    pub rho: f64,
    pub stable: bool,
    pub ode_tolerance: f64,
}
