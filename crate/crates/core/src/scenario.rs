//! TOML scenario files.
//!
//! ```toml
//! name = "log_power"
//!
//! [drift]
//! kind = "constant"
//! matrix = [[-1.0, 0.5], [0.0, -2.0]]
//!
//! [diffusion]
//! kind = "envelope"
//! envelope = { kind = "log_power", gamma = 1.0 }
//! pattern = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [simulation]
//! dt = 0.05
//! t_end = 1024.0
//! paths = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::ClassifyOptions;
use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, DriftSpec, Envelope, Matrix, MatrixNorm, PeriodicForm, DEFAULT_QUAD_TOL};
use crate::simulate::SimConfig;
use crate::stats::StatsConfig;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftDef {
    Constant {
        matrix: Rows,
    },
    /// `A(t) = mean + Σ_k cos_k cos(kωt) + sin_k sin(kωt)`, `ω = 2π/period`.
    Fourier {
        period: f64,
        mean: Rows,
        #[serde(default)]
        cos: Vec<Rows>,
        #[serde(default)]
        sin: Vec<Rows>,
    },
    PeriodicTable {
        period: f64,
        times: Vec<f64>,
        values: Vec<Rows>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeDef {
    PowerLaw { scale: f64, exponent: f64 },
    LogPower { gamma: f64 },
    ExpDecay { scale: f64, rate: f64 },
    LogGrow { scale: f64, exponent: f64 },
}

impl From<EnvelopeDef> for Envelope {
    fn from(e: EnvelopeDef) -> Self {
        match e {
            EnvelopeDef::PowerLaw { scale, exponent } => Envelope::PowerLaw { scale, exponent },
            EnvelopeDef::LogPower { gamma } => Envelope::LogPower { gamma },
            EnvelopeDef::ExpDecay { scale, rate } => Envelope::ExpDecay { scale, rate },
            EnvelopeDef::LogGrow { scale, exponent } => Envelope::LogGrow { scale, exponent },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionDef {
    Constant { matrix: Rows },
    Envelope { envelope: EnvelopeDef, pattern: Rows },
    Table { times: Vec<f64>, values: Vec<Rows> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormDef {
    Frobenius,
    MaxEntry,
    Spectral,
}

impl From<NormDef> for MatrixNorm {
    fn from(n: NormDef) -> Self {
        match n {
            NormDef::Frobenius => MatrixNorm::Frobenius,
            NormDef::MaxEntry => MatrixNorm::MaxEntry,
            NormDef::Spectral => MatrixNorm::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaParams {
    /// Window length of the series criterion.
    pub h: f64,
    /// Window length of the integral criterion.
    pub c: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
    pub bracket_rel_width: f64,
    /// Number of series terms summed explicitly.
    pub n_max: usize,
    /// Upper limit of the explicit part of the integral criterion.
    pub t_max: f64,
    pub quad_tol: f64,
    pub ode_tol: f64,
    pub norm: NormDef,
}

impl Default for CriteriaParams {
    fn default() -> Self {
        let o = ClassifyOptions::default();
        Self {
            h: o.h,
            c: 1.0,
            eps_min: o.eps_min,
            eps_max: o.eps_max,
            eps_points: o.eps_points,
            bracket_rel_width: o.bracket_rel_width,
            n_max: o.n_terms,
            t_max: 1024.0,
            quad_tol: DEFAULT_QUAD_TOL,
            ode_tol: o.ode_tol,
            norm: NormDef::Frobenius,
        }
    }
}

impl CriteriaParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.h, "h")?;
        positive(self.c, "c")?;
        positive(self.eps_min, "eps_min")?;
        positive(self.eps_max, "eps_max")?;
        positive(self.t_max, "t_max")?;
        positive(self.quad_tol, "quad_tol")?;
        positive(self.ode_tol, "ode_tol")?;
        positive(self.bracket_rel_width, "bracket_rel_width")?;
        if self.eps_min >= self.eps_max || self.eps_points < 2 || self.n_max == 0 {
            return Err(Error::Config("need eps_min < eps_max, eps_points ≥ 2 and n_max ≥ 1".into()));
        }
        Ok(())
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            h: self.h,
            norm: self.norm.into(),
            eps_min: self.eps_min,
            eps_max: self.eps_max,
            eps_points: self.eps_points,
            bracket_rel_width: self.bracket_rel_width,
            n_terms: self.n_max,
            quad_tol: self.quad_tol,
            ode_tol: self.ode_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Initial state of the simulated paths; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    pub drift: DriftDef,
    pub diffusion: DiffusionDef,
    #[serde(default)]
    pub criteria: CriteriaParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub stats: StatsConfig,
}

fn matrix(rows: &Rows, what: &str) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidSpec(format!("{what} must be a non-empty rectangular array of rows")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrices(list: &[Rows], what: &str) -> Result<Vec<Matrix>> {
    list.iter().map(|r| matrix(r, what)).collect()
}

pub fn rows_of(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check every parameter that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("scenario name {:?} is not usable as a file stem", self.name)));
        }
        let drift = self.drift_spec()?;
        let sigma = self.diffusion_spec()?;
        if drift.dim() != sigma.d() {
            return Err(Error::InvalidSpec(format!(
                "drift is {0}×{0} but diffusion has {1} rows",
                drift.dim(),
                sigma.d()
            )));
        }
        self.initial_state()?;
        self.criteria.validate()?;
        if let Some(sim) = &self.simulation {
            sim.n_steps()?;
        }
        let f = &self.stats.checkpoint_fractions;
        if f.len() < 2 || f.iter().any(|v| !(*v > 0.0 && *v <= 0.5)) || f.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("checkpoint fractions must increase within (0, 1/2]".into()));
        }
        Ok(())
    }

    pub fn drift_spec(&self) -> Result<DriftSpec> {
        match &self.drift {
            DriftDef::Constant { matrix: m } => DriftSpec::constant(matrix(m, "drift")?),
            DriftDef::Fourier { period, mean, cos, sin } => DriftSpec::periodic(
                *period,
                PeriodicForm::Fourier {
                    mean: matrix(mean, "drift mean")?,
                    cos: matrices(cos, "cosine coefficient")?,
                    sin: matrices(sin, "sine coefficient")?,
                },
            ),
            DriftDef::PeriodicTable { period, times, values } => DriftSpec::periodic(
                *period,
                PeriodicForm::Table { times: times.clone(), values: matrices(values, "drift table value")? },
            ),
        }
    }

    pub fn diffusion_spec(&self) -> Result<DiffusionSpec> {
        match &self.diffusion {
            DiffusionDef::Constant { matrix: m } => DiffusionSpec::constant(matrix(m, "diffusion")?),
            DiffusionDef::Envelope { envelope, pattern } => {
                DiffusionSpec::envelope((*envelope).into(), matrix(pattern, "diffusion pattern")?)
            }
            DiffusionDef::Table { times, values } => {
                DiffusionSpec::table(times.clone(), matrices(values, "diffusion table value")?)
            }
        }
    }

    pub fn initial_state(&self) -> Result<Vec<f64>> {
        let d = self.drift_spec()?.dim();
        match &self.initial_state {
            None => Ok(vec![0.0; d]),
            Some(x) if x.len() == d && x.iter().all(|v| v.is_finite()) => Ok(x.clone()),
            Some(x) => Err(Error::InvalidSpec(format!("initial state must have {d} finite entries, got {x:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
name = "periodic"
initial_state = [1.0]

[drift]
kind = "fourier"
period = 6.283185307179586
mean = [[-1.0]]
cos = [[[1.0]]]

[diffusion]
kind = "envelope"
envelope = { kind = "exp_decay", scale = 1.0, rate = 0.5 }
pattern = [[1.0]]

[criteria]
h = 0.5

[simulation]
dt = 0.19634954084936207
t_end = 62.83185307179586
paths = 10
seed = 5
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_toml(EXAMPLE).unwrap();
        assert_eq!(s.criteria.h, 0.5);
        assert_eq!(s.criteria.c, 1.0);
        assert_eq!(s.simulation.as_ref().unwrap().output_stride, 1);
        assert!(s.drift_spec().unwrap().as_constant().is_none());
        let text = s.to_toml().unwrap();
        assert_eq!(Scenario::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = EXAMPLE.replace("h = 0.5", "h = 0.5\nwindow = 2.0");
        assert!(Scenario::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("rate = 0.5", "rate = 0.5, extra = 1.0");
        assert!(Scenario::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("seed = 5", "seed = 5\nthreads = 4");
        assert!(Scenario::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("kind = \"fourier\"", "kind = \"fourier\"\nphase = 0.0");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let bad = EXAMPLE.replace("pattern = [[1.0]]", "pattern = [[1.0], [0.0]]");
        assert!(Scenario::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("initial_state = [1.0]", "initial_state = [1.0, 2.0]");
        assert!(Scenario::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("paths = 10", "paths = 0");
        assert!(Scenario::from_toml(&bad).is_err());
    }
}
