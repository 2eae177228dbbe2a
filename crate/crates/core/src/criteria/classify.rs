//! Three-way classification of the almost-sure behaviour of the solution.

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use super::decide::{check_fading, limit_lh_in, Finiteness, FinitenessRuling, IntegralCriterion, LimitLh, SeriesCriterion};
use super::decide::{DEFAULT_INTEGRAL_WINDOWS, DEFAULT_SERIES_TERMS};
use crate::error::{Error, Result};
use crate::linalg::{monodromy, spectral_abscissa};
use crate::model::{DiffusionSpec, DriftSpec, MatrixNorm, DEFAULT_QUAD_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `X(t) → 0` almost surely.
    StableAS,
    /// `0 < limsup ‖X‖ < ∞` almost surely.
    BoundedNonConvergent,
    /// `limsup ‖X‖ = ∞` almost surely.
    Unbounded,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// Interval `[ε_lo, ε_hi]` containing the threshold `ε′`.
    pub epsilon_star_bracket: Option<(f64, f64)>,
    pub fading_noise: bool,
    pub mean_square_stable: bool,
    pub drift_stable: bool,
    pub liminf_zero_predicted: bool,
    pub avg_sq_zero_predicted: bool,
    pub limit_lh: LimitLh,
    /// Spectral abscissa of a constant drift.
    pub drift_abscissa: Option<f64>,
    /// Spectral radius of the monodromy matrix of a periodic drift.
    pub floquet_rho: Option<f64>,
    pub h: f64,
    /// Rulings in increasing `ε`.
    pub diagnostics: Vec<FinitenessRuling>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub h: f64,
    pub norm: MatrixNorm,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
    /// Target relative width of the threshold bracket.
    pub bracket_rel_width: f64,
    pub n_terms: usize,
    pub quad_tol: f64,
    pub ode_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            h: 1.0,
            norm: MatrixNorm::Frobenius,
            eps_min: 2f64.powi(-8),
            eps_max: 2f64.powi(8),
            eps_points: 33,
            bracket_rel_width: 1e-4,
            n_terms: DEFAULT_SERIES_TERMS,
            quad_tol: DEFAULT_QUAD_TOL,
            ode_tol: 1e-10,
        }
    }
}

/// Geometric grid with `points` values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
}

/// Default `ε` grid, `2^{−8}..2^{8}` with 33 points.
pub fn default_eps_grid() -> Vec<f64> {
    let o = ClassifyOptions::default();
    geometric_grid(o.eps_min, o.eps_max, o.eps_points)
}

/// Class of a set of rulings across `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trichotomy {
    AllFinite,
    Mixed,
    AllInfinite,
    Undecided,
}

pub fn trichotomy(statuses: &[Finiteness]) -> Trichotomy {
    if statuses.is_empty() || statuses.contains(&Finiteness::Undecided) {
        Trichotomy::Undecided
    } else if statuses.iter().all(|s| *s == Finiteness::Finite) {
        Trichotomy::AllFinite
    } else if statuses.iter().all(|s| *s == Finiteness::Infinite) {
        Trichotomy::AllInfinite
    } else {
        Trichotomy::Mixed
    }
}

struct DriftGate {
    stable: bool,
    abscissa: Option<f64>,
    rho: Option<f64>,
}

fn drift_gate(drift: &DriftSpec, ode_tol: f64) -> Result<DriftGate> {
    match drift {
        DriftSpec::Constant(a) => {
            let s = spectral_abscissa(a)?;
            Ok(DriftGate { stable: s < 0.0, abscissa: Some(s), rho: None })
        }
        DriftSpec::Periodic(p) => {
            let m = monodromy(p, ode_tol)?;
            Ok(DriftGate { stable: m.rho < 1.0, abscissa: None, rho: Some(m.rho) })
        }
    }
}

/// Classify with default options.
pub fn classify(sigma: &DiffusionSpec, drift: &DriftSpec) -> Result<RegimeVerdict> {
    classify_with(sigma, drift, &ClassifyOptions::default())
}

pub fn classify_with(sigma: &DiffusionSpec, drift: &DriftSpec, opts: &ClassifyOptions) -> Result<RegimeVerdict> {
    if sigma.d() != drift.dim() {
        return Err(Error::InvalidSpec(format!(
            "diffusion has {} rows but the drift is {}×{}",
            sigma.d(),
            drift.dim(),
            drift.dim()
        )));
    }
    if !(opts.eps_min > 0.0 && opts.eps_max > opts.eps_min && opts.eps_points >= 2) {
        return Err(Error::Config("ε grid needs 0 < eps_min < eps_max and at least two points".into()));
    }
    let gate = drift_gate(drift, opts.ode_tol)?;
    let fading = check_fading(sigma, opts.h)?;
    let fading_noise = fading.fading == Some(true);
    let limit_lh = limit_lh_in(sigma, opts.h, opts.norm)?;
    let mut notes = Vec::new();
    if fading.fading.is_none() {
        notes.push("fading of the window energies could not be decided".to_string());
    }
    let mut verdict = RegimeVerdict {
        regime: Regime::Undecided,
        epsilon_star_bracket: None,
        fading_noise,
        mean_square_stable: fading_noise && gate.stable,
        drift_stable: gate.stable,
        liminf_zero_predicted: false,
        avg_sq_zero_predicted: false,
        limit_lh,
        drift_abscissa: gate.abscissa,
        floquet_rho: gate.rho,
        h: opts.h,
        diagnostics: Vec::new(),
        notes,
    };
    if !gate.stable {
        verdict.notes.push(
            "the deterministic part is not asymptotically stable and additive noise cannot stabilise it; \
             the criteria do not apply"
                .to_string(),
        );
        info!("drift gate failed; regime left undecided");
        return Ok(verdict);
    }

    let series = SeriesCriterion::new(sigma, opts.h, opts.norm, opts.n_terms, opts.quad_tol)?;
    let mut grid = geometric_grid(opts.eps_min, opts.eps_max, opts.eps_points);
    if let Some(t) = series.profile().threshold(opts.h) {
        // Widen the grid so the known threshold sits inside it.
        let ratio = (opts.eps_max / opts.eps_min).powf(1.0 / (opts.eps_points - 1) as f64);
        while t <= grid[0] * 2.0 {
            grid.insert(0, grid[0] / ratio);
        }
        while t >= grid[grid.len() - 1] / 2.0 {
            grid.push(grid[grid.len() - 1] * ratio);
        }
    }
    let mut rulings: Vec<FinitenessRuling> =
        grid.par_iter().map(|&eps| series.ruling(eps)).collect::<Result<Vec<_>>>()?;

    let statuses: Vec<Finiteness> = rulings.iter().map(|r| r.status).collect();
    let class = trichotomy(&statuses);
    verdict.regime = match class {
        Trichotomy::AllFinite => Regime::StableAS,
        Trichotomy::AllInfinite => Regime::Unbounded,
        Trichotomy::Undecided => {
            verdict.notes.push("at least one ε could not be ruled on".to_string());
            Regime::Undecided
        }
        Trichotomy::Mixed => {
            // S′ decreases in ε, so Infinite rulings must precede Finite ones.
            let first_finite = statuses.iter().position(|s| *s == Finiteness::Finite).expect("mixed");
            if statuses[first_finite..].iter().any(|s| *s != Finiteness::Finite) {
                verdict.notes.push("rulings are not monotone in ε".to_string());
                Regime::Undecided
            } else {
                let (mut lo, mut hi) = (grid[first_finite - 1], grid[first_finite]);
                while (hi - lo) / lo > opts.bracket_rel_width {
                    let mid = (lo * hi).sqrt();
                    let r = series.ruling(mid)?;
                    debug!("bisection ε = {mid}: {:?}", r.status);
                    let status = r.status;
                    rulings.push(r);
                    match status {
                        Finiteness::Finite => hi = mid,
                        Finiteness::Infinite => lo = mid,
                        Finiteness::Undecided => {
                            verdict.notes.push(format!("bisection stopped at undecided ε = {mid}"));
                            break;
                        }
                    }
                }
                verdict.epsilon_star_bracket = Some((lo, hi));
                Regime::BoundedNonConvergent
            }
        }
    };
    rulings.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    verdict.diagnostics = rulings;
    let (liminf, avg) = match verdict.regime {
        Regime::StableAS | Regime::BoundedNonConvergent => (true, true),
        Regime::Unbounded => (fading_noise, fading_noise),
        Regime::Undecided => (false, false),
    };
    verdict.liminf_zero_predicted = liminf;
    verdict.avg_sq_zero_predicted = avg;
    Ok(verdict)
}

/// Agreement of the trichotomy class of both criteria under the Frobenius
/// norm and an alternative one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEquivReport {
    pub alt_norm: String,
    pub eps: Vec<f64>,
    pub series_frobenius: Vec<Finiteness>,
    pub series_alt: Vec<Finiteness>,
    pub integral_frobenius: Vec<Finiteness>,
    pub integral_alt: Vec<Finiteness>,
    pub class_frobenius: Trichotomy,
    pub class_alt: Trichotomy,
    pub agree: bool,
}

pub fn norm_equiv_check(spec: &DiffusionSpec, eps: &[f64], alt_norm: MatrixNorm) -> Result<NormEquivReport> {
    let run = |norm: MatrixNorm| -> Result<(Vec<Finiteness>, Vec<Finiteness>)> {
        let s = SeriesCriterion::new(spec, 1.0, norm, DEFAULT_SERIES_TERMS, DEFAULT_QUAD_TOL)?;
        let i = IntegralCriterion::new(spec, 1.0, norm, DEFAULT_INTEGRAL_WINDOWS, 1e-9)?;
        let series = eps.iter().map(|&e| Ok(s.ruling(e)?.status)).collect::<Result<Vec<_>>>()?;
        let integral = eps.iter().map(|&e| Ok(i.ruling(e)?.status)).collect::<Result<Vec<_>>>()?;
        Ok((series, integral))
    };
    let (sf, i_f) = run(MatrixNorm::Frobenius)?;
    let (sa, ia) = run(alt_norm)?;
    let class_frobenius = trichotomy(&sf);
    let class_alt = trichotomy(&sa);
    let agree = class_frobenius == class_alt && trichotomy(&i_f) == class_frobenius && trichotomy(&ia) == class_alt;
    Ok(NormEquivReport {
        alt_norm: format!("{alt_norm:?}"),
        eps: eps.to_vec(),
        series_frobenius: sf,
        series_alt: sa,
        integral_frobenius: i_f,
        integral_alt: ia,
        class_frobenius,
        class_alt,
        agree,
    })
}
