//! Finite-horizon evidence for a regime verdict: tail suprema, window
//! infima, time averages and ensemble mean squares.

use serde::{Deserialize, Serialize};

use crate::criteria::{Regime, RegimeVerdict};
use crate::simulate::PathEnsemble;
use crate::special::normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    /// Checkpoints as fractions of the horizon.
    pub checkpoint_fractions: Vec<f64>,
    /// Bound on the median tail supremum at the last checkpoint expected
    /// for `StableAS`.
    pub stable_threshold: f64,
    /// Allowed ratio of the last to the first tail-supremum median in the
    /// bounded regime.
    pub band: (f64, f64),
    /// Window infima count as small below this fraction of the band median.
    pub inf_fraction: f64,
    /// Fraction of paths that must show a per-path property.
    pub path_fraction: f64,
    /// Fewer recorded points than this in the first window makes the
    /// comparison inconclusive.
    pub min_points_per_window: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            checkpoint_fractions: vec![1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0],
            stable_threshold: 0.05,
            band: (0.5, 2.0),
            inf_fraction: 0.1,
            path_fraction: 0.9,
            min_points_per_window: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Decreasing,
    Flat,
    Increasing,
}

/// Least-squares slope of `ln v` against `ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendFit {
    pub trend: Trend,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub slope: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub std_error: f64,
}

/// Classify the trend of positive `values` at positive `times`: the slope
/// counts when it exceeds two standard errors.
pub fn trend(times: &[f64], values: &[f64]) -> TrendFit {
    assert_eq!(times.len(), values.len());
    let n = times.len();
    // Series that reach exactly zero have no finite log-slope.
    if values.iter().any(|&v| v <= 0.0) {
        let non_increasing = values.windows(2).all(|w| w[1] <= w[0]);
        let non_decreasing = values.windows(2).all(|w| w[1] >= w[0]);
        let (first, last) = (values[0], values[n - 1]);
        let (trend, slope) = if first > 0.0 && last <= 0.0 && non_increasing {
            (Trend::Decreasing, f64::NEG_INFINITY)
        } else if first <= 0.0 && last > 0.0 && non_decreasing {
            (Trend::Increasing, f64::INFINITY)
        } else {
            (Trend::Flat, 0.0)
        };
        return TrendFit { trend, slope, std_error: f64::NAN };
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    if n < 2 {
        return TrendFit { trend: Trend::Flat, slope: 0.0, std_error: f64::INFINITY };
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return TrendFit { trend: Trend::Flat, slope: 0.0, std_error: f64::INFINITY };
    }
    let slope = sxy / sxx;
    let std_error = if n > 2 {
        let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
        (ssr / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    let margin = (2.0 * std_error).max(1e-12);
    let trend = if slope > margin {
        Trend::Increasing
    } else if slope < -margin {
        Trend::Decreasing
    } else {
        Trend::Flat
    };
    TrendFit { trend, slope, std_error }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn first_index_at(times: &[f64], t: f64) -> usize {
    let tol = 1e-9 * times.last().map_or(1.0, |v| v.abs().max(1.0));
    times.partition_point(|&s| s < t - tol).min(times.len() - 1)
}

/// `sup_{s ∈ [c, T]} x(s)` on the grid, one value per checkpoint `c`.
pub fn tail_sup(times: &[f64], values: &[f64], checkpoints: &[f64]) -> Vec<f64> {
    let mut suffix = values.to_vec();
    for k in (0..suffix.len().saturating_sub(1)).rev() {
        suffix[k] = suffix[k].max(suffix[k + 1]);
    }
    checkpoints.iter().map(|&c| suffix[first_index_at(times, c)]).collect()
}

/// Infima over trailing windows `[t − w, t]` for every grid time with
/// `t ≥ times[0] + w`. Returns `(t, inf)` pairs.
pub fn window_inf(times: &[f64], values: &[f64], window: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let tol = 1e-9 * window.abs().max(1.0);
    for (j, &t) in times.iter().enumerate() {
        while deque.back().is_some_and(|&k| values[k] >= values[j]) {
            deque.pop_back();
        }
        deque.push_back(j);
        while deque.front().is_some_and(|&k| times[k] < t - window - tol) {
            deque.pop_front();
        }
        if t >= times[0] + window - tol {
            out.push((t, values[deque[0]]));
        }
    }
    out
}

/// Trapezoid `(1/t)∫₀^t x(s)² ds` at every grid time. The first entry is
/// `x(0)²`.
pub fn avg_sq(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut integral = 0.0;
    for k in 0..values.len() {
        if k == 0 {
            out.push(values[0] * values[0]);
            continue;
        }
        integral += 0.5 * (times[k] - times[k - 1]) * (values[k - 1].powi(2) + values[k].powi(2));
        out.push(integral / (times[k] - times[0]));
    }
    out
}

/// `sup ‖X‖₂` over `[c, T]` for one path, using the block extremes kept by
/// the simulator.
pub fn path_tail_sup(ens: &PathEnsemble, path: usize, c: f64) -> f64 {
    let p = &ens.paths[path];
    let k0 = ens.index_at(c);
    p.block_max[k0..].iter().fold(p.norm[k0], |m, &v| m.max(v))
}

/// `inf ‖X‖₂` over `[a, b]` for one path.
pub fn path_window_inf(ens: &PathEnsemble, path: usize, a: f64, b: f64) -> f64 {
    let p = &ens.paths[path];
    let (ka, kb) = (ens.index_at(a), ens.index_at(b));
    p.block_min[ka..kb].iter().fold(p.norm[ka], |m, &v| m.min(v))
}

/// Ensemble mean of `‖X(t)‖²` with its standard error at every recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSqCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl MeanSqCurve {
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = first_index_at(&self.times, t);
        (self.mean[k], self.std_error[k])
    }
}

pub fn ensemble_mean_sq(ens: &PathEnsemble) -> MeanSqCurve {
    let p = ens.n_paths() as f64;
    let n = ens.times.len();
    let mut mean = vec![0.0; n];
    let mut std_error = vec![0.0; n];
    for k in 0..n {
        let vals = ens.paths.iter().map(|path| path.norm[k] * path.norm[k]);
        let m = vals.clone().sum::<f64>() / p;
        let var = if p > 1.0 { vals.map(|v| (v - m).powi(2)).sum::<f64>() / (p - 1.0) } else { f64::INFINITY };
        mean[k] = m;
        std_error[k] = (var / p).sqrt();
    }
    MeanSqCurve { times: ens.times.clone(), mean, std_error }
}

/// Kolmogorov–Smirnov statistic against the standard normal and its
/// asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    // Below 0.2 the value differs from 1 by less than 1e-20.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_normal(samples: &[f64]) -> KsResult {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let rn = n.sqrt();
    let p_value = kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
    KsResult { statistic: d, p_value, n: v.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Agreement {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// A primary check failing makes the comparison inconsistent; supporting
/// checks only decide between consistent and inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckRole {
    Primary,
    Supporting,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub role: CheckRole,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trends {
    pub tail_sup: TrendFit,
    pub running_max: TrendFit,
    pub window_inf: TrendFit,
    pub avg_sq: TrendFit,
    pub mean_sq: TrendFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeEvidence {
    pub regime: Regime,
    /// Tail suprema, running maxima and mean squares are taken here.
    pub checkpoints: Vec<f64>,
    /// Window infima over `[e/2, e]` and time averages are taken at `e = 2c`.
    pub window_ends: Vec<f64>,
    /// Per path, per checkpoint.
    pub tail_sup: Vec<Vec<f64>>,
    pub tail_sup_median: Vec<f64>,
    pub running_max_median: Vec<f64>,
    /// Per path, per window end.
    pub window_inf: Vec<Vec<f64>>,
    pub window_inf_median: Vec<f64>,
    pub avg_sq_median: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub mean_sq_std_error: Vec<f64>,
    /// Median over checkpoints of the tail-supremum medians.
    pub band_median: f64,
    pub trends: Trends,
    pub checks: Vec<Check>,
    pub agreement: Agreement,
    pub notes: Vec<String>,
}

fn at_index(series: &[f64], ens: &PathEnsemble, t: f64) -> f64 {
    series[ens.index_at(t)]
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Gather evidence from `ens` and compare it with the behaviour `verdict`
/// predicts.
pub fn compare(verdict: &RegimeVerdict, ens: &PathEnsemble, cfg: &StatsConfig) -> RegimeEvidence {
    let t_end = ens.t_end();
    let checkpoints: Vec<f64> = cfg.checkpoint_fractions.iter().map(|f| f * t_end).collect();
    let window_ends: Vec<f64> = checkpoints.iter().map(|c| (2.0 * c).min(t_end)).collect();
    let n_paths = ens.n_paths();

    let tail: Vec<Vec<f64>> =
        (0..n_paths).map(|p| checkpoints.iter().map(|&c| path_tail_sup(ens, p, c)).collect()).collect();
    let win: Vec<Vec<f64>> = (0..n_paths)
        .map(|p| window_ends.iter().map(|&e| path_window_inf(ens, p, e / 2.0, e)).collect())
        .collect();
    let column = |rows: &Vec<Vec<f64>>, j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let tail_sup_median: Vec<f64> = (0..checkpoints.len()).map(|j| median(&column(&tail, j))).collect();
    let window_inf_median: Vec<f64> = (0..window_ends.len()).map(|j| median(&column(&win, j))).collect();
    let running_max_median: Vec<f64> = checkpoints
        .iter()
        .map(|&c| median(&ens.paths.iter().map(|p| at_index(&p.running_max, ens, c)).collect::<Vec<_>>()))
        .collect();
    let avg_sq_median: Vec<f64> = window_ends
        .iter()
        .map(|&e| median(&ens.paths.iter().map(|p| at_index(&p.avg_sq, ens, e)).collect::<Vec<_>>()))
        .collect();
    let curve = ensemble_mean_sq(ens);
    let (mean_sq, mean_sq_std_error): (Vec<f64>, Vec<f64>) = checkpoints.iter().map(|&c| curve.at(c)).unzip();
    let band_median = median(&tail_sup_median);

    let trends = Trends {
        tail_sup: trend(&checkpoints, &tail_sup_median),
        running_max: trend(&checkpoints, &running_max_median),
        window_inf: trend(&window_ends, &window_inf_median),
        avg_sq: trend(&window_ends, &avg_sq_median),
        mean_sq: trend(&checkpoints, &mean_sq),
    };

    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut push = |name: &str, role: CheckRole, passed: bool, detail: String| {
        checks.push(Check { name: name.to_string(), role, passed, detail });
    };
    let last = checkpoints.len().saturating_sub(1);
    let small_inf = |push: &mut dyn FnMut(&str, CheckRole, bool, String)| {
        let final_inf = window_inf_median[last];
        push(
            "window_inf_small",
            CheckRole::Supporting,
            final_inf < cfg.inf_fraction * band_median,
            format!("final window infimum median {final_inf:.4e} vs band median {band_median:.4e}"),
        );
        let frac = win.iter().filter(|r| r[last] < cfg.inf_fraction * band_median).count() as f64 / n_paths as f64;
        push(
            "window_inf_small_fraction",
            CheckRole::Supporting,
            frac > cfg.path_fraction,
            format!("{:.1}% of paths end with a small window infimum", 100.0 * frac),
        );
        let (a_half, a_end) = (avg_sq_median[last.saturating_sub(1)], avg_sq_median[last]);
        push(
            "avg_sq_decreasing",
            CheckRole::Supporting,
            a_end < a_half,
            format!("median time average {a_half:.4e} at T/2 and {a_end:.4e} at T"),
        );
    };

    match verdict.regime {
        Regime::StableAS => {
            let final_sup = tail_sup_median[last];
            push(
                "tail_sup_below_threshold",
                CheckRole::Primary,
                final_sup < cfg.stable_threshold,
                format!("median tail supremum {final_sup:.4e} at the last checkpoint, threshold {}", cfg.stable_threshold),
            );
            push(
                "tail_sup_decreasing",
                CheckRole::Supporting,
                trends.tail_sup.trend == Trend::Decreasing,
                format!("slope {:.4} ± {:.4}", trends.tail_sup.slope, trends.tail_sup.std_error),
            );
            let frac = tail.iter().filter(|r| trend(&checkpoints, r).trend == Trend::Decreasing).count() as f64
                / n_paths as f64;
            push(
                "per_path_decreasing",
                CheckRole::Supporting,
                frac >= 0.95,
                format!("{:.1}% of paths have a decreasing tail supremum", 100.0 * frac),
            );
        }
        Regime::BoundedNonConvergent => {
            let ratio = tail_sup_median[last] / tail_sup_median[0];
            push(
                "tail_sup_band",
                CheckRole::Primary,
                ratio >= cfg.band.0 && ratio <= cfg.band.1,
                format!("last to first tail supremum median ratio {ratio:.4}"),
            );
            small_inf(&mut push);
        }
        Regime::Unbounded => {
            push(
                "running_max_strictly_increasing",
                CheckRole::Primary,
                strictly_increasing(&running_max_median),
                format!("running maximum medians {running_max_median:?}"),
            );
            push(
                "running_max_trend",
                CheckRole::Supporting,
                trends.running_max.trend == Trend::Increasing,
                format!("slope {:.4} ± {:.4}", trends.running_max.slope, trends.running_max.std_error),
            );
            if verdict.fading_noise {
                small_inf(&mut push);
            }
        }
        Regime::Undecided => notes.push("the verdict is undecided, so there is nothing to compare".into()),
    }

    let points = ens.times.iter().filter(|&&t| t >= window_ends[0] / 2.0 && t <= window_ends[0]).count();
    let enough = points >= cfg.min_points_per_window && n_paths >= 2;
    if !enough {
        notes.push(format!(
            "{points} recorded points in the first window and {n_paths} paths are too few for a comparison"
        ));
    }
    let agreement = if verdict.regime == Regime::Undecided || !enough {
        Agreement::Inconclusive
    } else if checks.iter().any(|c| c.role == CheckRole::Primary && !c.passed) {
        Agreement::Inconsistent
    } else if checks.iter().all(|c| c.passed) {
        Agreement::Consistent
    } else {
        Agreement::Inconclusive
    };

    RegimeEvidence {
        regime: verdict.regime,
        checkpoints,
        window_ends,
        tail_sup: tail,
        tail_sup_median,
        running_max_median,
        window_inf: win,
        window_inf_median,
        avg_sq_median,
        mean_sq,
        mean_sq_std_error,
        band_median,
        trends,
        checks,
        agreement,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dt: f64, t_end: f64) -> Vec<f64> {
        let n = (t_end / dt).round() as usize;
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn tail_sup_examples() {
        let t = grid(0.01, 20.0);
        let x: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        for (c, v) in [1.0f64, 2.5, 10.0].iter().zip(tail_sup(&t, &x, &[1.0, 2.5, 10.0])) {
            assert!((v - (-c).exp()).abs() < 1e-12);
        }
        let x: Vec<f64> = t.iter().map(|s| s.sin()).collect();
        let v = tail_sup(&t, &x, &[5.0])[0];
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn window_inf_examples() {
        let t = grid(0.01, 10.0);
        let x: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        let w = window_inf(&t, &x, 1.0);
        assert!((w[0].0 - 1.0).abs() < 1e-12);
        for &(s, v) in &w {
            assert!((v - (-s).exp()).abs() < 1e-12);
        }
        let ones = vec![1.0; t.len()];
        assert!(window_inf(&t, &ones, 2.0).iter().all(|&(_, v)| v == 1.0));
        let x: Vec<f64> = t.iter().map(|s| 2.0 + (3.0 * s).sin()).collect();
        let brute: f64 = t.iter().zip(&x).filter(|(s, _)| **s >= 4.0 - 1e-9 && **s <= 6.0 + 1e-9).map(|(_, v)| *v).fold(f64::MAX, f64::min);
        let got = window_inf(&t, &x, 2.0).into_iter().find(|(s, _)| (s - 6.0).abs() < 1e-9).unwrap().1;
        assert_eq!(got, brute);
    }

    #[test]
    fn avg_sq_examples() {
        let t = grid(1e-3, 5.0);
        let c = vec![3.0; t.len()];
        assert!(avg_sq(&t, &c).iter().all(|v| (v - 9.0).abs() < 1e-12));
        let x: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        for (s, v) in t.iter().zip(avg_sq(&t, &x)).skip(1) {
            let exact = -(-2.0 * s).exp_m1() / (2.0 * s);
            assert!((v - exact).abs() < 1e-6);
        }
        let t = grid(1e-2, 2000.0);
        let x: Vec<f64> = t.iter().map(|s| s.sin()).collect();
        assert!((avg_sq(&t, &x).last().unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn trend_signs() {
        let t = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(trend(&t, &[8.0, 4.1, 2.0, 1.05]).trend, Trend::Decreasing);
        assert_eq!(trend(&t, &[1.0, 1.9, 4.2, 8.0]).trend, Trend::Increasing);
        assert_eq!(trend(&t, &[1.0, 1.2, 0.8, 1.1]).trend, Trend::Flat);
        assert_eq!(trend(&t, &[2.0; 4]).trend, Trend::Flat);
        assert_eq!(trend(&t, &[1e-100, 0.0, 0.0, 0.0]).trend, Trend::Decreasing);
        assert_eq!(trend(&t, &[0.0; 4]).trend, Trend::Flat);
    }

    #[test]
    fn median_and_kolmogorov() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        // Reference values of the Kolmogorov survival function.
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_sf(1.36) - 0.04948587675537788).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_shift() {
        let n = 2000;
        let quantile = |p: f64| {
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if normal_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let grid_samples: Vec<f64> = (0..n).map(|i| quantile((i as f64 + 0.5) / n as f64)).collect();
        assert!(ks_normal(&grid_samples).p_value > 0.99);
        let shifted: Vec<f64> = grid_samples.iter().map(|x| x + 0.2).collect();
        assert!(ks_normal(&shifted).p_value < 1e-6);
    }
}
