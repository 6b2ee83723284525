//! Scoring machinery: pinball loss, baseline-relative score, standardized and
//! de-skewed residuals, and point-forecast skill scores.

use crate::dist::special::inv_norm_cdf;
use crate::dist::DistParams;
use crate::error::{Error, Result};

/// A grid of quantile forecasts: `values[i][j]` is the `levels_percent[j]`
/// quantile at `times[i]`.
#[derive(Debug, Clone)]
pub struct QuantileForecastTable {
    pub times: Vec<f64>,
    pub levels_percent: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl QuantileForecastTable {
    pub fn new(times: Vec<f64>, levels_percent: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows vs {} times",
                values.len(),
                times.len()
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != levels_percent.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} quantiles, expected {}",
                    row.len(),
                    levels_percent.len()
                )));
            }
            for w in row.windows(2) {
                if w[1] < w[0] {
                    return Err(Error::Invalid {
                        what: "QuantileForecastTable",
                        reason: format!("quantiles decrease across levels at row {i}"),
                    });
                }
            }
        }
        if levels_percent.iter().any(|q| !(*q > 0.0 && *q < 100.0)) {
            return Err(Error::Invalid {
                what: "QuantileForecastTable",
                reason: "levels must be percentages in (0,100)".into(),
            });
        }
        Ok(Self { times, levels_percent, values })
    }
}

/// Pinball (quantile) loss of one forecast value at quantile level
/// `q ∈ (0, 100)` percent against one observation.
pub fn pinball(forecast_value: f64, level_q_percent: f64, observed: f64) -> f64 {
    if forecast_value > observed {
        (1.0 - level_q_percent / 100.0) * (forecast_value - observed)
    } else {
        (level_q_percent / 100.0) * (observed - forecast_value)
    }
}

/// Aggregate pinball score: the mean of `pinball` over every (time, level)
/// pair, summed in time-major order.
pub fn aggregate_pinball(table: &QuantileForecastTable, observed: &[f64]) -> Result<f64> {
    if observed.len() != table.times.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observations vs {} forecast rows",
            observed.len(),
            table.times.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::Invalid { what: "aggregate_pinball", reason: "empty table".into() });
    }
    let mut sum = 0.0;
    for (row, x) in table.values.iter().zip(observed) {
        for (v, q) in row.iter().zip(&table.levels_percent) {
            sum += pinball(*v, *q, *x);
        }
    }
    Ok(sum / (observed.len() as f64 * table.levels_percent.len() as f64))
}

/// Relative improvement over a baseline, in percent:
/// `(1 − E_model/E_baseline) · 100`.
pub fn relative_score(e_model: f64, e_baseline: f64) -> Result<f64> {
    if !(e_baseline > 0.0) {
        return Err(Error::DegenerateDenominator(format!(
            "baseline score must be > 0, got {e_baseline}"
        )));
    }
    Ok((1.0 - e_model / e_baseline) * 100.0)
}

/// Residuals standardized by the model's per-time moments, with their mean
/// (bias) and root-mean-square.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub residuals: Vec<f64>,
    pub mean_bias: f64,
    pub rms: f64,
}

fn report_from(residuals: Vec<f64>) -> ResidualReport {
    let n = residuals.len() as f64;
    let mean_bias = residuals.iter().sum::<f64>() / n;
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    ResidualReport { residuals, mean_bias, rms }
}

/// Model-standardized residuals `r_t = (x_t − mean(θ_t)) / std(θ_t)` using
/// each family's moment formulas (for the skew-normal these are *not* ξ and
/// k but the distribution mean and standard deviation).
pub fn standardized_residuals(observed: &[f64], params: &[DistParams]) -> Result<ResidualReport> {
    if observed.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observations vs {} parameter rows",
            observed.len(),
            params.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::Invalid { what: "standardized_residuals", reason: "empty input".into() });
    }
    let mut residuals = Vec::with_capacity(observed.len());
    for (x, p) in observed.iter().zip(params) {
        p.validate()?;
        residuals.push((x - p.mean()) / p.std_dev());
    }
    Ok(report_from(residuals))
}

/// De-skewed residuals: the probability integral transform through each
/// time's skew-normal CDF followed by the standard normal inverse CDF.
///
/// CDF values too extreme for the inverse map are clamped to ±8 standard
/// normal units; the clamp count is returned alongside the z values.
pub fn deskew(observed: &[f64], params: &[DistParams]) -> Result<(Vec<f64>, usize)> {
    if observed.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observations vs {} parameter rows",
            observed.len(),
            params.len()
        )));
    }
    // Φ(−8): anything below cannot be inverted meaningfully in f64.
    let p_min = 6.220_960_574_271_786e-16;
    let mut out = Vec::with_capacity(observed.len());
    let mut clamped = 0usize;
    for (x, p) in observed.iter().zip(params) {
        if !matches!(p, DistParams::SkewNormal { .. }) {
            return Err(Error::InvalidParams(format!(
                "deskew needs skew-normal parameters, got {}",
                p.family().name()
            )));
        }
        let c = p.cdf(*x)?;
        if c <= p_min {
            out.push(-8.0);
            clamped += 1;
        } else if c >= 1.0 - p_min {
            out.push(8.0);
            clamped += 1;
        } else {
            out.push(inv_norm_cdf(c));
        }
    }
    Ok((out, clamped))
}

/// De-skewed residual calibration summary (bias and RMS of the z values).
pub fn deskew_report(observed: &[f64], params: &[DistParams]) -> Result<(ResidualReport, usize)> {
    let (z, clamped) = deskew(observed, params)?;
    Ok((report_from(z), clamped))
}

/// Point-forecast skill scores.
#[derive(Debug, Clone, Copy)]
pub struct SkillScores {
    /// Normalized mean bias Σ(x̂ − x)/Σx.
    pub nmb: f64,
    /// RMSE normalized by the 5%–95% quantile gap of the observations.
    pub nrmse: f64,
    /// Pearson correlation between forecast and observations.
    pub pearson: f64,
}

/// Empirical quantile with linear interpolation between order statistics
/// (inclusive endpoints: q = 0 is the minimum, q = 1 the maximum).
pub fn empirical_quantile(data: &[f64], q: f64) -> f64 {
    debug_assert!(!data.is_empty() && (0.0..=1.0).contains(&q));
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

/// NMB, NRMSE, and Pearson correlation of a point forecast.
pub fn skill_scores(point_forecast: &[f64], observed: &[f64]) -> Result<SkillScores> {
    if point_forecast.len() != observed.len() || observed.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} forecasts vs {} observations",
            point_forecast.len(),
            observed.len()
        )));
    }
    let n = observed.len() as f64;
    let sum_obs: f64 = observed.iter().sum();
    if sum_obs == 0.0 {
        return Err(Error::DegenerateDenominator("observations sum to zero (NMB)".into()));
    }
    let nmb = point_forecast.iter().zip(observed).map(|(f, x)| f - x).sum::<f64>() / sum_obs;

    let q05 = empirical_quantile(observed, 0.05);
    let q95 = empirical_quantile(observed, 0.95);
    if !(q95 - q05 > 0.0) {
        return Err(Error::DegenerateDenominator("5%-95% quantile gap is zero (NRMSE)".into()));
    }
    let mse = point_forecast.iter().zip(observed).map(|(f, x)| (f - x) * (f - x)).sum::<f64>() / n;
    let nrmse = mse.sqrt() / (q95 - q05);

    let mf = point_forecast.iter().sum::<f64>() / n;
    let mx = sum_obs / n;
    let mut cov = 0.0;
    let mut vf = 0.0;
    let mut vx = 0.0;
    for (f, x) in point_forecast.iter().zip(observed) {
        cov += (f - mf) * (x - mx);
        vf += (f - mf) * (f - mf);
        vx += (x - mx) * (x - mx);
    }
    if vf == 0.0 || vx == 0.0 {
        return Err(Error::DegenerateDenominator("zero variance (Pearson)".into()));
    }
    let pearson = cov / (vf.sqrt() * vx.sqrt());
    Ok(SkillScores { nmb, nrmse, pearson })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::special::norm_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pinball_reference_values() {
        assert_eq!(pinball(10.0, 37.0, 10.0), 0.0);
        // Over-forecast at q=90: (1 − 0.9)·2 = 0.2
        assert!((pinball(12.0, 90.0, 10.0) - 0.2).abs() < 1e-15);
        // Under-forecast at q=10: 0.1·5 = 0.5
        assert!((pinball(5.0, 10.0, 10.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aggregate_matches_brute_force_exactly() {
        let times: Vec<f64> = (0..17).map(|i| i as f64).collect();
        let levels: Vec<f64> = (1..10).map(|i| 10.0 * i as f64).collect();
        let values: Vec<Vec<f64>> = (0..17)
            .map(|i| (0..9).map(|j| (i as f64 * 0.37).sin() + j as f64 * 0.11).collect())
            .collect();
        let observed: Vec<f64> = (0..17).map(|i| (i as f64 * 0.53).cos() * 2.0).collect();
        let table = QuantileForecastTable::new(times, levels.clone(), values.clone()).unwrap();
        let e = aggregate_pinball(&table, &observed).unwrap();
        // Brute-force element-wise loop, same summation order.
        let mut sum = 0.0;
        for i in 0..17 {
            for j in 0..9 {
                sum += pinball(values[i][j], levels[j], observed[i]);
            }
        }
        let brute = sum / (17.0 * 9.0);
        assert_eq!(e, brute);
    }

    #[test]
    fn pinball_minimizer_is_the_quantile() {
        // The constant minimizing mean pinball at q=90 over N(0,1) draws
        // approaches Φ⁻¹(0.9) = 1.2816.
        let truth = DistParams::Normal { mu: 0.0, sigma: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<f64> = (0..100_000).map(|_| truth.sample(&mut rng).unwrap()).collect();
        let mut best = (f64::INFINITY, f64::NAN);
        let mut c = 1.0;
        while c <= 1.6 {
            let loss: f64 = xs.iter().map(|x| pinball(c, 90.0, *x)).sum();
            if loss < best.0 {
                best = (loss, c);
            }
            c += 0.002;
        }
        assert!((best.1 - 1.2816).abs() <= 0.05, "minimizer {}", best.1);
    }

    #[test]
    fn relative_score_reference_values() {
        assert_eq!(relative_score(1.0, 1.0).unwrap(), 0.0);
        assert!((relative_score(0.846, 1.0).unwrap() - 15.4).abs() < 1e-12);
        assert!((relative_score(2.0, 1.0).unwrap() - -100.0).abs() < 1e-12);
        assert!(relative_score(1.0, 0.0).is_err());
        // Affine structure: R(a, b) = 100 − 100·(a/b)
        let (a, b) = (0.7, 1.3);
        assert!((relative_score(a, b).unwrap() - (100.0 - 100.0 * a / b)).abs() < 1e-12);
    }

    #[test]
    fn residuals_from_true_parameters_are_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut observed = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64;
            let p = DistParams::Normal {
                mu: (t * 0.01).sin() * 2.0,
                sigma: 0.5 + 0.2 * (t * 0.003).cos().abs(),
            };
            observed.push(p.sample(&mut rng).unwrap());
            params.push(p);
        }
        let report = standardized_residuals(&observed, &params).unwrap();
        // Bias: mean of n standard normals has SE 1/√n.
        let se = 1.0 / (n as f64).sqrt();
        assert!(report.mean_bias.abs() < 4.0 * se, "bias {}", report.mean_bias);
        assert!((report.rms - 1.0).abs() < 0.02, "rms {}", report.rms);
    }

    #[test]
    fn residual_bias_shifts_linearly_with_offset() {
        let params: Vec<DistParams> =
            (0..50).map(|i| DistParams::Normal { mu: i as f64, sigma: 2.0 }).collect();
        let observed: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let base = standardized_residuals(&observed, &params).unwrap();
        // Shift every observation by +c σ̂.
        let c = 0.7;
        let shifted: Vec<f64> = observed.iter().map(|x| x + c * 2.0).collect();
        let moved = standardized_residuals(&shifted, &params).unwrap();
        assert!((moved.mean_bias - (base.mean_bias + c)).abs() < 1e-12);
    }

    #[test]
    fn deskew_reference_and_monotonicity() {
        // Zero skew at the location: CDF = ½ maps to z = 0.
        let p = DistParams::SkewNormal { xi: 1.5, k: 0.8, alpha: 0.0 };
        let (z, clamps) = deskew(&[1.5], &[p.clone()]).unwrap();
        assert!(z[0].abs() < 1e-9);
        assert_eq!(clamps, 0);
        // Monotone in x at fixed parameters.
        let xs: Vec<f64> = (0..40).map(|i| -3.0 + 0.2 * i as f64).collect();
        let params = vec![DistParams::SkewNormal { xi: 0.3, k: 1.1, alpha: 2.0 }; xs.len()];
        let (zs, _) = deskew(&xs, &params).unwrap();
        for w in zs.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn deskew_clamps_extreme_tails() {
        let p = DistParams::SkewNormal { xi: 0.0, k: 1.0, alpha: 0.0 };
        let (z, clamps) = deskew(&[-50.0, 50.0], &[p.clone(), p]).unwrap();
        assert_eq!(z, vec![-8.0, 8.0]);
        assert_eq!(clamps, 2);
    }

    #[test]
    fn deskew_of_true_samples_is_standard_normal() {
        // Probability integral transform: x ~ S(θ_t) ⇒ z de-skewed ~ N(0,1).
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 100_000;
        let mut observed = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * 0.01;
            let p = DistParams::SkewNormal {
                xi: t.sin(),
                k: 0.6 + 0.3 * (t * 0.7).cos().abs(),
                alpha: 2.0 * (t * 0.13).sin(),
            };
            observed.push(p.sample(&mut rng).unwrap());
            params.push(p);
        }
        let (mut z, clamps) = deskew(&observed, &params).unwrap();
        assert_eq!(clamps, 0);
        // One-sample Kolmogorov–Smirnov statistic against Φ.
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d: f64 = 0.0;
        for (i, zi) in z.iter().enumerate() {
            let f = norm_cdf(*zi);
            let hi = (i + 1) as f64 / n as f64;
            let lo = i as f64 / n as f64;
            d = d.max((f - hi).abs()).max((f - lo).abs());
        }
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn skill_score_fixed_points() {
        let x: Vec<f64> = (1..60).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let s = skill_scores(&x, &x).unwrap();
        assert_eq!(s.nmb, 0.0);
        assert_eq!(s.nrmse, 0.0);
        assert!((s.pearson - 1.0).abs() < 1e-12);
        // x̂ = 1.1 x on positive data: NMB = 0.1 exactly.
        let fc: Vec<f64> = x.iter().map(|v| 1.1 * v).collect();
        let s = skill_scores(&fc, &x).unwrap();
        assert!((s.nmb - 0.1).abs() < 1e-12);
        // Perfect anticorrelation on zero-mean data.
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let shifted_obs: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        let shifted_neg: Vec<f64> = neg.iter().map(|v| v + 10.0).collect();
        let s = skill_scores(&shifted_neg, &shifted_obs).unwrap();
        assert!((s.pearson - -1.0).abs() < 1e-12);
    }

    #[test]
    fn skill_scores_degenerate_inputs() {
        let obs = vec![2.0; 10];
        let fc: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(skill_scores(&fc, &obs).is_err());
    }

    #[test]
    fn empirical_quantile_convention() {
        let data = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&data, 0.0), 1.0);
        assert_eq!(empirical_quantile(&data, 1.0), 4.0);
        assert!((empirical_quantile(&data, 0.5) - 2.5).abs() < 1e-15);
        // Linear interpolation between order statistics.
        assert!((empirical_quantile(&data, 1.0 / 3.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn table_validation() {
        assert!(QuantileForecastTable::new(
            vec![0.0],
            vec![10.0, 90.0],
            vec![vec![2.0, 1.0]],
        )
        .is_err());
        assert!(QuantileForecastTable::new(vec![0.0], vec![10.0, 90.0], vec![vec![1.0, 2.0]])
            .is_ok());
    }
}
