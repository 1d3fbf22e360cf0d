//! Identification of the link compliance law from (force, deflection) pairs.
//!
//! The power law `δL = a·F^b` is seeded by a straight-line fit in log-log
//! space and refined by Levenberg–Marquardt on the untransformed residuals.
//! Forces enter as magnitudes; each deflection is taken along the sign of its
//! force so compression and tension samples pool together.

use serde::{Deserialize, Serialize};

use crate::compliance::{ComplianceLaw, ForcePair};
use crate::error::{ModelError, Result};

pub const MIN_FIT_PAIRS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub law: ComplianceLaw,
    /// Coefficient of determination on the original (non-log) scale.
    pub r_squared: f64,
    /// Root-mean-square residual (µm).
    pub rms_um: f64,
    pub n_pairs: usize,
    pub iterations: usize,
}

/// Fit a power law to (force N, deflection µm) pairs.
pub fn fit_compliance_law(pairs: &[ForcePair]) -> Result<FitReport> {
    let data: Vec<(f64, f64)> = pairs
        .iter()
        .map(|p| (p.force_n.abs(), p.deflection_um * p.force_n.signum()))
        .collect();
    fit_power_law(&data)
}

/// Fit `y = a·x^b` to samples with `x ≥ 0`.
pub fn fit_power_law(data: &[(f64, f64)]) -> Result<FitReport> {
    if data.len() < MIN_FIT_PAIRS {
        return Err(ModelError::Fit(format!(
            "need at least {MIN_FIT_PAIRS} pairs, got {}",
            data.len()
        )));
    }
    if data.iter().any(|(x, y)| !x.is_finite() || !y.is_finite() || *x < 0.0) {
        return Err(ModelError::Fit("pairs must be finite with non-negative force".into()));
    }
    let positive: Vec<(f64, f64)> = data.iter().copied().filter(|(x, _)| *x > 0.0).collect();
    let x0 = positive.first().map(|p| p.0).unwrap_or(0.0);
    if positive.len() < 2 || positive.iter().all(|p| (p.0 - x0).abs() <= 1e-12 * x0) {
        return Err(ModelError::Fit(
            "degenerate data: need at least two distinct positive forces".into(),
        ));
    }

    let (mut a, mut b) = log_log_seed(&positive);
    let mut cost = sse(data, a, b);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        // normal equations of the Gauss-Newton step
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(x, y) in data {
            if x == 0.0 {
                // residual -y does not depend on (a, b)
                continue;
            }
            let xb = x.powf(b);
            let r = a * xb - y;
            let ja = xb;
            let jb = a * xb * x.ln();
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        jtj[1][0] = jtj[0][1];

        let mut accepted = false;
        for _ in 0..60 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let m01 = jtj[0][1];
            let det = m00 * m11 - m01 * m01;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let da = -(m11 * jtr[0] - m01 * jtr[1]) / det;
            let db = -(m00 * jtr[1] - m01 * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            if na > 0.0 && nb > 0.0 {
                let new_cost = sse(data, na, nb);
                if new_cost <= cost {
                    let small = da.abs() <= 1e-15 * a.abs().max(1.0)
                        && db.abs() <= 1e-15 * b.abs().max(1.0);
                    a = na;
                    b = nb;
                    cost = new_cost;
                    lambda = (lambda * 0.1).max(1e-15);
                    accepted = true;
                    if small {
                        return finish(data, a, b, iterations);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            break;
        }
    }
    finish(data, a, b, iterations)
}

fn finish(data: &[(f64, f64)], a: f64, b: f64, iterations: usize) -> Result<FitReport> {
    let law = ComplianceLaw::Power { a, b };
    law.validate()
        .map_err(|e| ModelError::Fit(format!("fitted law is outside the admissible range: {e}")))?;
    let n = data.len() as f64;
    let mean = data.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = data.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res = sse(data, a, b);
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitReport {
        law,
        r_squared,
        rms_um: (ss_res / n).sqrt(),
        n_pairs: data.len(),
        iterations,
    })
}

fn sse(data: &[(f64, f64)], a: f64, b: f64) -> f64 {
    data.iter().map(|&(x, y)| (a * x.powf(b) - y).powi(2)).sum()
}

/// Least-squares line through (ln x, ln y); falls back to a secant when too few
/// deflections are positive.
fn log_log_seed(positive: &[(f64, f64)]) -> (f64, f64) {
    let logs: Vec<(f64, f64)> = positive
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let fallback = || {
        let sx: f64 = positive.iter().map(|p| p.0).sum();
        let sy: f64 = positive.iter().map(|p| p.1).sum();
        ((sy / sx).abs().max(1e-6), 1.0)
    };
    if logs.len() < 2 {
        return fallback();
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return fallback();
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = (my - b * mx).exp();
    if b > 0.0 && a.is_finite() {
        (a, b)
    } else {
        fallback()
    }
}

/// `count` points of the fitted curve spanning `[lo, hi]` N.
pub fn sample_curve(law: &ComplianceLaw, lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    match count {
        0 => Vec::new(),
        1 => vec![(lo, law.deflection(lo))],
        _ => (0..count)
            .map(|i| {
                let f = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                (f, law.deflection(f))
            })
            .collect(),
    }
}
