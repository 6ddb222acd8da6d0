//! Lognormal densities, the lognormal moment-generating function on the
//! nonpositive axis, and the approximation of a lognormal sum by a single
//! lognormal whose mgf agrees with the sum's at two points.
//!
//! The mgf integrand `exp(s·e^{mu + sigma z})` is close to a step function in
//! `z` when `s·e^mu` is large, as it is for dollar-scale damages. Quadrature is
//! therefore centred on the mode of the log-integrand, which is available in
//! closed form through the Lambert W function, and scaled by its curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

/// Points at which the matched lognormal's mgf agrees with the sum's.
pub const DEFAULT_MATCH_POINTS: [f64; 2] = [-0.001, -0.005];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `Lognormal(mu, sigma2)` at `x`; `-inf` for `x <= 0`.
pub fn log_pdf(x: f64, mu: f64, sigma2: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let lx = x.ln();
    let r = lx - mu;
    -lx - 0.5 * sigma2.ln() - LN_SQRT_2PI - r * r / (2.0 * sigma2)
}

/// Parameters of a lognormal component on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl LognormalParams {
    pub fn new(mu: f64, sigma2: f64) -> Self {
        Self { mu, sigma2 }
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma2).exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        log_pdf(x, self.mu, self.sigma2)
    }
}

/// `log E[exp(sX)]` with derivatives in `mu` and `sigma = sqrt(sigma2)`.
#[derive(Debug, Clone, Copy)]
struct LogMgf {
    value: f64,
    d_mu: f64,
    d_sigma: f64,
}

/// Principal branch of Lambert W for `x = exp(log_x) > 0`.
fn lambert_w_from_log(log_x: f64) -> f64 {
    if log_x < 1.0 {
        let x = log_x.exp();
        let mut w = if x < 1.0 { x / (1.0 + x) } else { 0.5 * log_x + 0.5 };
        for _ in 0..100 {
            let e = w.exp();
            let f = w * e - x;
            let step = f / (e * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
            w -= step;
            if step.abs() <= 1e-16 * w.abs().max(1e-300) {
                break;
            }
        }
        w
    } else {
        // y + ln y = log_x, concave in y so Newton from below never overshoots past the root.
        let mut y = log_x - log_x.ln();
        for _ in 0..100 {
            let f = y + y.ln() - log_x;
            let step = f / (1.0 + 1.0 / y);
            y -= step;
            if step.abs() <= 1e-15 * y {
                break;
            }
        }
        y
    }
}

fn log_mgf_full(mu: f64, sigma2: f64, s: f64) -> LogMgf {
    if s == 0.0 {
        return LogMgf {
            value: 0.0,
            d_mu: 0.0,
            d_sigma: 0.0,
        };
    }
    let sigma = sigma2.sqrt();
    let scale = -s; // > 0
    if sigma == 0.0 {
        let v = s * mu.exp();
        return LogMgf {
            value: v,
            d_mu: v,
            d_sigma: 0.0,
        };
    }
    // Mode of h(z) = -z²/2 + s e^{mu + sigma z}: sigma·(-z) = W(|s| sigma² e^mu).
    let y = lambert_w_from_log(scale.ln() + 2.0 * sigma.ln() + mu);
    let z_star = -y / sigma;
    // |s| e^{mu + sigma z*} = y / sigma², evaluated without forming e^mu.
    let tilt = (scale.ln() + mu + sigma * z_star).exp();
    let h_star = -0.5 * z_star * z_star - tilt;
    let tau = 1.0 / (1.0 + y).sqrt();
    let rule = GaussHermite::standard();
    let spread = std::f64::consts::SQRT_2 * tau;

    let mut log_terms = Vec::with_capacity(rule.nodes.len());
    let mut points = Vec::with_capacity(rule.nodes.len());
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let d = spread * u;
        let z = z_star + d;
        let growth = (sigma * d).exp_m1();
        let delta_h = -0.5 * (z * z - z_star * z_star) - tilt * growth;
        log_terms.push(w.ln() + delta_h + u * u);
        points.push((z, -tilt * (1.0 + growth)));
    }
    let peak = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut e_sx = 0.0;
    let mut e_sxz = 0.0;
    for (lt, &(z, sx)) in log_terms.iter().zip(&points) {
        let weight = (lt - peak).exp();
        total += weight;
        e_sx += weight * sx;
        e_sxz += weight * sx * z;
    }
    let value = -LN_SQRT_2PI + h_star + spread.ln() + peak + total.ln();
    LogMgf {
        value,
        d_mu: e_sx / total,
        d_sigma: e_sxz / total,
    }
}

/// `log E[exp(sX)]` for `X ~ Lognormal(mu, sigma2)` and `s <= 0`.
pub fn lognormal_log_mgf(mu: f64, sigma2: f64, s: f64) -> Result<f64> {
    if s > 0.0 {
        return Err(Error::PositiveMgfArgument(s));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    Ok(log_mgf_full(mu, sigma2, s).value)
}

/// `E[exp(sX)]` for `X ~ Lognormal(mu, sigma2)` and `s <= 0`.
pub fn lognormal_mgf(mu: f64, sigma2: f64, s: f64) -> Result<f64> {
    lognormal_log_mgf(mu, sigma2, s).map(f64::exp)
}

/// Outcome of the two-point mgf match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumMatch {
    pub params: LognormalParams,
    /// Log-mgf residuals at the two match points.
    pub residuals: [f64; 2],
    pub iterations: usize,
}

/// Solver settings for [`lognormal_sum_match_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub points: [f64; 2],
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            points: DEFAULT_MATCH_POINTS,
            tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

/// Fenton-Wilkinson approximation: matches the mean and variance of the sum.
pub fn fenton_wilkinson(components: &[LognormalParams]) -> LognormalParams {
    let mean: f64 = components.iter().map(LognormalParams::mean).sum();
    let var: f64 = components
        .iter()
        .map(|c| c.sigma2.exp_m1() * (2.0 * c.mu + c.sigma2).exp())
        .sum();
    let sigma2 = (var / (mean * mean)).ln_1p();
    LognormalParams::new(mean.ln() - 0.5 * sigma2, sigma2)
}

/// Lognormal whose mgf equals the product of the components' mgfs at the
/// default match points.
pub fn lognormal_sum_match(components: &[LognormalParams]) -> Result<SumMatch> {
    lognormal_sum_match_with(components, &MatchOptions::default())
}

/// Damped Newton solve in `(mu, ln sigma2)`, warm-started from
/// Fenton-Wilkinson. When Newton stalls, a nested bisection (inner on `mu`,
/// outer on `ln sigma2`) supplies a bracketed solution that Newton then polishes.
pub fn lognormal_sum_match_with(
    components: &[LognormalParams],
    options: &MatchOptions,
) -> Result<SumMatch> {
    if components.len() < 2 {
        return Err(Error::InvalidArgument(
            "moment matching needs at least two components".into(),
        ));
    }
    for &s in &options.points {
        if s >= 0.0 {
            return Err(Error::PositiveMgfArgument(s));
        }
    }
    let target = options.points.map(|s| {
        components
            .iter()
            .map(|c| log_mgf_full(c.mu, c.sigma2, s).value)
            .sum::<f64>()
    });
    if !target.iter().all(|t| t.is_finite()) {
        return Err(Error::NonFinite("component log-mgf".into()));
    }
    // Residuals cannot be resolved below the rounding of the target itself.
    let tolerance = options
        .tolerance
        .max(8.0 * f64::EPSILON * target[0].abs().max(target[1].abs()));

    let start = fenton_wilkinson(components);
    let newton_err = match newton(start.mu, start.sigma2.max(1e-300).ln(), &target, tolerance, options) {
        Ok(m) => return Ok(m),
        Err(e) => e,
    };
    let Some((mu, log_s2)) = nested_bisection(&target, options.points) else {
        return Err(newton_err);
    };
    newton(mu, log_s2, &target, tolerance, options).map(|mut m| {
        m.iterations += options.max_iterations;
        m
    })
}

fn residuals(mu: f64, log_s2: f64, target: &[f64; 2], points: [f64; 2]) -> ([f64; 2], LogMgf, LogMgf) {
    let sigma2 = log_s2.exp();
    let a = log_mgf_full(mu, sigma2, points[0]);
    let b = log_mgf_full(mu, sigma2, points[1]);
    ([a.value - target[0], b.value - target[1]], a, b)
}

fn max_norm(r: &[f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

fn newton(
    mut mu: f64,
    mut log_s2: f64,
    target: &[f64; 2],
    tolerance: f64,
    options: &MatchOptions,
) -> Result<SumMatch> {
    let eval = |mu: f64, log_s2: f64| residuals(mu, log_s2, target, options.points);
    let (mut r, mut a, mut b) = eval(mu, log_s2);
    for iteration in 0..=options.max_iterations {
        if max_norm(&r) < tolerance {
            return Ok(SumMatch {
                params: LognormalParams::new(mu, log_s2.exp()),
                residuals: r,
                iterations: iteration,
            });
        }
        if iteration == options.max_iterations {
            break;
        }
        // d/d(ln sigma2) = (sigma / 2) d/d sigma
        let sigma = (0.5 * log_s2).exp();
        let j = [
            [a.d_mu, 0.5 * sigma * a.d_sigma],
            [b.d_mu, 0.5 * sigma * b.d_sigma],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let (dmu, dls) = if det.abs() > 1e-300 && det.is_finite() {
            (
                (j[1][1] * r[0] - j[0][1] * r[1]) / det,
                (j[0][0] * r[1] - j[1][0] * r[0]) / det,
            )
        } else {
            (r[0] / j[0][0], 0.0)
        };
        // Shrink the whole step so the direction is kept.
        let mut step = (5.0 / dls.abs().max(1e-300)).min(1.0);
        loop {
            let cand_mu = mu - step * dmu;
            let cand_ls = log_s2 - step * dls;
            let (cr, ca, cb) = eval(cand_mu, cand_ls);
            if cr.iter().all(|v| v.is_finite()) && max_norm(&cr) < max_norm(&r) {
                mu = cand_mu;
                log_s2 = cand_ls;
                r = cr;
                a = ca;
                b = cb;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    residuals: r,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        residuals: r,
    })
}

/// `mu` at which the log-mgf at `point` equals `target`; the log-mgf is
/// strictly decreasing in `mu` for a negative point.
fn solve_mu(log_s2: f64, target: f64, point: f64) -> Option<f64> {
    let sigma2 = log_s2.exp();
    let value = |mu: f64| log_mgf_full(mu, sigma2, point).value;
    let (mut lo, mut hi) = (-50.0, 50.0);
    while value(lo) < target {
        lo -= 50.0;
        if lo < -1e4 {
            return None;
        }
    }
    while value(hi) > target {
        hi += 50.0;
        if hi > 1e4 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Outer bisection on `ln sigma2` of the second residual along the curve on
/// which the first one vanishes. A point mass gives the largest ratio of the
/// two log-mgfs and a wide lognormal the smallest, which brackets the root.
fn nested_bisection(target: &[f64; 2], points: [f64; 2]) -> Option<(f64, f64)> {
    let g = |log_s2: f64| -> Option<(f64, f64)> {
        let mu = solve_mu(log_s2, target[0], points[0])?;
        Some((mu, log_mgf_full(mu, log_s2.exp(), points[1]).value - target[1]))
    };
    let (mut lo, mut hi) = (-60.0, 8.0);
    let g_lo = g(lo)?.1;
    let g_hi = g(hi)?.1;
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)?.1.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let log_s2 = 0.5 * (lo + hi);
    Some((g(log_s2)?.0, log_s2))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid rule in the original `z` coordinate with log-sum-exp.
    fn oracle_log_mgf(mu: f64, sigma2: f64, s: f64) -> f64 {
        let sigma = sigma2.sqrt();
        let (lo, hi, n) = (-40.0, 40.0, 400_000);
        let h = (hi - lo) / n as f64;
        let logs: Vec<f64> = (0..=n)
            .map(|i| {
                let z = lo + i as f64 * h;
                let w: f64 = if i == 0 || i == n { 0.5 } else { 1.0 };
                w.ln() - 0.5 * z * z - LN_SQRT_2PI + s * (mu + sigma * z).exp()
            })
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln() + h.ln()
    }

    #[test]
    fn mgf_at_zero_is_one() {
        assert_eq!(lognormal_mgf(3.0, 2.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_point_mass() {
        let v = lognormal_mgf(0.0, 1e-14, -1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(lognormal_mgf(0.0, 0.0, -1.0).unwrap(), (-1.0f64).exp());
    }

    #[test]
    fn positive_argument_rejected() {
        assert!(matches!(
            lognormal_mgf(0.0, 1.0, 0.1),
            Err(Error::PositiveMgfArgument(_))
        ));
    }

    #[test]
    fn matches_trapezoid_oracle() {
        let v = lognormal_mgf(0.0, 1.0, -0.001).unwrap();
        let o = oracle_log_mgf(0.0, 1.0, -0.001).exp();
        assert!((v - o).abs() < 1e-10 * o, "{v} vs {o}");
        for &(mu, s2, s) in &[(1.0, 0.5, -2.0), (18.0, 5.0, -0.005), (20.0, 1.0, -0.001), (15.0, 8.0, -0.001)] {
            let v = lognormal_log_mgf(mu, s2, s).unwrap();
            let o = oracle_log_mgf(mu, s2, s);
            assert!((v - o).abs() < 1e-9 * o.abs().max(1.0), "{mu} {s2} {s}: {v} vs {o}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (mu, s2, s) = (17.0, 2.0, -0.003);
        let f = log_mgf_full(mu, s2, s);
        let h = 1e-5;
        let dmu = (lognormal_log_mgf(mu + h, s2, s).unwrap() - lognormal_log_mgf(mu - h, s2, s).unwrap()) / (2.0 * h);
        let sig = s2.sqrt();
        let dsig = (lognormal_log_mgf(mu, (sig + h).powi(2), s).unwrap()
            - lognormal_log_mgf(mu, (sig - h).powi(2), s).unwrap())
            / (2.0 * h);
        assert!((f.d_mu - dmu).abs() < 1e-5 * dmu.abs().max(1.0));
        assert!((f.d_sigma - dsig).abs() < 1e-5 * dsig.abs().max(1.0));
    }

    #[test]
    fn mixed_scale_components_converge() {
        let cases = [
            vec![LognormalParams::new(16.0, 0.5), LognormalParams::new(16.0, 7.3108853766333795)],
            vec![
                LognormalParams::new(16.196575798175676, 7.39340483264959),
                LognormalParams::new(19.339709503523466, 3.418901534723699),
                LognormalParams::new(21.307785953655326, 0.012817429774559127),
                LognormalParams::new(23.18887584959502, 11.150631915521972),
                LognormalParams::new(10.271540694560937, 8.716257620942846),
            ],
        ];
        for comps in cases {
            let m = lognormal_sum_match(&comps).unwrap();
            for s in DEFAULT_MATCH_POINTS {
                let lhs = lognormal_log_mgf(m.params.mu, m.params.sigma2, s).unwrap();
                let rhs: f64 = comps.iter().map(|c| lognormal_log_mgf(c.mu, c.sigma2, s).unwrap()).sum();
                assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn sum_of_constants() {
        let comps = [LognormalParams::new(0.0, 1e-12), LognormalParams::new(0.0, 1e-12)];
        let m = lognormal_sum_match(&comps).unwrap();
        assert!((m.params.mu - 2f64.ln()).abs() < 1e-6, "{:?}", m);
        assert!(m.params.sigma2 < 1e-6);
    }

    #[test]
    fn matched_mgf_equals_product() {
        let comps = [
            LognormalParams::new(19.0, 4.0),
            LognormalParams::new(20.5, 5.0),
            LognormalParams::new(18.2, 5.0),
        ];
        let m = lognormal_sum_match(&comps).unwrap();
        for s in DEFAULT_MATCH_POINTS {
            let lhs = lognormal_log_mgf(m.params.mu, m.params.sigma2, s).unwrap();
            let rhs: f64 = comps
                .iter()
                .map(|c| lognormal_log_mgf(c.mu, c.sigma2, s).unwrap())
                .sum();
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn order_invariant() {
        let a = [LognormalParams::new(19.0, 2.0), LognormalParams::new(21.0, 6.0)];
        let b = [a[1], a[0]];
        let ma = lognormal_sum_match(&a).unwrap();
        let mb = lognormal_sum_match(&b).unwrap();
        assert!((ma.params.mu - mb.params.mu).abs() < 1e-9);
        assert!((ma.params.sigma2 - mb.params.sigma2).abs() < 1e-9);
    }

    #[test]
    fn needs_two_components() {
        assert!(lognormal_sum_match(&[LognormalParams::new(1.0, 1.0)]).is_err());
    }
}

