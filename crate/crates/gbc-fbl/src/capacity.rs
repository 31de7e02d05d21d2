//! Exact geometry of the Cover-Bergmans capacity region: boundary points,
//! membership tests, and the weighted-sum capacity optimization.
//!
//! The region is the union over power splits `alpha` of
//! `{ r1 <= C(alpha P / sigma1^2), r2 <= C((1-alpha) P / (alpha P + sigma2^2)) }`
//! with `C(x) = (1/2) ln(1+x)`.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::{Error, Result};

/// A nonnegative rate pair in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 >= 0.0 && r2.is_finite() && r2 >= 0.0) {
            return Err(Error::domain(format!(
                "rates must be finite and nonnegative, got ({r1}, {r2})"
            )));
        }
        Ok(RatePair { r1, r2 })
    }
}

/// Fraction `alpha` of the power budget assigned to the satellite layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit(f64);

impl PowerSplit {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(Error::domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(PowerSplit(alpha))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Maximum of `lambda r1 + (1 - lambda) r2` over the capacity region.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LambdaSumResult {
    pub value: f64,
    pub argmax_alpha: PowerSplit,
    pub lambda: f64,
}

/// `C(x) = (1/2) ln(1 + x)`.
pub fn shannon_c(x: f64) -> Result<f64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::domain(format!("C(x) needs x >= 0, got {x}")));
    }
    Ok(0.5 * x.ln_1p())
}

/// Boundary rate pair at power split `alpha`:
/// `r1 = C(alpha P / sigma1^2)`, `r2 = C((1-alpha) P / (alpha P + sigma2^2))`.
pub fn boundary_point(params: &ChannelParams, split: PowerSplit) -> RatePair {
    let a = split.value();
    let p = params.power();
    let r1 = 0.5 * (a * p / params.sigma1_sq()).ln_1p();
    let r2 = 0.5 * ((1.0 - a) * p / (a * p + params.sigma2_sq())).ln_1p();
    RatePair { r1, r2 }
}

/// Minimal feasible power split for a rate pair, or `None` when outside.
///
/// The `r1` constraint pins `alpha* = min(1, (e^{2 r1} - 1) sigma1^2 / P)`;
/// since the `r2` bound is nonincreasing in `alpha`, membership reduces to
/// checking `r2` at `alpha*`.
pub fn membership_witness(params: &ChannelParams, rate: RatePair, tol: f64) -> Option<PowerSplit> {
    debug_assert!(tol >= 0.0);
    let p = params.power();
    let r1_max = 0.5 * (p / params.sigma1_sq()).ln_1p();
    if rate.r1 > r1_max + tol {
        return None;
    }
    let alpha_star = (((2.0 * rate.r1).exp() - 1.0) * params.sigma1_sq() / p).min(1.0);
    let r2_bound = 0.5 * ((1.0 - alpha_star) * p / (alpha_star * p + params.sigma2_sq())).ln_1p();
    if rate.r2 > r2_bound + tol {
        return None;
    }
    Some(PowerSplit(alpha_star))
}

/// Whether the rate pair lies in the capacity region, with additive slack
/// `tol` (nats) on each coordinate.
pub fn region_contains(params: &ChannelParams, rate: RatePair, tol: f64) -> bool {
    membership_witness(params, rate, tol).is_some()
}

/// Exact weighted-sum capacity
/// `max_alpha { lambda C(alpha P / s1) + (1-lambda) C((1-alpha) P / (alpha P + s2)) }`.
///
/// The objective is evaluated at the endpoints and at the interior
/// stationary point `alpha* = ((1-lambda) s1 - lambda s2) / ((2 lambda - 1) P)`
/// when that expression is defined and lies in (0, 1).
pub fn lambda_sum_capacity(params: &ChannelParams, lambda: f64) -> Result<LambdaSumResult> {
    if !(lambda.is_finite() && (0.0..=1.0).contains(&lambda)) {
        return Err(Error::domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let objective = |alpha: f64| {
        let r = boundary_point(params, PowerSplit(alpha));
        lambda * r.r1 + (1.0 - lambda) * r.r2
    };
    let mut best_alpha = 0.0;
    let mut best = objective(0.0);
    let at_one = objective(1.0);
    if at_one > best {
        best = at_one;
        best_alpha = 1.0;
    }
    let denom = (2.0 * lambda - 1.0) * params.power();
    if denom != 0.0 {
        let alpha_star =
            ((1.0 - lambda) * params.sigma1_sq() - lambda * params.sigma2_sq()) / denom;
        if alpha_star.is_finite() && alpha_star > 0.0 && alpha_star < 1.0 {
            let v = objective(alpha_star);
            if v > best {
                best = v;
                best_alpha = alpha_star;
            }
        }
    }
    Ok(LambdaSumResult {
        value: best,
        argmax_alpha: PowerSplit(best_alpha),
        lambda,
    })
}

/// Boundary samples at uniformly spaced power splits, as `(alpha, rates)`.
pub fn pareto_boundary(
    params: &ChannelParams,
    num_points: usize,
) -> Result<Vec<(PowerSplit, RatePair)>> {
    if num_points < 2 {
        return Err(Error::domain(format!(
            "num_points must be at least 2, got {num_points}"
        )));
    }
    Ok((0..num_points)
        .map(|i| {
            let alpha = i as f64 / (num_points - 1) as f64;
            let split = PowerSplit(alpha);
            (split, boundary_point(params, split))
        })
        .collect())
}

/// CSV table `alpha,r1_nats,r2_nats` for a boundary sample.
pub fn pareto_boundary_csv(points: &[(PowerSplit, RatePair)]) -> String {
    let mut out = String::from("alpha,r1_nats,r2_nats\n");
    for (split, rate) in points {
        out.push_str(&format!("{},{},{}\n", split.value(), rate.r1, rate.r2));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChannelParams {
        ChannelParams::new(1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn shannon_c_values() {
        assert_eq!(shannon_c(0.0).unwrap(), 0.0);
        assert!((shannon_c(std::f64::consts::E.powi(2) - 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((shannon_c(1.0).unwrap() - 0.346_573_590_279_972_65).abs() < 1e-9);
        assert!(shannon_c(-0.1).is_err());
    }

    #[test]
    fn boundary_endpoints() {
        let p = params();
        let at1 = boundary_point(&p, PowerSplit::new(1.0).unwrap());
        assert!((at1.r1 - shannon_c(1.0).unwrap()).abs() < 1e-15);
        assert_eq!(at1.r2, 0.0);
        let at0 = boundary_point(&p, PowerSplit::new(0.0).unwrap());
        assert_eq!(at0.r1, 0.0);
        assert!((at0.r2 - shannon_c(0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn boundary_midpoint_oracle() {
        // Direct evaluation: r1 = C(0.5) = ln(1.5)/2, r2 = C(0.5/2.5) = ln(1.2)/2.
        let p = params();
        let mid = boundary_point(&p, PowerSplit::new(0.5).unwrap());
        assert!((mid.r1 - 0.202_732_554_054_082_2).abs() < 1e-12);
        assert!((mid.r2 - 0.091_160_778_396_977_3).abs() < 1e-12);
    }

    #[test]
    fn boundary_monotone_in_alpha() {
        let p = params();
        let mut prev = boundary_point(&p, PowerSplit(0.0));
        for i in 1..=200 {
            let cur = boundary_point(&p, PowerSplit(i as f64 / 200.0));
            assert!(cur.r1 >= prev.r1);
            assert!(cur.r2 <= prev.r2);
            prev = cur;
        }
    }

    #[test]
    fn origin_is_inside() {
        assert!(region_contains(&params(), RatePair::new(0.0, 0.0).unwrap(), 0.0));
    }

    #[test]
    fn boundary_points_are_members() {
        let p = params();
        for i in 0..=100 {
            let rate = boundary_point(&p, PowerSplit(i as f64 / 100.0));
            assert!(region_contains(&p, rate, 1e-12));
        }
    }

    #[test]
    fn strict_pareto_optimality_against_grid_oracle() {
        // A point just beyond the boundary must be rejected at tol = 0, and a
        // dense-grid oracle must agree it is infeasible.
        let p = params();
        let mid = boundary_point(&p, PowerSplit(0.5));
        let outside = RatePair::new(mid.r1 + 1e-3, mid.r2).unwrap();
        assert!(!region_contains(&p, outside, 0.0));
        let grid_feasible = (0..=100_000).any(|i| {
            let b = boundary_point(&p, PowerSplit(i as f64 / 100_000.0));
            outside.r1 <= b.r1 && outside.r2 <= b.r2
        });
        assert!(!grid_feasible);
    }

    #[test]
    fn shifted_boundary_points_are_outside() {
        let p = params();
        for i in 1..100 {
            let b = boundary_point(&p, PowerSplit(i as f64 / 100.0));
            let shifted = RatePair::new(b.r1 + 1e-6, b.r2 + 1e-6).unwrap();
            assert!(!region_contains(&p, shifted, 0.0), "alpha = {}", i as f64 / 100.0);
        }
    }

    #[test]
    fn lambda_endpoints() {
        let p = params();
        let l1 = lambda_sum_capacity(&p, 1.0).unwrap();
        assert!((l1.value - shannon_c(1.0).unwrap()).abs() < 1e-15);
        assert_eq!(l1.argmax_alpha.value(), 1.0);
        let l0 = lambda_sum_capacity(&p, 0.0).unwrap();
        assert!((l0.value - shannon_c(0.5).unwrap()).abs() < 1e-15);
        assert_eq!(l0.argmax_alpha.value(), 0.0);
        assert!(lambda_sum_capacity(&p, 1.1).is_err());
        assert!(lambda_sum_capacity(&p, -0.1).is_err());
    }

    #[test]
    fn telescoping_identity_equal_noise() {
        // For sigma1 = sigma2 and lambda = 1/2 the objective is constant in
        // alpha and the maximum equals C(P / sigma^2) / 2.
        let p = ChannelParams::new(1.0, 1.0, 1.0).unwrap();
        let res = lambda_sum_capacity(&p, 0.5).unwrap();
        let want = 0.5 * shannon_c(1.0).unwrap();
        assert!((res.value - want).abs() < 1e-12);
        for i in 0..=1000 {
            let alpha = i as f64 / 1000.0;
            let b = boundary_point(&p, PowerSplit(alpha));
            assert!((0.5 * b.r1 + 0.5 * b.r2 - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_sum_dominates_grid() {
        let p = params();
        for &lambda in &[0.0, 0.17, 0.33, 0.5, 0.71, 0.9, 1.0] {
            let res = lambda_sum_capacity(&p, lambda).unwrap();
            // value equals the objective at argmax
            let b = boundary_point(&p, res.argmax_alpha);
            assert!((res.value - (lambda * b.r1 + (1.0 - lambda) * b.r2)).abs() < 1e-12);
            for i in 0..=10_000 {
                let bb = boundary_point(&p, PowerSplit(i as f64 / 10_000.0));
                assert!(res.value >= lambda * bb.r1 + (1.0 - lambda) * bb.r2 - 1e-12);
            }
        }
    }

    #[test]
    fn pareto_boundary_endpoints_and_ordering() {
        let p = params();
        let pts = pareto_boundary(&p, 2).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].1.r1, 0.0);
        assert_eq!(pts[1].1.r2, 0.0);
        assert!(pareto_boundary(&p, 1).is_err());

        let pts = pareto_boundary(&p, 64).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].1.r1 > w[0].1.r1, "r1 strictly increasing");
        }
        for (split, rate) in &pts {
            assert!(region_contains(&p, *rate, 1e-12), "alpha {}", split.value());
        }
        // Pairwise dominance scan: no point dominates another.
        for a in &pts {
            for b in &pts {
                let dominates = a.1.r1 >= b.1.r1
                    && a.1.r2 >= b.1.r2
                    && (a.1.r1 > b.1.r1 || a.1.r2 > b.1.r2);
                assert!(!dominates, "{:?} dominates {:?}", a, b);
            }
        }
    }

    #[test]
    fn lambda_sum_convex_in_lambda() {
        let p = params();
        let vals: Vec<f64> = (0..=100)
            .map(|i| lambda_sum_capacity(&p, i as f64 / 100.0).unwrap().value)
            .collect();
        for i in 1..100 {
            assert!(vals[i - 1] + vals[i + 1] - 2.0 * vals[i] >= -1e-10);
        }
    }
}
