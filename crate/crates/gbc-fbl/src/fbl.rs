//! Finite-blocklength converse apparatus: the Fano bound, the Chebyshev
//! threshold, the variance-driven constants `zeta_i` and `lambda_i`,
//! expurgation arithmetic, and the resulting finite-n outer-bound region.

use serde::{Deserialize, Serialize};

use crate::capacity::{boundary_point, PowerSplit};
use crate::channel::{ChannelParams, Receiver};
use crate::{Error, Result};

/// Blocklength-independent constants of the finite-n outer bound:
/// `zeta_i = sqrt((16/(1-eps)) (1 + 4P/sigma_i^2))` multiplies `sqrt(n)`,
/// `lambda_i = 2 + (1/(1-eps)) (2 + C(P/sigma1^2) + C(P/sigma2^2))`
/// multiplies `log n` and is the same for both receivers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FblConstants {
    pub zeta1: f64,
    pub zeta2: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub eps: f64,
}

/// Finite-n outer bound sampled over the power split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterBoundRegion {
    pub n: u64,
    pub eps: f64,
    pub points: Vec<OuterBoundPoint>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OuterBoundPoint {
    pub alpha: f64,
    pub r1_bound: f64,
    pub r2_bound: f64,
}

impl OuterBoundRegion {
    /// CSV table `alpha,r1_bound_nats,r2_bound_nats,n,eps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,r1_bound_nats,r2_bound_nats,n,eps\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.alpha, p.r1_bound, p.r2_bound, self.n, self.eps
            ));
        }
        out
    }
}

fn check_eps_open(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Fano upper bound on `log M_i`:
/// `(1/(1-eps)) (1 + (n/2) ln(1 + P/sigma^2))` nats.
pub fn fano_bound(n: u64, eps: f64, p: f64, sigma_sq: f64) -> Result<f64> {
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    if !(p > 0.0 && sigma_sq > 0.0) {
        return Err(Error::domain("p and sigma_sq must be positive"));
    }
    Ok((1.0 + 0.5 * n as f64 * (p / sigma_sq).ln_1p()) / (1.0 - eps))
}

/// Chebyshev threshold
/// `gamma = log_m - mean - sqrt((2/(1-eps)) var)`.
pub fn chebyshev_threshold(log_m: f64, mean_density: f64, var_density: f64, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    if !(var_density >= 0.0) {
        return Err(Error::domain(format!(
            "var_density must be nonnegative, got {var_density}"
        )));
    }
    Ok(log_m - mean_density - (2.0 / (1.0 - eps) * var_density).sqrt())
}

/// The constants `zeta_i`, `lambda_i` for a channel at error parameter `eps`.
pub fn fbl_constants(params: &ChannelParams, eps: f64) -> Result<FblConstants> {
    check_eps_open(eps)?;
    let p = params.power();
    let zeta = |sigma_sq: f64| (16.0 / (1.0 - eps) * (1.0 + 4.0 * p / sigma_sq)).sqrt();
    let lam = 2.0
        + (2.0 + 0.5 * (p / params.sigma1_sq()).ln_1p() + 0.5 * (p / params.sigma2_sq()).ln_1p())
            / (1.0 - eps);
    Ok(FblConstants {
        zeta1: zeta(params.sigma1_sq()),
        zeta2: zeta(params.sigma2_sq()),
        lam1: lam,
        lam2: lam,
        eps,
    })
}

/// Smallest admissible blocklength, `ceil(2/(1-eps))`.
pub fn min_blocklength(eps: f64) -> Result<u64> {
    check_eps_open(eps)?;
    let q = 2.0 / (1.0 - eps);
    // Absorb float jitter so e.g. eps = 1/3 yields 3, not ceil(3.0000000000000004).
    let r = q.round();
    Ok(if (q - r).abs() < 1e-9 * r.max(1.0) { r as u64 } else { q.ceil() as u64 })
}

/// Cap `8 n (1 + 4P/sigma_i^2)` on the variance of the information density
/// (the two per-term caps `2n(1 + 4P/sigma_i^2)` summed with the factor-2
/// Cauchy-Schwarz inflation).
pub fn variance_cap(params: &ChannelParams, n: u64, receiver: Receiver) -> f64 {
    8.0 * n as f64 * (1.0 + 4.0 * params.power() / params.noise_variance(receiver))
}

/// Per-pair expurgated message-set sizes `(floor(m1/n), floor(m2/n))`.
pub fn expurgated_sizes(m1: u64, m2: u64, n: u64) -> Result<(u64, u64)> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if m1 < n || m2 < n {
        return Err(Error::domain(format!(
            "expurgation needs m_i >= n; got m1 = {m1}, m2 = {m2}, n = {n}"
        )));
    }
    Ok((m1 / n, m2 / n))
}

/// Normalized finite-n outer bound sampled at `num_alpha` power splits:
/// `r_i_bound(alpha) = boundary rate + zeta_i/sqrt(n) + (lambda_i+1) ln(n)/n + ln(2)/n`.
pub fn outer_bound_region(
    params: &ChannelParams,
    n: u64,
    eps: f64,
    num_alpha: usize,
) -> Result<OuterBoundRegion> {
    let floor = min_blocklength(eps)?;
    if n < floor {
        return Err(Error::BlocklengthFloor { n, floor });
    }
    if num_alpha < 2 {
        return Err(Error::domain(format!(
            "num_alpha must be at least 2, got {num_alpha}"
        )));
    }
    let c = fbl_constants(params, eps)?;
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let log_term = nf.ln() / nf;
    let gap1 = c.zeta1 / sqrt_n + (c.lam1 + 1.0) * log_term + std::f64::consts::LN_2 / nf;
    let gap2 = c.zeta2 / sqrt_n + (c.lam2 + 1.0) * log_term + std::f64::consts::LN_2 / nf;
    let points = (0..num_alpha)
        .map(|i| {
            let alpha = i as f64 / (num_alpha - 1) as f64;
            let b = boundary_point(params, PowerSplit::new(alpha).unwrap());
            OuterBoundPoint {
                alpha,
                r1_bound: b.r1 + gap1,
                r2_bound: b.r2 + gap2,
            }
        })
        .collect();
    Ok(OuterBoundRegion { n, eps, points })
}
