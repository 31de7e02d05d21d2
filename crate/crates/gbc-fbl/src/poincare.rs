//! Monte Carlo checks of the Gaussian Poincaré inequality and of the
//! variance bound `2(n + kappa/sigma^2)` for finite-mixture log-densities,
//! with analytic gradients through the tilted posterior.

use serde::{Deserialize, Serialize};

use crate::channel::{gaussian_log_density, log_sum_exp_weighted};
use crate::rng::CounterRng;
use crate::stats::{parallel_reduce, Moments};
use crate::{Error, Result};

const MIN_TRIALS: u64 = 1_000;
const WEIGHT_TOL: f64 = 1e-12;

/// A finite family of perturbation vectors `g(w)` with log-weights forming a
/// distribution over `w`, and a certified cap `kappa >= max_w ||g(w)||^2`.
#[derive(Debug, Clone)]
pub struct PerturbationSet {
    n: usize,
    vectors: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    kappa: f64,
}

impl PerturbationSet {
    pub fn new(vectors: Vec<Vec<f64>>, log_weights: Vec<f64>, kappa: f64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::domain("perturbation set must be nonempty"));
        }
        if vectors.len() != log_weights.len() {
            return Err(Error::domain(format!(
                "{} vectors but {} log-weights",
                vectors.len(),
                log_weights.len()
            )));
        }
        let n = vectors[0].len();
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        for g in &vectors {
            if g.len() != n {
                return Err(Error::domain(format!(
                    "vector length {} does not match dimension {n}",
                    g.len()
                )));
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::domain("perturbation vectors must be finite"));
            }
        }
        let zeros = vec![0.0; log_weights.len()];
        let total = log_sum_exp_weighted(&log_weights, &zeros)?;
        if !(total.abs() <= WEIGHT_TOL) {
            return Err(Error::domain(format!(
                "weights must sum to 1; log-sum is {total}"
            )));
        }
        let max_sq = vectors
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        if !(kappa.is_finite() && kappa >= max_sq - 1e-12 * max_sq.max(1.0)) {
            return Err(Error::domain(format!(
                "kappa = {kappa} is below max squared norm {max_sq}"
            )));
        }
        Ok(PerturbationSet {
            n,
            vectors,
            log_weights,
            kappa: kappa.max(max_sq),
        })
    }

    /// Uniform weights and the tight cap `kappa = max_w ||g(w)||^2`.
    pub fn uniform(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let m = vectors.len().max(1);
        let lw = vec![-(m as f64).ln(); vectors.len()];
        let kappa = vectors
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        PerturbationSet::new(vectors, lw, kappa)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Same set with every vector multiplied by `c` and the cap by `c^2`.
    pub fn scaled(&self, c: f64) -> PerturbationSet {
        PerturbationSet {
            n: self.n,
            vectors: self
                .vectors
                .iter()
                .map(|g| g.iter().map(|v| c * v).collect())
                .collect(),
            log_weights: self.log_weights.clone(),
            kappa: self.kappa * c * c,
        }
    }
}

/// Outcome of a Monte Carlo variance check against an analytic ceiling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VarianceReport {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
    pub analytic_bound: f64,
    pub pass: bool,
}

/// Both sides of the Poincaré inequality, estimated at matched trials.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoincareGap {
    pub var_est: f64,
    pub grad_energy_est: f64,
    pub var_std_error: f64,
    pub grad_std_error: f64,
    pub trials: u64,
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "trials must be at least {MIN_TRIALS}, got {trials}"
        )));
    }
    Ok(())
}

#[derive(Default)]
struct GapAcc {
    values: Moments,
    energies: Moments,
    bad_point: Option<Vec<f64>>,
}

/// Estimates `Var[f(Z)]` and `E[||grad f(Z)||^2]` over `Z ~ N(0, I_n)`.
///
/// Deterministic given the rng key: trial `t` draws from substream `t`, and
/// chunk accumulators merge in ascending order.
pub fn poincare_gap<F, G>(
    f: F,
    grad_f: G,
    n: usize,
    trials: u64,
    rng: &CounterRng,
) -> Result<PoincareGap>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if n == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    check_trials(trials)?;
    let acc = parallel_reduce(
        trials,
        |t, acc: &mut GapAcc| {
            if acc.bad_point.is_some() {
                return;
            }
            let mut stream = rng.substream(t);
            let mut z = vec![0.0; n];
            stream.fill_standard_normal(&mut z);
            let fv = f(&z);
            let grad = grad_f(&z);
            let energy: f64 = grad.iter().map(|g| g * g).sum();
            if !(fv.is_finite() && energy.is_finite()) || grad.len() != n {
                acc.bad_point = Some(z);
                return;
            }
            acc.values.push(fv);
            acc.energies.push(energy);
        },
        |a, b| {
            if a.bad_point.is_none() {
                a.values.merge(&b.values);
                a.energies.merge(&b.energies);
                a.bad_point = b.bad_point;
            }
        },
    );
    if let Some(point) = acc.bad_point {
        return Err(Error::NonFinite { point });
    }
    Ok(PoincareGap {
        var_est: acc.values.variance(),
        grad_energy_est: acc.energies.mean(),
        var_std_error: acc.values.variance_std_error(),
        grad_std_error: acc.energies.mean_std_error(),
        trials,
    })
}

/// Per-sample value `log E_W[p_Z(z + g(W))]` with `p_Z` the `N(0, sigma^2 I)`
/// density evaluated coordinatewise.
pub fn mixture_log_density(pert: &PerturbationSet, sigma_sq: f64, z: &[f64]) -> Result<f64> {
    if z.len() != pert.n {
        return Err(Error::domain(format!(
            "point length {} does not match dimension {}",
            z.len(),
            pert.n
        )));
    }
    let mut shifted = vec![0.0; pert.n];
    let mut log_terms = Vec::with_capacity(pert.vectors.len());
    for g in &pert.vectors {
        for k in 0..pert.n {
            shifted[k] = z[k] + g[k];
        }
        log_terms.push(gaussian_log_density(&shifted, 0.0, sigma_sq)?);
    }
    log_sum_exp_weighted(&log_terms, &pert.log_weights)
}

/// Estimates `Var_Z[log E_W p_Z(Z + g(W))]` with `Z ~ N(0, sigma^2 I)` and
/// compares it against the ceiling `2(n + kappa/sigma^2)`.
pub fn mixture_variance_report(
    pert: &PerturbationSet,
    sigma_sq: f64,
    trials: u64,
    rng: &CounterRng,
) -> Result<VarianceReport> {
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::domain(format!(
            "sigma_sq must be positive, got {sigma_sq}"
        )));
    }
    check_trials(trials)?;
    let sigma = sigma_sq.sqrt();
    let acc = parallel_reduce(
        trials,
        |t, acc: &mut Moments| {
            let mut stream = rng.substream(t);
            let mut z = vec![0.0; pert.n];
            for v in z.iter_mut() {
                *v = sigma * stream.standard_normal();
            }
            acc.push(mixture_log_density(pert, sigma_sq, &z).expect("validated inputs"));
        },
        |a, b| a.merge(&b),
    );
    let estimate = acc.variance();
    let std_error = acc.variance_std_error();
    let analytic_bound = 2.0 * (pert.n as f64 + pert.kappa / sigma_sq);
    Ok(VarianceReport {
        estimate,
        std_error,
        trials,
        analytic_bound,
        pass: estimate - 3.0 * std_error <= analytic_bound,
    })
}

/// The standardized mixture log-density
/// `f(z) = log sum_w weight(w) N(z + g(w)/sigma; 0, I)`.
pub fn standardized_mixture_log_density(
    pert: &PerturbationSet,
    sigma_sq: f64,
    z: &[f64],
) -> Result<f64> {
    let scaled = validate_standardized(pert, sigma_sq, z)?;
    mixture_log_density(&scaled, 1.0, z)
}

/// Posterior over `w` given `z` under the standardized mixture:
/// `p(w|z) ∝ weight(w) N(z + g(w)/sigma; 0, I)`, computed in the log domain.
pub fn tilted_posterior(pert: &PerturbationSet, sigma_sq: f64, z: &[f64]) -> Result<Vec<f64>> {
    let scaled = validate_standardized(pert, sigma_sq, z)?;
    let mut shifted = vec![0.0; scaled.n];
    let mut logits = Vec::with_capacity(scaled.vectors.len());
    for (g, lw) in scaled.vectors.iter().zip(&scaled.log_weights) {
        for k in 0..scaled.n {
            shifted[k] = z[k] + g[k];
        }
        logits.push(lw + gaussian_log_density(&shifted, 0.0, 1.0)?);
    }
    let norm = log_sum_exp_weighted(&logits, &vec![0.0; logits.len()])?;
    Ok(logits.iter().map(|l| (l - norm).exp()).collect())
}

/// Analytic gradient of [`standardized_mixture_log_density`]:
/// `grad_k = -(z_k + E_posterior[g_k(W)/sigma])`.
pub fn mixture_log_density_gradient(
    pert: &PerturbationSet,
    sigma_sq: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    let posterior = tilted_posterior(pert, sigma_sq, z)?;
    let inv_sigma = 1.0 / sigma_sq.sqrt();
    let mut grad: Vec<f64> = z.iter().map(|&zk| -zk).collect();
    for (g, p) in pert.vectors.iter().zip(&posterior) {
        for k in 0..pert.n {
            grad[k] -= p * g[k] * inv_sigma;
        }
    }
    Ok(grad)
}

fn validate_standardized(
    pert: &PerturbationSet,
    sigma_sq: f64,
    z: &[f64],
) -> Result<PerturbationSet> {
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::domain(format!(
            "sigma_sq must be positive, got {sigma_sq}"
        )));
    }
    if z.len() != pert.n {
        return Err(Error::domain(format!(
            "point length {} does not match dimension {}",
            z.len(),
            pert.n
        )));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { point: z.to_vec() });
    }
    Ok(pert.scaled(1.0 / sigma_sq.sqrt()))
}
