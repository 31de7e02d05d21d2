//! Superposition code construction, decoding, Monte Carlo error estimation,
//! and empirical audits of the non-asymptotic converse machinery on tiny,
//! exactly computable codes.

use serde::{Deserialize, Serialize};

use crate::capacity::{boundary_point, membership_witness, PowerSplit, RatePair};
use crate::channel::{
    information_density_from_log_likelihoods, pairwise_log_likelihoods, sample_channel,
    sample_receiver_output, ChannelParams, Codebook, Receiver, MAX_CODEBOOK_PAIRS,
};
use crate::fbl::{chebyshev_threshold, min_blocklength};
use crate::rng::CounterRng;
use crate::stats::{parallel_reduce, wilson_halfwidth, wilson_halfwidth_z, Moments};
use crate::{Error, Result};

/// Caps for the exact verification regime: mixtures and decoding regions are
/// evaluated in full, so codes must stay desk-sized.
pub const VERIFY_MAX_N: usize = 4;
pub const VERIFY_MAX_PAIRS: usize = 64;
pub const VERIFY_MIN_TRIALS: u64 = 100_000;

const MIN_TRIALS: u64 = 1_000;
// Stream offsets keeping the random draws of distinct MC passes disjoint.
const MARGINAL_STREAM_BASE: u64 = 1 << 40;
const SIDE_STREAM_BASE: u64 = 1 << 44;

/// Parameters of a randomly drawn superposition code: `m2` cloud centers of
/// per-coordinate variance `(1-alpha)(P-margin)` carry the coarse message,
/// and each gets `m1` satellites of variance `alpha(P-margin)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SuperpositionConfig {
    params: ChannelParams,
    n: usize,
    m1: usize,
    m2: usize,
    alpha: PowerSplit,
    power_margin: f64,
    seed: u64,
}

impl SuperpositionConfig {
    pub fn new(
        params: ChannelParams,
        n: usize,
        m1: usize,
        m2: usize,
        alpha: PowerSplit,
        power_margin: f64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || m1 == 0 || m2 == 0 {
            return Err(Error::domain("n, m1 and m2 must all be positive"));
        }
        let pairs = m1
            .checked_mul(m2)
            .filter(|&p| p <= MAX_CODEBOOK_PAIRS)
            .ok_or_else(|| {
                Error::domain(format!(
                    "m1 * m2 exceeds the exact-mixture cap {MAX_CODEBOOK_PAIRS}"
                ))
            })?;
        let _ = pairs;
        if !(power_margin.is_finite() && power_margin >= 0.0 && power_margin < params.power()) {
            return Err(Error::domain(format!(
                "power margin must lie in [0, P), got {power_margin}"
            )));
        }
        Ok(SuperpositionConfig {
            params,
            n,
            m1,
            m2,
            alpha,
            power_margin,
            seed,
        })
    }

    /// Default back-off `P / sqrt(n)` from the peak power.
    pub fn default_power_margin(power_p: f64, n: usize) -> f64 {
        power_p / (n as f64).sqrt()
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn alpha(&self) -> PowerSplit {
        self.alpha
    }

    pub fn power_margin(&self) -> f64 {
        self.power_margin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn effective_power(&self) -> f64 {
        self.params.power() - self.power_margin
    }

    fn cloud_std(&self) -> f64 {
        ((1.0 - self.alpha.value()) * self.effective_power()).sqrt()
    }

    fn satellite_std(&self) -> f64 {
        (self.alpha.value() * self.effective_power()).sqrt()
    }

    fn satellite_stream(&self, w1: usize, w2: usize) -> u64 {
        self.m2 as u64 + ((w1 - 1) * self.m2 + (w2 - 1)) as u64 + 1
    }
}

/// A built codebook plus the number of codewords that needed rescaling to
/// meet the peak power constraint.
#[derive(Debug, Clone)]
pub struct BuiltCodebook {
    pub codebook: Codebook,
    pub rescaled: usize,
}

/// Cloud centers `u(w2)`, recomputable from the config seed alone.
pub fn cloud_centers(config: &SuperpositionConfig) -> Vec<Vec<f64>> {
    let std = config.cloud_std();
    (1..=config.m2)
        .map(|w2| {
            let mut rng = CounterRng::new(config.seed, w2 as u64);
            (0..config.n).map(|_| std * rng.standard_normal()).collect()
        })
        .collect()
}

/// Draws the superposition codebook `x(w1, w2) = u(w2) + v(w1, w2)` and
/// rescales any codeword with `||x||^2 > nP` onto the constraint sphere.
pub fn build_superposition_codebook(config: &SuperpositionConfig) -> Result<BuiltCodebook> {
    let clouds = cloud_centers(config);
    let sat_std = config.satellite_std();
    let cap = config.n as f64 * config.params.power();
    let mut codewords = Vec::with_capacity(config.m1 * config.m2 * config.n);
    let mut rescaled = 0usize;
    for w1 in 1..=config.m1 {
        for w2 in 1..=config.m2 {
            let mut rng = CounterRng::new(config.seed, config.satellite_stream(w1, w2));
            let mut x: Vec<f64> = clouds[w2 - 1]
                .iter()
                .map(|&u| u + sat_std * rng.standard_normal())
                .collect();
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            if norm_sq > cap {
                let scale = (cap / norm_sq).sqrt();
                for v in x.iter_mut() {
                    *v *= scale;
                }
                rescaled += 1;
            }
            codewords.extend_from_slice(&x);
        }
    }
    let codebook = Codebook::new(
        config.n,
        config.m1,
        config.m2,
        config.params.power(),
        codewords,
    )?;
    Ok(BuiltCodebook { codebook, rescaled })
}

/// Joint nearest-neighbor decoding at receiver 1: the pair minimizing
/// `||y1 - x(w1, w2)||^2`, ties to the lexicographically smallest pair.
pub fn decode_rx1(y1: &[f64], codebook: &Codebook) -> (usize, usize) {
    debug_assert_eq!(y1.len(), codebook.n());
    let mut best = (1, 1);
    let mut best_dist = f64::INFINITY;
    for w1 in 1..=codebook.m1() {
        for w2 in 1..=codebook.m2() {
            let x = codebook.codeword(w1, w2);
            let mut d = 0.0;
            for k in 0..codebook.n() {
                let e = y1[k] - x[k];
                d += e * e;
            }
            if d < best_dist {
                best_dist = d;
                best = (w1, w2);
            }
        }
    }
    best
}

fn check_codebook_config(codebook: &Codebook, config: &SuperpositionConfig) -> Result<()> {
    if codebook.n() != config.n
        || codebook.m1() != config.m1
        || codebook.m2() != config.m2
        || codebook.power() != config.params.power()
    {
        return Err(Error::domain(
            "codebook dimensions or power do not match the config",
        ));
    }
    // Seed spot-check: regenerate codeword (1, 1) and compare.
    let clouds = cloud_centers(config);
    let mut rng = CounterRng::new(config.seed, config.satellite_stream(1, 1));
    let sat_std = config.satellite_std();
    let mut x: Vec<f64> = clouds[0]
        .iter()
        .map(|&u| u + sat_std * rng.standard_normal())
        .collect();
    let cap = config.n as f64 * config.params.power();
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq > cap {
        let scale = (cap / norm_sq).sqrt();
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
    let stored = codebook.codeword(1, 1);
    if x.iter().zip(stored).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::domain(
            "codebook was not built from this config (seed mismatch)",
        ));
    }
    Ok(())
}

fn nearest_cloud(y2: &[f64], clouds: &[Vec<f64>]) -> usize {
    let mut best = 1;
    let mut best_dist = f64::INFINITY;
    for (idx, u) in clouds.iter().enumerate() {
        let mut d = 0.0;
        for k in 0..u.len() {
            let e = y2[k] - u[k];
            d += e * e;
        }
        if d < best_dist {
            best_dist = d;
            best = idx + 1;
        }
    }
    best
}

/// Cloud-center nearest-neighbor decoding at receiver 2.
pub fn decode_rx2(
    y2: &[f64],
    codebook: &Codebook,
    config: &SuperpositionConfig,
) -> Result<usize> {
    if y2.len() != config.n {
        return Err(Error::domain(format!(
            "observation length {} does not match blocklength {}",
            y2.len(),
            config.n
        )));
    }
    check_codebook_config(codebook, config)?;
    Ok(nearest_cloud(y2, &cloud_centers(config)))
}

/// Error rates of a code under its simulation decoders.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimResult {
    pub trials: u64,
    pub err_rx1: f64,
    pub err_rx2: f64,
    pub err_joint: f64,
    pub wilson_ci_halfwidth: f64,
    /// Max over message pairs of the per-pair error frequency; `None` when
    /// trials are too few to stratify (fewer than 10 per pair).
    pub max_error_est: Option<f64>,
}

#[derive(Default)]
struct ErrAcc {
    e1: u64,
    e2: u64,
    ej: u64,
    per_pair: Vec<(u64, u64)>, // (errors, trials) per message pair
}

/// Monte Carlo error rates: each trial draws a message pair (stratified
/// round-robin when `trials >= 10 * m1 * m2`, else uniform), transmits its
/// codeword, and decodes both receivers.
pub fn estimate_error_probabilities(
    codebook: &Codebook,
    config: &SuperpositionConfig,
    trials: u64,
    rng: &CounterRng,
) -> Result<SimResult> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "trials must be at least {MIN_TRIALS}, got {trials}"
        )));
    }
    check_codebook_config(codebook, config)?;
    let clouds = cloud_centers(config);
    let pairs = codebook.num_pairs();
    let stratified = trials >= 10 * pairs as u64;
    let acc = parallel_reduce(
        trials,
        |t, acc: &mut ErrAcc| {
            if acc.per_pair.is_empty() {
                acc.per_pair = vec![(0, 0); pairs];
            }
            let mut stream = rng.substream(t);
            let pair = if stratified {
                (t % pairs as u64) as usize
            } else {
                stream.uniform_index(pairs)
            };
            let w1 = pair / codebook.m2() + 1;
            let w2 = pair % codebook.m2() + 1;
            let x = codebook.codeword(w1, w2);
            let (y1, y2) = sample_channel(x, &config.params, &mut stream);
            let dec1 = decode_rx1(&y1, codebook).0;
            let dec2 = nearest_cloud(&y2, &clouds);
            let e1 = dec1 != w1;
            let e2 = dec2 != w2;
            acc.e1 += e1 as u64;
            acc.e2 += e2 as u64;
            acc.ej += (e1 || e2) as u64;
            acc.per_pair[pair].0 += (e1 || e2) as u64;
            acc.per_pair[pair].1 += 1;
        },
        |a, b| {
            a.e1 += b.e1;
            a.e2 += b.e2;
            a.ej += b.ej;
            if a.per_pair.is_empty() {
                a.per_pair = b.per_pair;
            } else if !b.per_pair.is_empty() {
                for (x, y) in a.per_pair.iter_mut().zip(&b.per_pair) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
            }
        },
    );
    debug_assert!(acc.ej >= acc.e1.max(acc.e2) && acc.ej <= acc.e1 + acc.e2);
    let t = trials as f64;
    let max_error_est = if stratified {
        acc.per_pair
            .iter()
            .map(|&(e, n)| if n == 0 { 0.0 } else { e as f64 / n as f64 })
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    } else {
        None
    };
    Ok(SimResult {
        trials,
        err_rx1: acc.e1 as f64 / t,
        err_rx2: acc.e2 as f64 / t,
        err_joint: acc.ej as f64 / t,
        wilson_ci_halfwidth: wilson_halfwidth(acc.ej, trials),
        max_error_est,
    })
}

/// One cell of a phase-transition scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub scale: f64,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub err_rx1: f64,
    pub err_rx2: f64,
    pub err_joint: f64,
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub warnings: Vec<String>,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("scale,n,m1,m2,err_rx1,err_rx2,err_joint,ci_halfwidth\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.scale, r.n, r.m1, r.m2, r.err_rx1, r.err_rx2, r.err_joint, r.ci_halfwidth
            ));
        }
        out
    }
}

/// Sweeps message sizes `M_i = max(1, round(exp(n s r_i)))` over rate scales
/// `s` and blocklengths `n`, with `(r1, r2)` the boundary point at `alpha`.
/// Infeasible cells (mixture cap exceeded) are skipped with a warning.
pub fn phase_transition_scan(
    params: &ChannelParams,
    alpha: PowerSplit,
    scale_factors: &[f64],
    n_list: &[usize],
    trials: u64,
    seed: u64,
) -> Result<ScanTable> {
    if scale_factors.is_empty() || n_list.is_empty() {
        return Err(Error::domain("scan needs at least one scale and one n"));
    }
    if scale_factors.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
        return Err(Error::domain("scale factors must be finite and nonnegative"));
    }
    let rate = boundary_point(params, alpha);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut cell = 0u64;
    for &s in scale_factors {
        for &n in n_list {
            cell += 1;
            let m1f = (n as f64 * s * rate.r1).exp().round().max(1.0);
            let m2f = (n as f64 * s * rate.r2).exp().round().max(1.0);
            if !(m1f.is_finite() && m2f.is_finite())
                || m1f * m2f > MAX_CODEBOOK_PAIRS as f64
            {
                warnings.push(format!(
                    "skipped scale={s} n={n}: m1*m2 = {} exceeds cap {MAX_CODEBOOK_PAIRS}",
                    m1f * m2f
                ));
                continue;
            }
            let (m1, m2) = (m1f as usize, m2f as usize);
            let cell_seed = CounterRng::new(seed, cell).next_u64();
            let config = SuperpositionConfig::new(
                *params,
                n,
                m1,
                m2,
                alpha,
                SuperpositionConfig::default_power_margin(params.power(), n),
                cell_seed,
            )?;
            let built = build_superposition_codebook(&config)?;
            let sim = estimate_error_probabilities(
                &built.codebook,
                &config,
                trials,
                &CounterRng::new(cell_seed, MARGINAL_STREAM_BASE),
            )?;
            rows.push(ScanRow {
                scale: s,
                n,
                m1,
                m2,
                err_rx1: sim.err_rx1,
                err_rx2: sim.err_rx2,
                err_joint: sim.err_joint,
                ci_halfwidth: sim.wilson_ci_halfwidth,
            });
        }
    }
    Ok(ScanTable { rows, warnings })
}

/// Maximum-likelihood decision for receiver `i` from the per-pair
/// log-likelihood table: joint argmax for receiver 1, mixture (over `w1`)
/// argmax for receiver 2. First maximal index wins, so ties break to the
/// lexicographically smallest message.
fn ml_decide_from_liks(log_liks: &[f64], receiver: Receiver, m1: usize, m2: usize) -> usize {
    match receiver {
        Receiver::Rx1 => {
            let mut best = 0;
            for (idx, &l) in log_liks.iter().enumerate() {
                if l > log_liks[best] {
                    best = idx;
                }
            }
            best / m2 + 1
        }
        Receiver::Rx2 => {
            let mut best = 1;
            let mut best_val = f64::NEG_INFINITY;
            let mut col = vec![0.0; m1];
            for w2 in 0..m2 {
                for w1 in 0..m1 {
                    col[w1] = log_liks[w1 * m2 + w2];
                }
                let v = crate::channel::log_sum_exp_weighted(&col, &vec![0.0; m1])
                    .expect("nonempty column");
                if v > best_val {
                    best_val = v;
                    best = w2 + 1;
                }
            }
            best
        }
    }
}

/// ML decision for receiver `i` on observation `y`.
pub fn ml_decide(
    y: &[f64],
    receiver: Receiver,
    codebook: &Codebook,
    params: &ChannelParams,
) -> Result<usize> {
    let liks = pairwise_log_likelihoods(y, codebook, params.noise_variance(receiver))?;
    Ok(ml_decide_from_liks(&liks, receiver, codebook.m1(), codebook.m2()))
}

fn message_of_pair(pair: usize, m2: usize, receiver: Receiver) -> usize {
    match receiver {
        Receiver::Rx1 => pair / m2 + 1,
        Receiver::Rx2 => pair % m2 + 1,
    }
}

#[derive(Default)]
struct CondAcc {
    errors: Vec<u64>,
    lhs: Vec<u64>,
    density: Vec<Moments>,
}

struct ConditionalStats {
    trials_per_pair: u64,
    errors: Vec<u64>,
    lhs: Option<Vec<u64>>,
    density: Vec<Moments>,
}

/// Per message pair: ML-decoder error counts, information-density moments,
/// and (when `gammas` is given) counts of the event
/// `i(w_i; Y) <= log M_i - gamma(w_I)`, all under `p(y | w_I)`.
fn conditional_pass(
    codebook: &Codebook,
    params: &ChannelParams,
    receiver: Receiver,
    trials_per_pair: u64,
    gammas: Option<&[f64]>,
    rng: &CounterRng,
) -> ConditionalStats {
    let pairs = codebook.num_pairs();
    let m2 = codebook.m2();
    let log_m = (codebook.message_size(receiver) as f64).ln();
    let nv = params.noise_variance(receiver);
    let acc = parallel_reduce(
        trials_per_pair * pairs as u64,
        |t, acc: &mut CondAcc| {
            if acc.errors.is_empty() {
                acc.errors = vec![0; pairs];
                acc.lhs = vec![0; pairs];
                acc.density = vec![Moments::new(); pairs];
            }
            let pair = (t / trials_per_pair) as usize;
            let w1 = pair / m2 + 1;
            let w2 = pair % m2 + 1;
            let w_i = message_of_pair(pair, m2, receiver);
            let mut stream = rng.substream(t);
            let y = sample_receiver_output(codebook.codeword(w1, w2), params, receiver, &mut stream);
            let liks = pairwise_log_likelihoods(&y, codebook, nv).expect("validated inputs");
            let decided = ml_decide_from_liks(&liks, receiver, codebook.m1(), m2);
            if decided != w_i {
                acc.errors[pair] += 1;
            }
            let dens =
                information_density_from_log_likelihoods(&liks, w_i, receiver, codebook)
                    .expect("validated inputs");
            acc.density[pair].push(dens);
            if let Some(g) = gammas {
                if dens <= log_m - g[pair] {
                    acc.lhs[pair] += 1;
                }
            }
        },
        |a, b| {
            if a.errors.is_empty() {
                *a = b;
            } else if !b.errors.is_empty() {
                for i in 0..a.errors.len() {
                    a.errors[i] += b.errors[i];
                    a.lhs[i] += b.lhs[i];
                    a.density[i].merge(&b.density[i]);
                }
            }
        },
    );
    ConditionalStats {
        trials_per_pair,
        errors: acc.errors,
        lhs: gammas.map(|_| acc.lhs),
        density: acc.density,
    }
}

impl ConditionalStats {
    /// Max per-pair error rate inflated by a 3-sigma Wilson halfwidth,
    /// clamped to 1.
    fn inflated_max_error(&self) -> f64 {
        self.errors
            .iter()
            .map(|&e| {
                e as f64 / self.trials_per_pair as f64
                    + wilson_halfwidth_z(e, self.trials_per_pair, 3.0)
            })
            .fold(0.0, f64::max)
            .min(1.0)
    }

    fn max_error(&self) -> f64 {
        self.errors
            .iter()
            .map(|&e| e as f64 / self.trials_per_pair as f64)
            .fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct CellMoments(Vec<Moments>);

/// Per message pair `(w_i, w_j)`: MC moments of
/// `M1 M2 1{decoder(Y) = w_i} p(w_j | w_i, Y)` with `Y` drawn from the
/// output marginal. The per-pair mean estimates the decoding-region integral
/// of Lemma-style converse displays; the grand mean is 1 by construction.
fn marginal_pass(
    codebook: &Codebook,
    params: &ChannelParams,
    receiver: Receiver,
    trials: u64,
    rng: &CounterRng,
    stream_base: u64,
) -> Vec<Moments> {
    let pairs = codebook.num_pairs();
    let m1 = codebook.m1();
    let m2 = codebook.m2();
    let nv = params.noise_variance(receiver);
    let total = pairs as f64;
    let acc = parallel_reduce(
        trials,
        |t, acc: &mut CellMoments| {
            if acc.0.is_empty() {
                acc.0 = vec![Moments::new(); pairs];
            }
            let mut stream = rng.substream(stream_base + t);
            let a = stream.uniform_index(m1) + 1;
            let b = stream.uniform_index(m2) + 1;
            let y = sample_receiver_output(codebook.codeword(a, b), params, receiver, &mut stream);
            let liks = pairwise_log_likelihoods(&y, codebook, nv).expect("validated inputs");
            let decided = ml_decide_from_liks(&liks, receiver, m1, m2);
            // Log-domain posterior over the co-message given w_i = decided.
            let (post, cell_of): (Vec<f64>, Box<dyn Fn(usize) -> usize>) = match receiver {
                Receiver::Rx1 => {
                    let row = &liks[(decided - 1) * m2..decided * m2];
                    let norm = crate::channel::log_sum_exp_weighted(row, &vec![0.0; m2])
                        .expect("nonempty row");
                    (
                        row.iter().map(|l| (l - norm).exp()).collect(),
                        Box::new(move |wj| (decided - 1) * m2 + wj),
                    )
                }
                Receiver::Rx2 => {
                    let col: Vec<f64> = (0..m1).map(|w1| liks[w1 * m2 + (decided - 1)]).collect();
                    let norm = crate::channel::log_sum_exp_weighted(&col, &vec![0.0; m1])
                        .expect("nonempty column");
                    (
                        col.iter().map(|l| (l - norm).exp()).collect(),
                        Box::new(move |wj| wj * m2 + (decided - 1)),
                    )
                }
            };
            let mut values = vec![0.0; pairs];
            for (wj, &p) in post.iter().enumerate() {
                values[cell_of(wj)] = total * p;
            }
            for (cell, &v) in values.iter().enumerate() {
                acc.0[cell].push(v);
            }
        },
        |a, b| {
            if a.0.is_empty() {
                a.0 = b.0;
            } else if !b.0.is_empty() {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    x.merge(y);
                }
            }
        },
    );
    acc.0
}

fn check_verify_regime(codebook: &Codebook, trials: u64) -> Result<()> {
    if codebook.n() > VERIFY_MAX_N || codebook.num_pairs() > VERIFY_MAX_PAIRS {
        return Err(Error::domain(format!(
            "exact verification needs n <= {VERIFY_MAX_N} and m1*m2 <= {VERIFY_MAX_PAIRS}, got n = {}, m1*m2 = {}",
            codebook.n(),
            codebook.num_pairs()
        )));
    }
    if trials < VERIFY_MIN_TRIALS {
        return Err(Error::domain(format!(
            "verification needs at least {VERIFY_MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// Measured maximal error probabilities under the ML decoders, stratified
/// evenly over message pairs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaxErrorReport {
    pub trials_per_pair: u64,
    pub rx1_max_error: f64,
    pub rx2_max_error: f64,
    /// 3-sigma inflated variants, clamped to 1.
    pub rx1_inflated: f64,
    pub rx2_inflated: f64,
}

impl MaxErrorReport {
    pub fn eps_used(&self) -> f64 {
        self.rx1_inflated.max(self.rx2_inflated)
    }
}

pub fn measure_max_error(
    codebook: &Codebook,
    params: &ChannelParams,
    trials: u64,
    rng: &CounterRng,
) -> Result<MaxErrorReport> {
    let pairs = codebook.num_pairs() as u64;
    let tpp = trials / pairs;
    if tpp < 10 {
        return Err(Error::domain(format!(
            "need at least 10 trials per message pair, got {tpp}"
        )));
    }
    let c1 = conditional_pass(codebook, params, Receiver::Rx1, tpp, None, rng);
    let c2 = conditional_pass(
        codebook,
        params,
        Receiver::Rx2,
        tpp,
        None,
        &rng.substream(SIDE_STREAM_BASE),
    );
    Ok(MaxErrorReport {
        trials_per_pair: tpp,
        rx1_max_error: c1.max_error(),
        rx2_max_error: c2.max_error(),
        rx1_inflated: c1.inflated_max_error(),
        rx2_inflated: c2.inflated_max_error(),
    })
}

/// Full information-density moments under the code's joint distribution
/// (uniform message pair, channel output of `receiver`).
pub fn measure_information_density(
    codebook: &Codebook,
    params: &ChannelParams,
    receiver: Receiver,
    trials: u64,
    rng: &CounterRng,
) -> Result<Moments> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "trials must be at least {MIN_TRIALS}, got {trials}"
        )));
    }
    let m1 = codebook.m1();
    let m2 = codebook.m2();
    let nv = params.noise_variance(receiver);
    Ok(parallel_reduce(
        trials,
        |t, acc: &mut Moments| {
            let mut stream = rng.substream(t);
            let a = stream.uniform_index(m1) + 1;
            let b = stream.uniform_index(m2) + 1;
            let y = sample_receiver_output(codebook.codeword(a, b), params, receiver, &mut stream);
            let liks = pairwise_log_likelihoods(&y, codebook, nv).expect("validated inputs");
            let w_i = match receiver {
                Receiver::Rx1 => a,
                Receiver::Rx2 => b,
            };
            let dens = information_density_from_log_likelihoods(&liks, w_i, receiver, codebook)
                .expect("validated inputs");
            acc.push(dens);
        },
        |a, b| a.merge(&b),
    ))
}

/// Monte Carlo estimate of `I(W_i; Y_i^n)` in nats with its standard error.
pub fn estimate_mutual_information(
    codebook: &Codebook,
    receiver: Receiver,
    params: &ChannelParams,
    trials: u64,
    rng: &CounterRng,
) -> Result<(f64, f64)> {
    let acc = measure_information_density(codebook, params, receiver, trials, rng)?;
    Ok((acc.mean(), acc.mean_std_error()))
}

/// Outcome of the empirical capacity-region membership test for the
/// per-symbol mutual-information pair of a code.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MembershipReport {
    pub inside: bool,
    pub witness: Option<PowerSplit>,
    pub rate: RatePair,
    pub tol: f64,
    pub mi1: f64,
    pub mi2: f64,
    pub se1: f64,
    pub se2: f64,
}

/// Estimates `(I(W1;Y1^n)/n, I(W2;Y2^n)/n)` and tests membership in the
/// capacity region with a combined-standard-error tolerance.
pub fn check_weak_converse_membership(
    codebook: &Codebook,
    params: &ChannelParams,
    trials: u64,
    rng: &CounterRng,
) -> Result<MembershipReport> {
    let (mi1, se1) = estimate_mutual_information(codebook, Receiver::Rx1, params, trials, rng)?;
    let (mi2, se2) = estimate_mutual_information(
        codebook,
        Receiver::Rx2,
        params,
        trials,
        &rng.substream(SIDE_STREAM_BASE),
    )?;
    let n = codebook.n() as f64;
    let rate = RatePair::new((mi1 / n).max(0.0), (mi2 / n).max(0.0))?;
    let tol = 3.0 * (se1 + se2) / n;
    let witness = membership_witness(params, rate, tol);
    Ok(MembershipReport {
        inside: witness.is_some(),
        witness,
        rate,
        tol,
        mi1,
        mi2,
        se1,
        se2,
    })
}

/// Per-message-pair audit row for the information-spectrum converse bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub w1: usize,
    pub w2: usize,
    pub gamma: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub integral_est: f64,
    pub integral_se: f64,
    pub indicator: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub receiver: Receiver,
    pub trials: u64,
    pub eps_used: f64,
    pub rows: Vec<Lemma1Row>,
    pub pass: bool,
}

/// Audits, per message pair, the bound
/// `Pr{i(w_i; Y) <= log M_i - gamma} <= n e^{-gamma} + eps + 1{integral > n}`
/// where the integral is `M1 M2 int_{D_i(w_i)} p_Y p(w_j | w_i, y) dy`, the
/// decoding regions are those of the module's ML decoders, and `eps` is the
/// code's measured maximal error (3-sigma inflated).
pub fn verify_lemma1(
    codebook: &Codebook,
    params: &ChannelParams,
    receiver: Receiver,
    gammas: &[f64],
    trials: u64,
    rng: &CounterRng,
) -> Result<Lemma1Report> {
    check_verify_regime(codebook, trials)?;
    let pairs = codebook.num_pairs();
    if gammas.len() != pairs {
        return Err(Error::domain(format!(
            "gamma table has {} entries, expected {pairs}",
            gammas.len()
        )));
    }
    let n = codebook.n() as f64;
    let tpp = trials / pairs as u64;
    let cond = conditional_pass(codebook, params, receiver, tpp, Some(gammas), rng);
    let ints = marginal_pass(codebook, params, receiver, trials, rng, MARGINAL_STREAM_BASE);
    let eps_used = cond.inflated_max_error();
    let lhs_counts = cond.lhs.as_ref().expect("gammas were provided");
    let m2 = codebook.m2();
    let mut rows = Vec::with_capacity(pairs);
    let mut pass = true;
    for pair in 0..pairs {
        let lhs = lhs_counts[pair] as f64 / tpp as f64;
        let lhs_se = wilson_halfwidth_z(lhs_counts[pair], tpp, 1.0);
        let est = ints[pair].mean();
        let se = ints[pair].mean_std_error();
        // Indicator 1 unless the integral is confidently <= n.
        let indicator = est + 3.0 * se > n;
        let rhs = n * (-gammas[pair]).exp() + eps_used + indicator as u64 as f64;
        let row_pass = lhs <= rhs + 3.0 * lhs_se + 1e-12;
        pass &= row_pass;
        rows.push(Lemma1Row {
            w1: pair / m2 + 1,
            w2: pair % m2 + 1,
            gamma: gammas[pair],
            lhs,
            lhs_se,
            rhs,
            integral_est: est,
            integral_se: se,
            indicator,
            pass: row_pass,
        });
    }
    Ok(Lemma1Report {
        receiver,
        trials,
        eps_used,
        rows,
        pass,
    })
}

/// Per-message thresholds `log M_i - mean - sqrt((2/(1-eps)) var)` with the
/// mean and variance of the information density measured under `p(y | w_I)`.
pub fn chebyshev_gammas(
    codebook: &Codebook,
    params: &ChannelParams,
    receiver: Receiver,
    eps: f64,
    trials: u64,
    rng: &CounterRng,
) -> Result<Vec<f64>> {
    check_verify_regime(codebook, trials)?;
    let pairs = codebook.num_pairs() as u64;
    let cond = conditional_pass(codebook, params, receiver, trials / pairs, None, rng);
    let log_m = (codebook.message_size(receiver) as f64).ln();
    cond.density
        .iter()
        .map(|m| chebyshev_threshold(log_m, m.mean(), m.variance(), eps))
        .collect()
}

/// One side `(i, j)` of the expurgation audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpurgationSide {
    pub receiver: Receiver,
    /// Message pairs whose integral is confidently above `n`.
    pub complement_size: usize,
    pub bound: f64,
    pub integral_mean: f64,
    pub per_message_integrals: Vec<f64>,
    pub audited_members: usize,
    pub complement_ok: bool,
    pub identity_ok: bool,
    pub log_m_display_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpurgationAudit {
    pub trials: u64,
    pub eps_used: f64,
    pub sides: Vec<ExpurgationSide>,
    pub pass: bool,
}

/// Audits, for both receiver orderings, the two expurgation displays: the
/// complement count `|W \ A| <= M1 M2 / n`, the unit mean of the per-message
/// integrals, and `log M_i <= mean + sqrt((2/(1-eps)) var) + 2 log n` for
/// every confidently audited member of `A`.
pub fn verify_prop1(
    codebook: &Codebook,
    params: &ChannelParams,
    trials: u64,
    rng: &CounterRng,
) -> Result<ExpurgationAudit> {
    check_verify_regime(codebook, trials)?;
    let pairs = codebook.num_pairs();
    let n = codebook.n() as f64;
    let tpp = trials / pairs as u64;

    let cond1 = conditional_pass(codebook, params, Receiver::Rx1, tpp, None, rng);
    let cond2 = conditional_pass(
        codebook,
        params,
        Receiver::Rx2,
        tpp,
        None,
        &rng.substream(SIDE_STREAM_BASE),
    );
    let eps_used = cond1.inflated_max_error().max(cond2.inflated_max_error());
    let floor = min_blocklength(eps_used.min(1.0 - 1e-12))?;
    if codebook.n() < floor as usize {
        return Err(Error::BlocklengthFloor {
            n: codebook.n() as u64,
            floor,
        });
    }

    let mut sides = Vec::with_capacity(2);
    let mut pass = true;
    for (receiver, cond, base) in [
        (Receiver::Rx1, &cond1, MARGINAL_STREAM_BASE),
        (Receiver::Rx2, &cond2, MARGINAL_STREAM_BASE + SIDE_STREAM_BASE),
    ] {
        let ints = marginal_pass(codebook, params, receiver, trials, rng, base);
        let means: Vec<f64> = ints.iter().map(|m| m.mean()).collect();
        let complement_size = ints
            .iter()
            .filter(|m| m.mean() - 3.0 * m.mean_std_error() > n)
            .count();
        let bound = pairs as f64 / n;
        let complement_ok = (complement_size as f64) <= bound.ceil();

        let integral_mean = means.iter().sum::<f64>() / pairs as f64;
        let mean_se =
            ints.iter().map(|m| m.mean_std_error().powi(2)).sum::<f64>().sqrt() / pairs as f64;
        let identity_ok = (integral_mean - 1.0).abs() <= 3.0 * mean_se + 1e-9;

        let log_m = (codebook.message_size(receiver) as f64).ln();
        let mut audited_members = 0;
        let mut log_m_display_ok = true;
        for (pair, m) in ints.iter().enumerate() {
            if m.mean() + 3.0 * m.mean_std_error() <= n {
                audited_members += 1;
                let d = &cond.density[pair];
                let mean_hi = d.mean() + 3.0 * d.mean_std_error();
                let var_hi = d.variance() + 3.0 * d.variance_std_error();
                let ceiling =
                    mean_hi + (2.0 / (1.0 - eps_used) * var_hi).sqrt() + 2.0 * n.ln();
                log_m_display_ok &= log_m <= ceiling + 1e-12;
            }
        }
        let side_pass = complement_ok && identity_ok && log_m_display_ok;
        pass &= side_pass;
        sides.push(ExpurgationSide {
            receiver,
            complement_size,
            bound,
            integral_mean,
            per_message_integrals: means,
            audited_members,
            complement_ok,
            identity_ok,
            log_m_display_ok,
            pass: side_pass,
        });
    }
    Ok(ExpurgationAudit {
        trials,
        eps_used,
        sides,
        pass,
    })
}
