//! Channel parameterization, Gaussian densities, channel sampling, codebook
//! representation, and numerically stable information-density computation.
//!
//! The channel is the two-receiver degraded Gaussian broadcast channel:
//! `Y1 = X + Z1`, `Y2 = X + Z2` with independent zero-mean Gaussian noises
//! of variances `sigma1_sq <= sigma2_sq`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;
use crate::{Error, Result};

/// Exact-mixture cap on `m1 * m2`. Mixture marginals are full sums over the
/// codebook, so the pair count is bounded to keep them exact and affordable.
pub const MAX_CODEBOOK_PAIRS: usize = 1 << 16;

/// The triple `(P, sigma1^2, sigma2^2)` defining the degraded Gaussian BC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    power_p: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
}

impl ChannelParams {
    pub fn new(power_p: f64, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self> {
        if !(power_p.is_finite() && power_p > 0.0) {
            return Err(Error::domain(format!("power P must be positive, got {power_p}")));
        }
        if !(sigma1_sq.is_finite() && sigma1_sq > 0.0) {
            return Err(Error::domain(format!(
                "sigma1_sq must be positive, got {sigma1_sq}"
            )));
        }
        if !(sigma2_sq.is_finite() && sigma2_sq >= sigma1_sq) {
            return Err(Error::domain(format!(
                "sigma2_sq must satisfy sigma2_sq >= sigma1_sq, got {sigma2_sq} < {sigma1_sq}"
            )));
        }
        Ok(ChannelParams {
            power_p,
            sigma1_sq,
            sigma2_sq,
        })
    }

    pub fn power(&self) -> f64 {
        self.power_p
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.sigma1_sq
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.sigma2_sq
    }

    pub fn noise_variance(&self, receiver: Receiver) -> f64 {
        match receiver {
            Receiver::Rx1 => self.sigma1_sq,
            Receiver::Rx2 => self.sigma2_sq,
        }
    }
}

/// Which of the two receivers a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    Rx1,
    Rx2,
}

impl Receiver {
    pub fn index(&self) -> usize {
        match self {
            Receiver::Rx1 => 1,
            Receiver::Rx2 => 2,
        }
    }
}

impl std::fmt::Display for Receiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rx{}", self.index())
    }
}

/// Header of the serialized codebook format.
#[derive(Debug, Serialize, Deserialize)]
struct CodebookHeader {
    n: usize,
    m1: usize,
    m2: usize,
    power_p: f64,
}

/// An explicit mapping `(w1, w2) -> x^n` under the peak power constraint
/// `||x||^2 <= n * P`. Message indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    m1: usize,
    m2: usize,
    power_p: f64,
    // Row-major: codeword (w1, w2) at offset ((w1-1)*m2 + (w2-1)) * n.
    codewords: Vec<f64>,
}

// Relative slack for the peak-power validation; rescaled codewords land on
// the constraint boundary up to rounding.
const PEAK_POWER_SLACK: f64 = 1e-9;

impl Codebook {
    pub fn new(n: usize, m1: usize, m2: usize, power_p: f64, codewords: Vec<f64>) -> Result<Self> {
        if n == 0 || m1 == 0 || m2 == 0 {
            return Err(Error::domain("n, m1 and m2 must all be positive"));
        }
        if !(power_p.is_finite() && power_p > 0.0) {
            return Err(Error::domain(format!("power P must be positive, got {power_p}")));
        }
        let pairs = m1
            .checked_mul(m2)
            .ok_or_else(|| Error::domain("m1 * m2 overflows"))?;
        if pairs > MAX_CODEBOOK_PAIRS {
            return Err(Error::domain(format!(
                "m1 * m2 = {pairs} exceeds the exact-mixture cap {MAX_CODEBOOK_PAIRS}"
            )));
        }
        let expected = pairs
            .checked_mul(n)
            .ok_or_else(|| Error::domain("codebook size overflows"))?;
        if codewords.len() != expected {
            return Err(Error::domain(format!(
                "codeword table has {} entries, expected {expected}",
                codewords.len()
            )));
        }
        let cap = n as f64 * power_p * (1.0 + PEAK_POWER_SLACK);
        for (idx, word) in codewords.chunks_exact(n).enumerate() {
            let norm_sq: f64 = word.iter().map(|x| x * x).sum();
            if !norm_sq.is_finite() || norm_sq > cap {
                return Err(Error::domain(format!(
                    "codeword {idx} violates the peak power constraint: ||x||^2 = {norm_sq} > nP = {}",
                    n as f64 * power_p
                )));
            }
        }
        Ok(Codebook {
            n,
            m1,
            m2,
            power_p,
            codewords,
        })
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

    pub fn num_pairs(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn power(&self) -> f64 {
        self.power_p
    }

    pub fn message_size(&self, receiver: Receiver) -> usize {
        match receiver {
            Receiver::Rx1 => self.m1,
            Receiver::Rx2 => self.m2,
        }
    }

    /// Codeword for 1-based message pair `(w1, w2)`.
    pub fn codeword(&self, w1: usize, w2: usize) -> &[f64] {
        assert!(w1 >= 1 && w1 <= self.m1, "w1 = {w1} out of range");
        assert!(w2 >= 1 && w2 <= self.m2, "w2 = {w2} out of range");
        let off = ((w1 - 1) * self.m2 + (w2 - 1)) * self.n;
        &self.codewords[off..off + self.n]
    }

    /// Serializes as a single-line JSON header `{n, m1, m2, power_p}`
    /// terminated by a newline, followed by the row-major codeword table as
    /// little-endian 64-bit floats.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = CodebookHeader {
            n: self.n,
            m1: self.m1,
            m2: self.m2,
            power_p: self.power_p,
        };
        let mut line = serde_json::to_string(&header)
            .map_err(|e| Error::Format(format!("header encode: {e}")))?;
        line.push('\n');
        out.write_all(line.as_bytes())?;
        let mut buf = Vec::with_capacity(self.codewords.len() * 8);
        for &x in &self.codewords {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    /// Parses the format written by [`Codebook::write_to`]. Input is
    /// untrusted: sizes are validated before any large allocation and the
    /// payload length must match the header exactly.
    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        const MAX_HEADER: usize = 4096;
        let mut header_bytes = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            let got = input.read(&mut byte)?;
            if got == 0 {
                return Err(Error::Format("missing newline after header".into()));
            }
            if byte[0] == b'\n' {
                break;
            }
            header_bytes.push(byte[0]);
            if header_bytes.len() > MAX_HEADER {
                return Err(Error::Format("header exceeds 4096 bytes".into()));
            }
        }
        let header: CodebookHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Format(format!("header decode: {e}")))?;
        if header.n == 0 || header.m1 == 0 || header.m2 == 0 {
            return Err(Error::Format("n, m1, m2 must be positive".into()));
        }
        let pairs = header
            .m1
            .checked_mul(header.m2)
            .filter(|&p| p <= MAX_CODEBOOK_PAIRS)
            .ok_or_else(|| Error::Format("m1 * m2 exceeds the exact-mixture cap".into()))?;
        let values = pairs
            .checked_mul(header.n)
            .ok_or_else(|| Error::Format("table size overflows".into()))?;
        let expected_bytes = (values as u64)
            .checked_mul(8)
            .ok_or_else(|| Error::Format("table size overflows".into()))?;
        // Bounded read: allocation grows only with actual input.
        let mut payload = Vec::new();
        input
            .by_ref()
            .take(expected_bytes + 1)
            .read_to_end(&mut payload)?;
        if payload.len() as u64 != expected_bytes {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {expected_bytes}",
                payload.len()
            )));
        }
        let codewords: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Codebook::new(header.n, header.m1, header.m2, header.power_p, codewords)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Codebook::read_from(std::io::BufReader::new(file))
    }
}

/// Log-density (nats) of `n` i.i.d. Gaussian coordinates:
/// `-(n/2) ln(2 pi v) - sum_k (z_k - mean)^2 / (2 v)`.
///
/// The quadratic term is summed in index-ascending order so results are
/// bit-reproducible.
pub fn gaussian_log_density(z: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::domain(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if z.is_empty() {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let n = z.len() as f64;
    let mut quad = 0.0;
    for &zk in z {
        let d = zk - mean;
        quad += d * d;
    }
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI * variance).ln() - quad / (2.0 * variance))
}

/// Sends `x` through both channel branches: `y_i = x + z_i` with `z_i`
/// i.i.d. zero-mean Gaussian of variance `sigma_i^2`, `z1` independent of
/// `z2`. Deterministic given the rng state.
pub fn sample_channel(
    x: &[f64],
    params: &ChannelParams,
    rng: &mut CounterRng,
) -> (Vec<f64>, Vec<f64>) {
    let s1 = params.sigma1_sq().sqrt();
    let s2 = params.sigma2_sq().sqrt();
    let y1: Vec<f64> = x.iter().map(|&xk| xk + s1 * rng.standard_normal()).collect();
    let y2: Vec<f64> = x.iter().map(|&xk| xk + s2 * rng.standard_normal()).collect();
    (y1, y2)
}

/// Receiver-`i` output only; half the draws of [`sample_channel`] when the
/// other branch is not needed.
pub fn sample_receiver_output(
    x: &[f64],
    params: &ChannelParams,
    receiver: Receiver,
    rng: &mut CounterRng,
) -> Vec<f64> {
    let s = params.noise_variance(receiver).sqrt();
    x.iter().map(|&xk| xk + s * rng.standard_normal()).collect()
}

/// Stable `log sum_i exp(log_terms[i] + log_weights[i])` by max-shift, with
/// index-ascending summation. Returns `-inf` when every term is `-inf`.
pub fn log_sum_exp_weighted(log_terms: &[f64], log_weights: &[f64]) -> Result<f64> {
    if log_terms.len() != log_weights.len() || log_terms.is_empty() {
        return Err(Error::domain(format!(
            "length mismatch: {} terms vs {} weights",
            log_terms.len(),
            log_weights.len()
        )));
    }
    let mut max = f64::NEG_INFINITY;
    for i in 0..log_terms.len() {
        let v = log_terms[i] + log_weights[i];
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sum = 0.0;
    for i in 0..log_terms.len() {
        sum += (log_terms[i] + log_weights[i] - max).exp();
    }
    Ok(max + sum.ln())
}

/// Per-pair log-likelihoods `L(w1, w2) = log N(y - x(w1, w2); 0, sigma_i^2)`
/// in row-major `(w1, w2)` order.
pub fn pairwise_log_likelihoods(
    y: &[f64],
    codebook: &Codebook,
    noise_variance: f64,
) -> Result<Vec<f64>> {
    if y.len() != codebook.n() {
        return Err(Error::domain(format!(
            "observation length {} does not match blocklength {}",
            y.len(),
            codebook.n()
        )));
    }
    let n = codebook.n();
    let mut out = Vec::with_capacity(codebook.num_pairs());
    let mut diff = vec![0.0; n];
    for w1 in 1..=codebook.m1() {
        for w2 in 1..=codebook.m2() {
            let x = codebook.codeword(w1, w2);
            for k in 0..n {
                diff[k] = y[k] - x[k];
            }
            out.push(gaussian_log_density(&diff, 0.0, noise_variance)?);
        }
    }
    Ok(out)
}

/// Information density `log p_{Y_i^n|W_i}(y|w_i) / p_{Y_i^n}(y)` in nats.
///
/// Both the conditional and the marginal are exact uniform mixtures over the
/// codebook, evaluated through [`log_sum_exp_weighted`].
pub fn information_density(
    y: &[f64],
    w_i: usize,
    receiver: Receiver,
    codebook: &Codebook,
    params: &ChannelParams,
) -> Result<f64> {
    let log_liks = pairwise_log_likelihoods(y, codebook, params.noise_variance(receiver))?;
    information_density_from_log_likelihoods(&log_liks, w_i, receiver, codebook)
}

/// Same as [`information_density`], reusing a precomputed log-likelihood
/// table (hot loops evaluate several densities per observation).
pub fn information_density_from_log_likelihoods(
    log_liks: &[f64],
    w_i: usize,
    receiver: Receiver,
    codebook: &Codebook,
) -> Result<f64> {
    let m_i = codebook.message_size(receiver);
    if w_i < 1 || w_i > m_i {
        return Err(Error::IndexOutOfRange(format!(
            "message index {w_i} not in 1..={m_i} for {receiver}"
        )));
    }
    let m1 = codebook.m1();
    let m2 = codebook.m2();
    debug_assert_eq!(log_liks.len(), m1 * m2);

    let (cond_terms, m_j): (Vec<f64>, usize) = match receiver {
        Receiver::Rx1 => {
            let base = (w_i - 1) * m2;
            (log_liks[base..base + m2].to_vec(), m2)
        }
        Receiver::Rx2 => {
            let col: Vec<f64> = (0..m1).map(|a| log_liks[a * m2 + (w_i - 1)]).collect();
            (col, m1)
        }
    };
    let log_w_cond = vec![-(m_j as f64).ln(); m_j];
    let cond = log_sum_exp_weighted(&cond_terms, &log_w_cond)?;

    let log_w_marg = vec![-((m1 * m2) as f64).ln(); m1 * m2];
    let marg = log_sum_exp_weighted(log_liks, &log_w_marg)?;
    Ok(cond - marg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Moments;

    fn params() -> ChannelParams {
        ChannelParams::new(1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn params_reject_bad_inputs() {
        assert!(ChannelParams::new(0.0, 1.0, 2.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 2.0).is_err());
        assert!(ChannelParams::new(1.0, 2.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn log_density_standard_normal_at_origin() {
        // -0.5 ln(2 pi)
        let v = gaussian_log_density(&[0.0], 0.0, 1.0).unwrap();
        assert!((v - (-0.918_938_533_204_672_7)).abs() < 1e-9);
    }

    #[test]
    fn log_density_additive_over_coordinates() {
        let one = gaussian_log_density(&[0.0], 0.0, 1.0).unwrap();
        let two = gaussian_log_density(&[0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn log_density_zero_quadratic_term() {
        let n = 5;
        let v = 3.7;
        let z = vec![2.5; n];
        let got = gaussian_log_density(&z, 2.5, v).unwrap();
        let want = -(n as f64 / 2.0) * (2.0 * std::f64::consts::PI * v).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn log_density_rejects_bad_variance() {
        assert!(gaussian_log_density(&[0.0], 0.0, 0.0).is_err());
        assert!(gaussian_log_density(&[0.0], 0.0, -1.0).is_err());
        assert!(gaussian_log_density(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn sample_channel_degenerate_noise_tracks_input() {
        let p = ChannelParams::new(1.0, 1e-12, 1e-12).unwrap();
        let x = vec![0.3, -0.4, 0.1];
        let mut rng = CounterRng::new(5, 0);
        for _ in 0..1000 {
            let (y1, y2) = sample_channel(&x, &p, &mut rng);
            for k in 0..x.len() {
                assert!((y1[k] - x[k]).abs() < 1e-4);
                assert!((y2[k] - x[k]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn sample_channel_noise_moments() {
        // Monte Carlo moment oracle over 10^6 draws.
        let p = params();
        let x = [0.5];
        let mut rng = CounterRng::new(11, 0);
        let trials = 1_000_000u64;
        let mut acc1 = Moments::new();
        let mut acc2 = Moments::new();
        let mut cross = 0.0;
        for _ in 0..trials {
            let (y1, y2) = sample_channel(&x, &p, &mut rng);
            let z1 = y1[0] - x[0];
            let z2 = y2[0] - x[0];
            acc1.push(z1);
            acc2.push(z2);
            cross += z1 * z2;
        }
        let t = trials as f64;
        // Var(z1) = sigma1^2 within 3 standard errors of the variance estimate.
        assert!((acc1.variance() - p.sigma1_sq()).abs() <= 3.0 * acc1.variance_std_error());
        assert!((acc2.variance() - p.sigma2_sq()).abs() <= 3.0 * acc2.variance_std_error());
        // Cov(z1, z2) = 0 within 3 standard errors (SE ~ sigma1 sigma2 / sqrt(t)).
        let cov = cross / t - acc1.mean() * acc2.mean();
        let se = (p.sigma1_sq() * p.sigma2_sq() / t).sqrt();
        assert!(cov.abs() <= 3.0 * se, "cov {cov} vs se {se}");
    }

    #[test]
    fn lse_single_term() {
        assert_eq!(log_sum_exp_weighted(&[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn lse_identical_terms() {
        let a = 3.25;
        let half = 0.5f64.ln();
        let got = log_sum_exp_weighted(&[a, a], &[half, half]).unwrap();
        assert!((got - a).abs() < 1e-12);
    }

    #[test]
    fn lse_max_shift_no_overflow() {
        let got = log_sum_exp_weighted(&[-1000.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((got - (1.0 + (-1000.0f64).exp()).ln()).abs() < 1e-12);
        let big = log_sum_exp_weighted(&[1e6, 1e6 - 1.0], &[0.0, 0.0]).unwrap();
        assert!(big.is_finite());
    }

    #[test]
    fn lse_all_neg_infinity() {
        let got = log_sum_exp_weighted(&[f64::NEG_INFINITY], &[0.0]).unwrap();
        assert_eq!(got, f64::NEG_INFINITY);
    }

    #[test]
    fn lse_length_mismatch() {
        assert!(log_sum_exp_weighted(&[0.0], &[0.0, 0.0]).is_err());
        assert!(log_sum_exp_weighted(&[], &[]).is_err());
    }

    fn binary_codebook() -> Codebook {
        Codebook::new(1, 2, 1, 1.0, vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn information_density_single_message_is_zero() {
        let cb = Codebook::new(2, 1, 1, 1.0, vec![0.4, -0.3]).unwrap();
        let p = params();
        for y in [[0.0, 0.0], [1.5, -2.0]] {
            let v = information_density(&y, 1, Receiver::Rx1, &cb, &p).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn information_density_identical_codewords_is_zero() {
        let cb = Codebook::new(1, 2, 2, 1.0, vec![0.5; 4]).unwrap();
        let p = params();
        for w in 1..=2 {
            let v = information_density(&[0.7], w, Receiver::Rx1, &cb, &p).unwrap();
            assert!(v.abs() < 1e-12);
            let v = information_density(&[0.7], w, Receiver::Rx2, &cb, &p).unwrap();
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn information_density_two_term_mixture_oracle() {
        // Hand-computed: ln 2 - ln(1 + e^{-2}) at y = +1.
        let cb = binary_codebook();
        let p = ChannelParams::new(1.0, 1.0, 1.0).unwrap();
        let got = information_density(&[1.0], 1, Receiver::Rx1, &cb, &p).unwrap();
        let want = 2.0f64.ln() - (1.0 + (-2.0f64).exp()).ln();
        assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        assert!((got - 0.566_219_169_516_972_7).abs() < 1e-6);
    }

    #[test]
    fn information_density_rejects_bad_index() {
        let cb = binary_codebook();
        let p = params();
        assert!(information_density(&[0.0], 0, Receiver::Rx1, &cb, &p).is_err());
        assert!(information_density(&[0.0], 3, Receiver::Rx1, &cb, &p).is_err());
        assert!(information_density(&[0.0], 2, Receiver::Rx2, &cb, &p).is_err());
    }

    #[test]
    fn information_density_invariant_under_co_message_relabeling() {
        // Permuting the w2 columns must not change the Rx1 density.
        let n = 2;
        let words = vec![
            0.1, 0.2, /* (1,1) */ 0.3, -0.1, /* (1,2) */ -0.2, 0.4, /* (1,3) */
            0.0, 0.5, /* (2,1) */ -0.3, 0.3, /* (2,2) */ 0.2, -0.4, /* (2,3) */
        ];
        let cb = Codebook::new(n, 2, 3, 1.0, words.clone()).unwrap();
        // Permutation (1,2,3) -> (3,1,2) of w2 columns.
        let perm = [2usize, 0, 1];
        let mut permuted = vec![0.0; words.len()];
        for w1 in 0..2 {
            for w2 in 0..3 {
                let src = (w1 * 3 + perm[w2]) * n;
                let dst = (w1 * 3 + w2) * n;
                permuted[dst..dst + n].copy_from_slice(&words[src..src + n]);
            }
        }
        let cb_perm = Codebook::new(n, 2, 3, 1.0, permuted).unwrap();
        let p = params();
        let y = [0.37, -0.61];
        for w1 in 1..=2 {
            let a = information_density(&y, w1, Receiver::Rx1, &cb, &p).unwrap();
            let b = information_density(&y, w1, Receiver::Rx1, &cb_perm, &p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn change_of_measure_identity() {
        // For y sampled from the marginal, E[exp(information_density)] = 1.
        let cb = Codebook::new(2, 2, 2, 1.0, vec![1.0, 0.5, -1.0, 0.5, 0.3, -1.2, -0.3, -1.2])
            .unwrap();
        let p = params();
        let trials = 200_000u64;
        let mut acc = Moments::new();
        let mut rng = CounterRng::new(77, 0);
        for _ in 0..trials {
            let w1 = rng.uniform_index(2) + 1;
            let w2 = rng.uniform_index(2) + 1;
            let y = sample_receiver_output(cb.codeword(w1, w2), &p, Receiver::Rx1, &mut rng);
            let wi = rng.uniform_index(2) + 1;
            let v = information_density(&y, wi, Receiver::Rx1, &cb, &p).unwrap();
            acc.push(v.exp());
        }
        let err = (acc.mean() - 1.0).abs();
        assert!(err <= 3.0 * acc.mean_std_error(), "mean {} se {}", acc.mean(), acc.mean_std_error());
    }

    #[test]
    fn codebook_rejects_peak_power_violation() {
        assert!(Codebook::new(1, 1, 1, 1.0, vec![1.1]).is_err());
        assert!(Codebook::new(2, 1, 1, 1.0, vec![1.3, 0.3]).is_ok());
        assert!(Codebook::new(1, 2, 1, 1.0, vec![0.5]).is_err()); // incomplete table
    }

    #[test]
    fn codebook_roundtrip() {
        let cb = Codebook::new(2, 2, 2, 1.5, vec![0.1, 0.2, 0.3, 0.4, -0.1, -0.2, -0.3, -0.4])
            .unwrap();
        let mut buf = Vec::new();
        cb.write_to(&mut buf).unwrap();
        let back = Codebook::read_from(buf.as_slice()).unwrap();
        assert_eq!(cb, back);
    }

    #[test]
    fn codebook_read_rejects_garbage() {
        assert!(Codebook::read_from(&b"not json\n"[..]).is_err());
        assert!(Codebook::read_from(&b"{\"n\":1,\"m1\":1,\"m2\":1,\"power_p\":1.0}\n"[..]).is_err());
        assert!(Codebook::read_from(&b""[..]).is_err());
        // Oversized dimensions are rejected before allocation.
        let huge = b"{\"n\":99999999,\"m1\":99999,\"m2\":99999,\"power_p\":1.0}\n";
        assert!(Codebook::read_from(&huge[..]).is_err());
    }
}
