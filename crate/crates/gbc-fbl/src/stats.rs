//! Streaming moment accumulation and deterministic parallel reduction.

use rayon::prelude::*;

/// One-pass accumulator for the first four central moments.
///
/// Uses the Welford update and the pairwise merge formulas, so trials can
/// be accumulated in parallel chunks and merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Moments::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let delta2 = delta * delta;
        let delta3 = delta2 * delta;
        let delta4 = delta2 * delta2;

        let m4 = self.m4
            + other.m4
            + delta4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * delta2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        let m3 = self.m3
            + other.m3
            + delta3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m2 = self.m2 + other.m2 + delta2 * na * nb / n;

        self.count += other.count;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    /// Fourth central sample moment.
    pub fn fourth_central_moment(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.m4 / self.count as f64
    }

    /// Standard error of the sample mean.
    pub fn mean_std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    /// Standard error of the sample variance, `sqrt((m4 - s^4)/t)`.
    pub fn variance_std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let s2 = self.variance();
        let m4 = self.fourth_central_moment();
        ((m4 - s2 * s2).max(0.0) / self.count as f64).sqrt()
    }
}

/// 95% Wilson score interval halfwidth for `successes` out of `trials`.
pub fn wilson_halfwidth(successes: u64, trials: u64) -> f64 {
    wilson_halfwidth_z(successes, trials, 1.959_963_984_540_054)
}

pub fn wilson_halfwidth_z(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Fixed chunk size used for deterministic parallel reductions.
pub const REDUCTION_CHUNK: u64 = 4096;

/// Runs `trials` independent trials in parallel and merges per-chunk
/// accumulators in ascending chunk order.
///
/// The trial body receives the global trial index; any randomness must be
/// keyed off that index (counter-based substreams), so the result does not
/// depend on the worker count.
pub fn parallel_reduce<A, F, M>(trials: u64, body: F, merge: M) -> A
where
    A: Default + Send,
    F: Fn(u64, &mut A) + Sync,
    M: Fn(&mut A, A),
{
    let num_chunks = trials.div_ceil(REDUCTION_CHUNK);
    let chunks: Vec<A> = (0..num_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCTION_CHUNK;
            let hi = ((c + 1) * REDUCTION_CHUNK).min(trials);
            let mut acc = A::default();
            for t in lo..hi {
                body(t, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = A::default();
    for chunk in chunks {
        merge(&mut total, chunk);
    }
    total
}
