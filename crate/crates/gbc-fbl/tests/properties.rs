//! Property tests for the deterministic invariants of the library.

use proptest::prelude::*;

use gbc_fbl::capacity::{
    boundary_point, lambda_sum_capacity, membership_witness, region_contains, shannon_c,
    PowerSplit, RatePair,
};
use gbc_fbl::channel::{ChannelParams, Codebook};
use gbc_fbl::fbl::{chebyshev_threshold, fbl_constants, min_blocklength, outer_bound_region};
use gbc_fbl::rng::CounterRng;
use gbc_fbl::stats::Moments;

fn params_strategy() -> impl Strategy<Value = ChannelParams> {
    (0.1f64..8.0, 0.1f64..4.0, 0.0f64..4.0)
        .prop_map(|(p, s1, extra)| ChannelParams::new(p, s1, s1 + extra).unwrap())
}

proptest! {
    #[test]
    fn boundary_points_lie_in_region(
        params in params_strategy(),
        alpha in 0.0f64..=1.0,
    ) {
        let b = boundary_point(&params, PowerSplit::new(alpha).unwrap());
        prop_assert!(region_contains(&params, b, 1e-9));
        // Scaling any nonzero boundary point past the frontier leaves the region.
        if b.r1 > 1e-6 && b.r2 > 1e-6 {
            let outside = RatePair::new(b.r1 * 1.05, b.r2 * 1.05).unwrap();
            prop_assert!(!region_contains(&params, outside, 1e-9));
        }
    }

    #[test]
    fn boundary_rates_are_antitone_in_alpha(
        params in params_strategy(),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = boundary_point(&params, PowerSplit::new(lo).unwrap());
        let p_hi = boundary_point(&params, PowerSplit::new(hi).unwrap());
        prop_assert!(p_hi.r1 >= p_lo.r1 - 1e-12);
        prop_assert!(p_hi.r2 <= p_lo.r2 + 1e-12);
    }

    #[test]
    fn lambda_sum_supports_every_boundary_point(
        params in params_strategy(),
        lambda in 0.0f64..=1.0,
        alpha in 0.0f64..=1.0,
    ) {
        let c = lambda_sum_capacity(&params, lambda).unwrap();
        let b = boundary_point(&params, PowerSplit::new(alpha).unwrap());
        prop_assert!(c.value >= lambda * b.r1 + (1.0 - lambda) * b.r2 - 1e-9);
        let at_argmax = boundary_point(&params, c.argmax_alpha);
        let achieved = lambda * at_argmax.r1 + (1.0 - lambda) * at_argmax.r2;
        prop_assert!((c.value - achieved).abs() <= 1e-9);
    }

    #[test]
    fn membership_witness_reconstructs_dominating_point(
        params in params_strategy(),
        alpha in 0.0f64..=1.0,
        shrink in 0.0f64..=1.0,
    ) {
        let b = boundary_point(&params, PowerSplit::new(alpha).unwrap());
        let inner = RatePair::new(b.r1 * shrink, b.r2 * shrink).unwrap();
        let w = membership_witness(&params, inner, 1e-9);
        prop_assert!(w.is_some());
        let d = boundary_point(&params, w.unwrap());
        prop_assert!(d.r1 >= inner.r1 - 1e-9 && d.r2 >= inner.r2 - 1e-9);
    }

    #[test]
    fn outer_bound_strictly_dominates_boundary(
        params in params_strategy(),
        eps in 0.01f64..0.99,
        n_extra in 0u64..1_000_000,
    ) {
        let n = min_blocklength(eps).unwrap() + n_extra;
        let region = outer_bound_region(&params, n, eps, 21).unwrap();
        for pt in &region.points {
            let b = boundary_point(&params, PowerSplit::new(pt.alpha).unwrap());
            prop_assert!(pt.r1_bound > b.r1);
            prop_assert!(pt.r2_bound > b.r2);
        }
        let c = fbl_constants(&params, eps).unwrap();
        prop_assert!(c.zeta2 <= c.zeta1);
    }

    #[test]
    fn shannon_c_is_monotone_and_subadditive(x in 0.0f64..100.0, y in 0.0f64..100.0) {
        let cx = shannon_c(x).unwrap();
        let cy = shannon_c(y).unwrap();
        let cxy = shannon_c(x + y).unwrap();
        prop_assert!(cxy + 1e-12 >= cx.max(cy));
        prop_assert!(cxy <= cx + cy + 1e-12);
    }

    #[test]
    fn chebyshev_threshold_is_antitone_in_variance(
        log_m in 0.0f64..10.0,
        mean in -5.0f64..5.0,
        v1 in 0.0f64..50.0,
        dv in 0.0f64..50.0,
        eps in 0.0f64..0.99,
    ) {
        let lo = chebyshev_threshold(log_m, mean, v1, eps).unwrap();
        let hi = chebyshev_threshold(log_m, mean, v1 + dv, eps).unwrap();
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn codebook_roundtrips_through_bytes(
        n in 1usize..5,
        m1 in 1usize..5,
        m2 in 1usize..5,
        seed in any::<u64>(),
    ) {
        // Entries in [-1, 1] keep every codeword within the peak power n * 1.
        let mut rng = CounterRng::new(seed, 0);
        let codewords: Vec<f64> = (0..n * m1 * m2)
            .map(|_| 2.0 * rng.uniform() - 1.0)
            .collect();
        let cb = Codebook::new(n, m1, m2, 1.0, codewords).unwrap();
        let mut buf = Vec::new();
        cb.write_to(&mut buf).unwrap();
        let back = Codebook::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n(), cb.n());
        prop_assert_eq!(back.m1(), cb.m1());
        prop_assert_eq!(back.m2(), cb.m2());
        prop_assert_eq!(back.power(), cb.power());
        for w1 in 1..=m1 {
            for w2 in 1..=m2 {
                prop_assert_eq!(back.codeword(w1, w2), cb.codeword(w1, w2));
            }
        }
    }

    #[test]
    fn codebook_reader_never_panics_on_noise(bytes in proptest::collection::vec(any::<u8>(), 0..2048)) {
        let _ = Codebook::read_from(bytes.as_slice());
    }

    #[test]
    fn moments_merge_matches_sequential(
        xs in proptest::collection::vec(-100.0f64..100.0, 1..200),
        split in 0usize..200,
    ) {
        let split = split.min(xs.len());
        let mut whole = Moments::default();
        for &x in &xs {
            whole.push(x);
        }
        let mut left = Moments::default();
        let mut right = Moments::default();
        for &x in &xs[..split] {
            left.push(x);
        }
        for &x in &xs[split..] {
            right.push(x);
        }
        left.merge(&right);
        prop_assert_eq!(left.count(), whole.count());
        prop_assert!((left.mean() - whole.mean()).abs() < 1e-9);
        prop_assert!((left.variance() - whole.variance()).abs() < 1e-7);
    }

    #[test]
    fn counter_rng_is_stateless_per_counter(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = CounterRng::new(seed, stream);
        let first: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let mut b = CounterRng::new(seed, stream);
        let second: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let head = second[0];
        prop_assert_eq!(first, second);
        let mut other = CounterRng::new(seed, stream.wrapping_add(1));
        prop_assert_ne!(other.next_u64(), head);
    }

    #[test]
    fn standard_normals_are_finite(seed in any::<u64>()) {
        let mut rng = CounterRng::new(seed, 7);
        for _ in 0..64 {
            let x = rng.standard_normal();
            prop_assert!(x.is_finite());
        }
    }
}
