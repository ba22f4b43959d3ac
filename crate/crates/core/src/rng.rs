//! Deterministic counter-based random numbers.
//!
//! Every draw is a pure function of (key, counter), so a batch of draws can
//! be evaluated in any order, split across threads, or replayed years later
//! and still produce the same bits. Streams are derived hierarchically:
//! a master seed keys the root generator, and `derive` produces statistically
//! independent child streams for scenario / series / estimate / angle levels.
//!
//! The mixer is the 64-bit SplitMix finalizer, which is stateless and has
//! full avalanche. Not cryptographically secure.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xA24B_AED4_963E_E407;

/// Finalizing 64-bit mix (SplitMix64 / Stafford variant 13).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed, counter-indexed random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        // Pre-mix so that small seeds (0, 1, 2...) give unrelated keys.
        Self {
            key: mix64(seed.wrapping_add(GOLDEN_GAMMA)),
        }
    }

    /// Derive an independent child stream for sub-index `stream`.
    pub fn derive(&self, stream: u64) -> Self {
        Self {
            key: mix64(self.key ^ stream.wrapping_mul(STREAM_SALT).wrapping_add(GOLDEN_GAMMA)),
        }
    }

    /// The `counter`-th 64-bit word of this stream.
    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// The `counter`-th uniform double in [0, 1), with 53 significant bits.
    #[inline]
    pub fn unit_f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard-normal variate at an (even-spaced) counter slot, via
    /// Box-Muller on the counter pair (2c, 2c+1).
    pub fn normal_at(&self, counter: u64) -> f64 {
        let u1 = self.unit_f64_at(2 * counter).max(f64::MIN_POSITIVE);
        let u2 = self.unit_f64_at(2 * counter + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Draw k ~ Binomial(n, p) as a sum of counter-indexed Bernoulli trials.
///
/// The sum is order-independent by construction: trial `j` succeeds iff
/// the j-th uniform of the stream is below `p`, so partitioning the index
/// range across workers cannot change the total.
pub fn binomial(rng: &CounterRng, n: u64, p: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    (0..n).filter(|&j| rng.unit_f64_at(j) < p).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_inputs_same_outputs() {
        let a = CounterRng::new(42);
        let b = CounterRng::new(42);
        for c in 0..100 {
            assert_eq!(a.u64_at(c), b.u64_at(c));
        }
        assert_eq!(binomial(&a, 500, 0.3), binomial(&b, 500, 0.3));
    }

    #[test]
    fn distinct_seeds_and_streams_differ() {
        let a = CounterRng::new(1);
        let b = CounterRng::new(2);
        assert_ne!(a.u64_at(0), b.u64_at(0));
        assert_ne!(a.derive(0).u64_at(0), a.derive(1).u64_at(0));
        assert_ne!(a.derive(0).u64_at(0), a.u64_at(0));
    }

    #[test]
    fn binomial_split_matches_full_range() {
        // Summing the two halves of the index range reproduces the full draw.
        let rng = CounterRng::new(7).derive(3);
        let full = binomial(&rng, 1000, 0.37);
        let lo = (0..500u64).filter(|&j| rng.unit_f64_at(j) < 0.37).count() as u64;
        let hi = (500..1000u64)
            .filter(|&j| rng.unit_f64_at(j) < 0.37)
            .count() as u64;
        assert_eq!(full, lo + hi);
    }

    #[test]
    fn unit_doubles_look_uniform() {
        let rng = CounterRng::new(99);
        let n = 100_000u64;
        let mean: f64 = (0..n).map(|c| rng.unit_f64_at(c)).sum::<f64>() / n as f64;
        // std of the mean is 1/sqrt(12 n) ~ 9.1e-4; allow 5 sigma.
        assert!((mean - 0.5).abs() < 5.0 * 9.2e-4, "mean {mean}");
    }

    #[test]
    fn binomial_degenerate_probabilities() {
        let rng = CounterRng::new(5);
        assert_eq!(binomial(&rng, 1000, 0.0), 0);
        assert_eq!(binomial(&rng, 1000, 1.0), 1000);
    }

    #[test]
    fn normal_moments() {
        let rng = CounterRng::new(1234);
        let n = 50_000u64;
        let xs: Vec<f64> = (0..n).map(|c| rng.normal_at(c)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
