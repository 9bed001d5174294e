//! Reproducible parallel Monte Carlo and sample-size bounds.
//!
//! Every round draws from its own ChaCha8 stream keyed by the run seed and
//! selected by the round index. Rounds are grouped into fixed-size blocks,
//! blocks are tallied independently (possibly on several threads) and the
//! partial tallies are merged in block order, so results depend only on the
//! seed and never on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const BLOCK: u64 = 2048;

/// Per-round tally that can absorb another tally.
pub trait Tally: Default + Send {
    fn merge(&mut self, other: Self);
}

/// Running sums of a real-valued sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// `sqrt(variance / count)`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl Tally for Moments {
    fn merge(&mut self, other: Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

/// 32-byte stream key derived from a user seed.
pub fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Generator for one round.
pub fn round_rng(key: [u8; 32], round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(round);
    rng
}

/// Runs `rounds` independent rounds and reduces their tallies
/// deterministically. `workers = 1` runs on the calling thread.
pub fn run_rounds<T, F>(rounds: u64, seed: u64, workers: usize, round: F) -> T
where
    T: Tally,
    F: Fn(&mut ChaCha8Rng, &mut T) + Sync,
{
    let key = stream_key(seed);
    let blocks = rounds.div_ceil(BLOCK);
    let block = |b: u64| {
        let mut tally = T::default();
        for r in b * BLOCK..((b + 1) * BLOCK).min(rounds) {
            let mut rng = round_rng(key, r);
            round(&mut rng, &mut tally);
        }
        tally
    };
    let partials: Vec<T> = if workers <= 1 || blocks <= 1 {
        (0..blocks).map(block).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| (0..blocks).into_par_iter().map(block).collect()),
            Err(_) => (0..blocks).map(block).collect(),
        }
    };
    let mut total = T::default();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Index drawn from a discrete distribution given by nonnegative weights that
/// sum to `total`. Falls back to the last positive weight on roundoff.
pub fn sample_index(rng: &mut impl Rng, weights: &[f64], total: f64) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

/// Hoeffding rounds for a mean of variables in `[-gamma, gamma]`:
/// `ceil(2 gamma^2 ln(2/delta) / eps^2)`.
///
/// Two-sided Hoeffding with range `2 gamma` gives
/// `P(|mean - mu| >= eps) <= 2 exp(-M eps^2 / (2 gamma^2))`; the asymptotic
/// claim `O(gamma^2 log(1/delta) / eps^2)` is this with the constant made
/// explicit.
pub fn hoeffding_rounds(epsilon: f64, delta: f64, gamma: f64) -> Result<u64> {
    if !(gamma > 0.0) || !(epsilon > 0.0 && epsilon <= gamma) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < epsilon <= gamma, got epsilon = {epsilon}, gamma = {gamma}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1)")));
    }
    let m = (2.0 * gamma * gamma * (2.0 / delta).ln() / (epsilon * epsilon)).ceil();
    Ok((m as u64).max(1))
}

/// Bernstein rounds for a mean of variables bounded by `range` in modulus
/// with second moment at most `variance`:
/// `ceil((2 variance + 2 range eps / 3) ln(2/delta) / eps^2)`.
pub fn bernstein_rounds(epsilon: f64, delta: f64, range: f64, variance: f64) -> Result<u64> {
    if !(epsilon > 0.0) || !(range > 0.0) || !(variance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need epsilon, range > 0 and variance >= 0, got {epsilon}, {range}, {variance}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1)")));
    }
    let m = ((2.0 * variance + 2.0 * range * epsilon / 3.0) * (2.0 / delta).ln() / (epsilon * epsilon)).ceil();
    Ok((m as u64).max(1))
}

/// Attempts `M` such that `Binomial(M, eta) >= n` fails with probability at
/// most `delta / 2`: the smallest `M` with
/// `M eta >= n + L + sqrt(L^2 + 2 n L)`, `L = ln(2/delta)`.
pub fn chernoff_attempts(n_accepted_target: u64, delta: f64, eta: f64) -> Result<u64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("acceptance bound eta = {eta} outside (0, 1]")));
    }
    if n_accepted_target == 0 {
        return Err(Error::InvalidArgument("accepted-sample target must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1)")));
    }
    let n = n_accepted_target as f64;
    let l = (2.0 / delta).ln();
    Ok(((n + l + (l * l + 2.0 * n * l).sqrt()) / eta).ceil() as u64)
}
