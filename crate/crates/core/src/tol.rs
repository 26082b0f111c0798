use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Numerical thresholds shared by all modules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Unitarity and multiplier-law checks.
    pub unit: f64,
    /// Linear-algebra identities (covariance, normalization, intertwining).
    pub lin: f64,
    /// Allowed negative eigenvalue when testing positivity.
    pub psd: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank: f64,
    /// Character comparison when matching irreducible blocks.
    pub character: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit: 1e-10,
            lin: 1e-9,
            psd: 1e-10,
            rank: 1e-8,
            character: 1e-8,
        }
    }
}

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
