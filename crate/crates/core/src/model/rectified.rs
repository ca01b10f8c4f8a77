use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Below this standardized lower bound, proposals from the untruncated
/// normal are accepted with probability at least `Φ(−0.25) ≈ 0.40`.
const NORMAL_REJECTION_MAX_BOUND: f64 = 0.25;

/// Density ∝ `N(x; μ, σ²)·exp(−λx)` on `x ≥ 0`, i.e. `N(μ − λσ², σ²)`
/// truncated to the nonnegative half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifiedNormal {
    pub mu: f64,
    pub sigma2: f64,
    pub lambda: f64,
}

impl RectifiedNormal {
    pub fn new(mu: f64, sigma2: f64, lambda: f64) -> Self {
        debug_assert!(sigma2 > 0.0 && lambda >= 0.0);
        Self { mu, sigma2, lambda }
    }

    /// Location of the equivalent truncated normal.
    pub fn shifted_mean(&self) -> f64 {
        self.mu - self.lambda * self.sigma2
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sd = self.sigma2.sqrt();
        let m = self.shifted_mean();
        let z = standard_normal_above(-m / sd, rng);
        (m + sd * z).max(0.0)
    }
}

impl Distribution<f64> for RectifiedNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        RectifiedNormal::sample(self, rng)
    }
}

/// Draws `Z ~ N(0, 1)` conditioned on `Z ≥ lower`.
///
/// Plain rejection from the untruncated normal when the bound sits in the
/// bulk; otherwise Robert's translated-exponential proposal with the
/// optimal rate `(a + √(a² + 4)) / 2`.
pub fn standard_normal_above<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower <= NORMAL_REJECTION_MAX_BOUND {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= lower {
                return z;
            }
        }
    }
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    loop {
        // 1 - U lies in (0, 1], keeping the logs finite.
        let u1: f64 = 1.0 - rng.random::<f64>();
        let z = lower - u1.ln() / rate;
        let u2: f64 = 1.0 - rng.random::<f64>();
        if u2.ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}
