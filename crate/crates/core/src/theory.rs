//! Resilience bounds for Krum over noisy distances and the feedback-weighted
//! variant, plus estimators for the statistics they need.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FortaError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub n: usize,
    pub a: usize,
    pub d: usize,
    /// Honest update spread, `E‖G − g‖² = d σ_g²`.
    pub sigma_g: f64,
    /// Reconstruction noise, `E‖F‖² = d σ_ε²`.
    pub sigma_eps: f64,
    pub g_norm: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        check_hypothesis(self.n, self.a)?;
        if self.d == 0 {
            return Err(FortaError::invalid_configuration("dimension d must be positive"));
        }
        if !(self.sigma_g >= 0.0 && self.sigma_eps >= 0.0 && self.sigma_g.is_finite() && self.sigma_eps.is_finite()) {
            return Err(FortaError::invalid_configuration("sigma_g and sigma_eps must be finite and non-negative"));
        }
        if !(self.g_norm > 0.0 && self.g_norm.is_finite()) {
            return Err(FortaError::invalid_configuration("g_norm must be positive"));
        }
        Ok(())
    }

    /// `σ' = sqrt(σ_g² + σ_ε²/2)`.
    pub fn sigma_prime(&self) -> f64 {
        (self.sigma_g.powi(2) + 0.5 * self.sigma_eps.powi(2)).sqrt()
    }

    /// The common factor `4 d σ'² / ‖g‖²` of both squared bounds.
    fn spread_ratio(&self) -> f64 {
        4.0 * self.d as f64 * (self.sigma_g.powi(2) + 0.5 * self.sigma_eps.powi(2)) / self.g_norm.powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackStats {
    pub mu_t: f64,
    pub sigma_t: f64,
    pub mu_q: f64,
    pub sigma_q: f64,
    pub c1: f64,
}

impl FeedbackStats {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_t, self.sigma_t, self.mu_q, self.sigma_q, self.c1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FortaError::invalid_argument("feedback statistics must be finite"));
        }
        if !(self.mu_t > 0.0) || self.sigma_t < 0.0 || self.sigma_q < 0.0 || self.c1 < 1.0 {
            return Err(FortaError::invalid_argument(
                "need mu_T > 0, non-negative deviations and C1 ≥ 1",
            ));
        }
        Ok(())
    }

    /// `Ψ_T = sqrt((σ_T² + μ_T²) C_1)`.
    pub fn psi_t(&self) -> f64 {
        ((self.sigma_t.powi(2) + self.mu_t.powi(2)) * self.c1).sqrt()
    }

    /// `Ψ_Q = sqrt((σ_Q² + μ_Q²) C_1)`.
    pub fn psi_q(&self) -> f64 {
        ((self.sigma_q.powi(2) + self.mu_q.powi(2)) * self.c1).sqrt()
    }
}

/// A bound together with whether the theorem's hypothesis holds for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub valid: bool,
}

fn check_hypothesis(n: usize, a: usize) -> Result<()> {
    if 2 * a + 2 >= n {
        return Err(FortaError::invalid_configuration(format!(
            "2A + 2 < N violated (N = {n}, A = {a})"
        )));
    }
    Ok(())
}

/// `η(N, A)²`.
pub fn eta_squared(n: usize, a: usize) -> Result<f64> {
    check_hypothesis(n, a)?;
    let (n, a) = (n as f64, a as f64);
    Ok(n - a + (a * (n - a - 2.0) + a * a * (n - a - 1.0)) / (n - 2.0 * a - 2.0))
}

pub fn eta(n: usize, a: usize) -> Result<f64> {
    eta_squared(n, a).map(f64::sqrt)
}

/// `η' = (N − A − 2)/(N − 2A − 2) + A(N − A − 1)/(N − 2A − 2)`.
pub fn eta_prime(n: usize, a: usize) -> Result<f64> {
    check_hypothesis(n, a)?;
    let (n, a) = (n as f64, a as f64);
    let den = n - 2.0 * a - 2.0;
    Ok((n - a - 2.0) / den + a * (n - a - 1.0) / den)
}

/// `sin α = 2 η(N, A) √d σ' / ‖g‖`; valid when below one.
pub fn sin_alpha(p: &TheoryParams) -> Result<Bound> {
    p.validate()?;
    let value = (eta_squared(p.n, p.a)? * p.spread_ratio()).sqrt();
    Ok(Bound { value, valid: value < 1.0 })
}

/// Left side of the dominance condition: `A(η'Ψ_T + η'/(N−A−2) Ψ_Q) + (N − A)`.
fn feedback_factor(p: &TheoryParams, s: &FeedbackStats) -> Result<f64> {
    let ep = eta_prime(p.n, p.a)?;
    let (n, a) = (p.n as f64, p.a as f64);
    Ok(a * (ep * s.psi_t() + ep / (n - a - 2.0) * s.psi_q()) + (n - a))
}

/// The modified-Krum angle bound; valid when below one.
pub fn sin_alpha_mod(p: &TheoryParams, s: &FeedbackStats) -> Result<Bound> {
    p.validate()?;
    s.validate()?;
    let value = (feedback_factor(p, s)? * p.spread_ratio()).sqrt();
    Ok(Bound { value, valid: value < 1.0 })
}

/// Whether the feedback-weighted bound is strictly tighter than plain Krum's.
pub fn corollary_condition(p: &TheoryParams, s: &FeedbackStats) -> Result<bool> {
    p.validate()?;
    s.validate()?;
    Ok(feedback_factor(p, s)? < eta_squared(p.n, p.a)?)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Round-level `T = max λ_i/λ_k` and `Q = max (1 − λ_i/λ_k)` over ordered
/// pairs `i ≠ k`, summarized across rounds; `C_1` from the fourth-to-squared
/// second moment of each group of surrogate differences.
pub fn estimate_feedback_stats(lambda_history: &[Vec<f64>], surrogate_groups: &[Vec<Vec<f64>>]) -> Result<FeedbackStats> {
    if lambda_history.len() < 2 {
        return Err(FortaError::InsufficientData(format!(
            "need at least 2 rounds of confidences, got {}",
            lambda_history.len()
        )));
    }
    let mut t = Vec::with_capacity(lambda_history.len());
    let mut q = Vec::with_capacity(lambda_history.len());
    for lambda in lambda_history {
        if lambda.len() < 2 || lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(FortaError::invalid_argument("confidences must be positive over at least two users"));
        }
        let max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        t.push(max / min);
        q.push(1.0 - min / max);
    }
    let c1 = surrogate_groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|group| {
            let sq: Vec<f64> = group.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
            let m2 = sq.iter().sum::<f64>() / sq.len() as f64;
            let m4 = sq.iter().map(|x| x * x).sum::<f64>() / sq.len() as f64;
            if m2 > 0.0 { m4 / (m2 * m2) } else { 1.0 }
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or_else(|| FortaError::InsufficientData("no surrogate samples".into()))?;
    let (mu_t, sigma_t) = mean_std(&t);
    let (mu_q, sigma_q) = mean_std(&q);
    Ok(FeedbackStats {
        mu_t,
        sigma_t,
        mu_q,
        sigma_q,
        c1: c1.max(1.0),
    })
}

/// Surrogate pairwise differences `v_j − v_k` with `v = w + ε¹`: each group is
/// one pair, each coordinate `N(0, 2σ_g² + σ_ε²)`.
pub fn surrogate_differences(
    d: usize,
    sigma_g: f64,
    sigma_eps: f64,
    pairs: usize,
    samples_per_pair: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let sd = (2.0 * sigma_g.powi(2) + sigma_eps.powi(2)).sqrt();
    let dist = Normal::new(0.0, sd).map_err(|e| FortaError::invalid_argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..pairs)
        .map(|_| {
            (0..samples_per_pair)
                .map(|_| (0..d).map(|_| dist.sample(&mut rng)).collect())
                .collect()
        })
        .collect())
}
