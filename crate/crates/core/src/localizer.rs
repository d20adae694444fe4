//! Joint error localization across all codewords of a round.
//!
//! Each first-pass decode reports a per-position energy. Pooled over every
//! pair and coordinate, adversarial positions form a cluster well above the
//! precision-noise floor in log scale; a two-component Gaussian mixture
//! separates the two, and per-user flag counts become the frequency profile
//! that drives erasure hints and the soft confidences.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FortaError, Result};

/// Offset inside the log transform so zero energies stay finite.
pub const LOG_OFFSET: f64 = 1e-12;
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// EM runs on at most this many pooled samples; flagging still sees all of them.
pub const DEFAULT_MAX_FIT_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerParams {
    pub max_iters: usize,
    pub tol: f64,
    /// Minimum gap between component means (log scale) for the mixture to
    /// count as two populations.
    pub min_log_separation: f64,
    /// Without separation, a sample must sit this many pooled deviations above
    /// the pooled mean to be flagged.
    pub outlier_z: f64,
    pub hint_floor: f64,
    pub max_fit_samples: usize,
    pub seed: u64,
}

impl Default for LocalizerParams {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-9,
            min_log_separation: 100f64.ln(),
            outlier_z: 5.0,
            hint_floor: 0.05,
            max_fit_samples: DEFAULT_MAX_FIT_SAMPLES,
            seed: 0,
        }
    }
}

impl LocalizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(FortaError::invalid_configuration("localizer max_iters must be positive"));
        }
        if !(self.tol > 0.0) || !(self.min_log_separation >= 0.0) || !(self.outlier_z > 0.0) {
            return Err(FortaError::invalid_configuration(
                "localizer tolerances must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.hint_floor) {
            return Err(FortaError::invalid_configuration("hint_floor must lie in [0, 1)"));
        }
        if self.max_fit_samples < 4 {
            return Err(FortaError::invalid_configuration("max_fit_samples must be at least 4"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodewordId {
    pub pair: (usize, usize),
    pub coordinate: usize,
}

/// Position energies of every decoded codeword, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEvidence {
    n: usize,
    ids: Vec<CodewordId>,
    energies: Vec<f64>,
}

impl ErrorEvidence {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ids: Vec::new(),
            energies: Vec::new(),
        }
    }

    pub fn push(&mut self, id: CodewordId, energies: &[f64]) -> Result<()> {
        if energies.len() != self.n {
            return Err(FortaError::invalid_argument(format!(
                "expected {} energies, got {}",
                self.n,
                energies.len()
            )));
        }
        if let Some(bad) = energies.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(FortaError::invalid_argument(format!("energy {bad} is not a finite non-negative value")));
        }
        self.ids.push(id);
        self.energies.extend_from_slice(energies);
        Ok(())
    }

    pub fn extend(&mut self, other: ErrorEvidence) -> Result<()> {
        if other.n != self.n {
            return Err(FortaError::invalid_argument("evidence over different user counts"));
        }
        self.ids.extend(other.ids);
        self.energies.extend(other.energies);
        Ok(())
    }

    pub fn n_positions(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[CodewordId] {
        &self.ids
    }

    pub fn energies(&self, entry: usize) -> &[f64] {
        &self.energies[entry * self.n..(entry + 1) * self.n]
    }

    /// All energies pooled, entry-major.
    pub fn pooled(&self) -> &[f64] {
        &self.energies
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: [f64; 2],
    /// Component means in log-energy, ascending.
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    /// Mean per-sample log-likelihood before each M-step.
    pub log_likelihood: Vec<f64>,
}

pub fn log_energy(e: f64) -> f64 {
    (e + LOG_OFFSET).ln()
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + (2.0 * std::f64::consts::PI * var).ln())
}

impl GmmModel {
    fn fallback(mean: f64) -> Self {
        Self {
            weights: [0.5, 0.5],
            means: [mean, mean],
            variances: [VARIANCE_FLOOR; 2],
            converged: false,
            iterations: 0,
            log_likelihood: Vec::new(),
        }
    }

    /// Posterior of the high-mean component for a log-energy.
    pub fn posterior_high(&self, x: f64) -> f64 {
        let lo = self.weights[0].ln() + log_normal_pdf(x, self.means[0], self.variances[0]);
        let hi = self.weights[1].ln() + log_normal_pdf(x, self.means[1], self.variances[1]);
        1.0 / (1.0 + (lo - hi).exp())
    }

    pub fn separation(&self) -> f64 {
        self.means[1] - self.means[0]
    }

    pub fn pooled_mean(&self) -> f64 {
        self.weights[0] * self.means[0] + self.weights[1] * self.means[1]
    }

    pub fn pooled_variance(&self) -> f64 {
        let m = self.pooled_mean();
        (0..2)
            .map(|c| self.weights[c] * (self.variances[c] + (self.means[c] - m).powi(2)))
            .sum()
    }
}

/// Two-component EM in log-energy. Inputs are raw non-negative energies.
pub fn fit_gmm_1d(samples: &[f64], max_iters: usize, tol: f64, seed: u64) -> Result<GmmModel> {
    fit_gmm_1d_capped(samples, max_iters, tol, seed, DEFAULT_MAX_FIT_SAMPLES)
}

pub fn fit_gmm_1d_capped(
    samples: &[f64],
    max_iters: usize,
    tol: f64,
    seed: u64,
    max_samples: usize,
) -> Result<GmmModel> {
    if samples.len() < 4 {
        return Err(FortaError::InsufficientData(format!(
            "mixture fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let mut x: Vec<f64> = if samples.len() > max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, samples.len(), max_samples).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| log_energy(samples[i])).collect()
    } else {
        samples.iter().map(|&e| log_energy(e)).collect()
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FortaError::invalid_argument("energies must be finite and non-negative"));
    }
    x.sort_unstable_by(f64::total_cmp);
    let n = x.len();
    if x[0] == x[n - 1] {
        return Ok(GmmModel::fallback(x[0]));
    }

    let half = n / 2;
    let moments = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        let v = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64;
        (m, v.max(VARIANCE_FLOOR))
    };
    let (m0, v0) = moments(&x[..half]);
    let (m1, v1) = moments(&x[half..]);
    let mut model = GmmModel {
        weights: [0.5, 0.5],
        means: [m0, m1],
        variances: [v0, v1],
        converged: false,
        iterations: 0,
        log_likelihood: Vec::new(),
    };

    let mut resp = vec![0.0; n];
    for iter in 0..max_iters {
        // E-step and log-likelihood of the current parameters
        let lw = [model.weights[0].ln(), model.weights[1].ln()];
        let mut ll = 0.0;
        for (r, &v) in resp.iter_mut().zip(&x) {
            let a = lw[0] + log_normal_pdf(v, model.means[0], model.variances[0]);
            let b = lw[1] + log_normal_pdf(v, model.means[1], model.variances[1]);
            let top = a.max(b);
            let lse = top + ((a - top).exp() + (b - top).exp()).ln();
            ll += lse;
            *r = (b - lse).exp();
        }
        ll /= n as f64;
        if let Some(&prev) = model.log_likelihood.last() {
            debug_assert!(
                ll >= prev - 1e-9 * prev.abs().max(1.0),
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
        }
        model.log_likelihood.push(ll);
        model.iterations = iter + 1;
        if let [.., prev, last] = model.log_likelihood[..] {
            if last - prev < tol {
                model.converged = true;
                break;
            }
        }

        // M-step
        let n1: f64 = resp.iter().sum();
        let n0 = n as f64 - n1;
        if n0 <= 0.0 || n1 <= 0.0 {
            // one component absorbed everything
            break;
        }
        let mean1 = resp.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() / n1;
        let mean0 = resp.iter().zip(&x).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / n0;
        let var1 = resp.iter().zip(&x).map(|(r, v)| r * (v - mean1).powi(2)).sum::<f64>() / n1;
        let var0 = resp.iter().zip(&x).map(|(r, v)| (1.0 - r) * (v - mean0).powi(2)).sum::<f64>() / n0;
        let w1 = (n1 / n as f64).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        model.weights = [1.0 - w1, w1];
        model.means = [mean0, mean1];
        model.variances = [var0.max(VARIANCE_FLOOR), var1.max(VARIANCE_FLOOR)];
    }

    if model.means[0] > model.means[1] {
        model.weights.swap(0, 1);
        model.means.swap(0, 1);
        model.variances.swap(0, 1);
    }
    Ok(model)
}

/// Positions flagged in each codeword, ascending.
pub fn flag_positions(evidence: &ErrorEvidence, gmm: &GmmModel, params: &LocalizerParams) -> Vec<Vec<usize>> {
    let separated = gmm.separation() >= params.min_log_separation;
    let outlier_cut = gmm.pooled_mean()
        + (params.outlier_z * gmm.pooled_variance().sqrt()).max(params.min_log_separation);
    let flagged = |e: f64| {
        if e <= 0.0 {
            return false;
        }
        let x = log_energy(e);
        if separated {
            gmm.posterior_high(x) > 0.5 && x > gmm.means[0]
        } else {
            x >= outlier_cut
        }
    };
    (0..evidence.len())
        .map(|c| {
            evidence
                .energies(c)
                .iter()
                .enumerate()
                .filter(|(_, &e)| flagged(e))
                .map(|(i, _)| i + 1)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyProfile {
    /// `counts[i - 1]` is how often user `i` was flagged.
    pub counts: Vec<usize>,
    pub total_codewords: usize,
}

impl FrequencyProfile {
    pub fn empty(n_users: usize) -> Self {
        Self {
            counts: vec![0; n_users],
            total_codewords: 0,
        }
    }

    pub fn count(&self, user: usize) -> usize {
        self.counts[user - 1]
    }
}

pub fn build_frequency_profile(flags: &[Vec<usize>], n_users: usize) -> Result<FrequencyProfile> {
    let mut counts = vec![0usize; n_users];
    for set in flags {
        let mut seen = set.clone();
        seen.sort_unstable();
        seen.dedup();
        for &p in &seen {
            if p == 0 || p > n_users {
                return Err(FortaError::invalid_argument(format!("flagged position {p} outside 1..={n_users}")));
            }
            counts[p - 1] += 1;
        }
    }
    Ok(FrequencyProfile {
        counts,
        total_codewords: flags.len(),
    })
}

/// Most frequently flagged users, at most `budget`, above the hint floor.
pub fn erasure_hints(profile: &FrequencyProfile, budget: usize, hint_floor: f64) -> Vec<usize> {
    let floor = hint_floor * profile.total_codewords as f64;
    let mut ranked: Vec<usize> = (1..=profile.counts.len())
        .filter(|&u| profile.count(u) as f64 > floor && profile.count(u) > 0)
        .collect();
    ranked.sort_by(|&a, &b| profile.count(b).cmp(&profile.count(a)).then(a.cmp(&b)));
    ranked.truncate(budget);
    ranked.sort_unstable();
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub gmm: GmmModel,
    pub profile: FrequencyProfile,
}

/// Fit, flag and count in one go. Too little evidence yields an empty profile.
pub fn localize(evidence: &ErrorEvidence, params: &LocalizerParams) -> Result<Localization> {
    params.validate()?;
    let pooled = evidence.pooled();
    if pooled.len() < 4 {
        return Ok(Localization {
            gmm: GmmModel::fallback(0.0),
            profile: FrequencyProfile {
                counts: vec![0; evidence.n_positions()],
                total_codewords: evidence.len(),
            },
        });
    }
    let gmm = fit_gmm_1d_capped(pooled, params.max_iters, params.tol, params.seed, params.max_fit_samples)?;
    let flags = flag_positions(evidence, &gmm, params);
    let profile = build_frequency_profile(&flags, evidence.n_positions())?;
    Ok(Localization { gmm, profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn mixture(seed: u64, n_lo: usize, n_hi: usize, mu: (f64, f64)) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = Normal::new(mu.0, 1.0).unwrap();
        let hi = Normal::new(mu.1, 1.0).unwrap();
        let mut out: Vec<f64> = (0..n_lo).map(|_| lo.sample(&mut rng).exp()).collect();
        out.extend((0..n_hi).map(|_| hi.sample(&mut rng).exp()));
        out
    }

    #[test]
    fn recovers_mixture_means() {
        let g = fit_gmm_1d(&mixture(1, 1000, 1000, (-20.0, 0.0)), 500, 1e-10, 0).unwrap();
        // log(x + 1e-12) barely shifts samples near e^-20
        assert!((g.means[0] + 20.0).abs() < 0.5, "{g:?}");
        assert!(g.means[1].abs() < 0.5);
        assert!(g.converged);
        assert!(g.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn recovers_unbalanced_weights() {
        let g = fit_gmm_1d(&mixture(2, 1800, 200, (-20.0, 0.0)), 500, 1e-10, 0).unwrap();
        assert!((g.weights[0] - 0.9).abs() < 0.05, "{g:?}");
        assert!((g.weights[1] - 0.1).abs() < 0.05);
    }

    #[test]
    fn identical_samples_fall_back() {
        let g = fit_gmm_1d(&[0.3; 50], 100, 1e-9, 0).unwrap();
        assert!(!g.converged);
        assert_eq!(g.means[0], g.means[1]);
        assert!(fit_gmm_1d(&[1.0, 2.0], 100, 1e-9, 0).is_err());
    }

    #[test]
    fn subsampling_is_deterministic() {
        let s = mixture(3, 5000, 5000, (-15.0, 0.0));
        let a = fit_gmm_1d_capped(&s, 300, 1e-10, 9, 1000).unwrap();
        let b = fit_gmm_1d_capped(&s, 300, 1e-10, 9, 1000).unwrap();
        assert_eq!(a, b);
        assert!((a.means[1]).abs() < 0.5);
    }

    fn planted(n: usize, codewords: usize, bad: &[usize], seed: u64) -> ErrorEvidence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ev = ErrorEvidence::new(n);
        for c in 0..codewords {
            let e: Vec<f64> = (1..=n)
                .map(|i| {
                    if bad.contains(&i) {
                        rng.random_range(0.5..2.0)
                    } else {
                        1e-9 * rng.random_range(0.5..2.0)
                    }
                })
                .collect();
            ev.push(CodewordId { pair: (1, 2), coordinate: c }, &e).unwrap();
        }
        ev
    }

    #[test]
    fn planted_positions_flagged_everywhere() {
        let ev = planted(30, 200, &[2, 5], 4);
        let params = LocalizerParams::default();
        let loc = localize(&ev, &params).unwrap();
        let flags = flag_positions(&ev, &loc.gmm, &params);
        assert!(flags.iter().all(|f| f == &vec![2, 5]));
        assert_eq!(loc.profile.count(2), 200);
        assert_eq!(loc.profile.count(1), 0);
    }

    #[test]
    fn noise_only_is_not_flagged() {
        let ev = planted(30, 200, &[], 5);
        let loc = localize(&ev, &LocalizerParams::default()).unwrap();
        assert!(loc.profile.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn single_outlier_is_flagged() {
        let mut ev = planted(30, 200, &[], 6);
        let mut e = vec![1e-9; 30];
        e[16] = 1e-6;
        ev.push(CodewordId { pair: (3, 4), coordinate: 0 }, &e).unwrap();
        let params = LocalizerParams::default();
        let loc = localize(&ev, &params).unwrap();
        let flags = flag_positions(&ev, &loc.gmm, &params);
        assert_eq!(flags.last().unwrap(), &vec![17]);
        assert_eq!(loc.profile.counts.iter().sum::<usize>(), 1);
    }

    #[test]
    fn zero_energy_is_never_flagged() {
        let mut ev = ErrorEvidence::new(4);
        for c in 0..10 {
            ev.push(CodewordId { pair: (1, 2), coordinate: c }, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        }
        let params = LocalizerParams::default();
        let loc = localize(&ev, &params).unwrap();
        assert_eq!(loc.profile.counts, vec![0, 0, 10, 0]);
    }

    #[test]
    fn evidence_rejects_bad_energies() {
        let mut ev = ErrorEvidence::new(3);
        let id = CodewordId { pair: (1, 2), coordinate: 0 };
        assert!(ev.push(id, &[0.0, 1.0]).is_err());
        assert!(ev.push(id, &[0.0, -1.0, 0.0]).is_err());
        assert!(ev.push(id, &[0.0, f64::NAN, 0.0]).is_err());
        assert!(ev.is_empty());
    }

    #[test]
    fn profile_counts_and_range() {
        let flags = vec![vec![1, 3], vec![3], vec![], vec![3, 3]];
        let p = build_frequency_profile(&flags, 3).unwrap();
        assert_eq!(p.counts, vec![1, 0, 3]);
        assert_eq!(p.total_codewords, 4);
        assert!(build_frequency_profile(&[vec![4]], 3).is_err());
        assert!(build_frequency_profile(&[vec![0]], 3).is_err());
        assert_eq!(build_frequency_profile(&[vec![], vec![]], 3).unwrap().counts, vec![0; 3]);
    }

    #[test]
    fn profile_is_monotone() {
        let mut flags = vec![vec![2], vec![1, 2]];
        let before = build_frequency_profile(&flags, 3).unwrap();
        flags.push(vec![1]);
        let after = build_frequency_profile(&flags, 3).unwrap();
        assert!(after.counts.iter().zip(&before.counts).all(|(a, b)| a >= b));
    }

    #[test]
    fn hints() {
        let empty = FrequencyProfile::empty(6);
        assert!(erasure_hints(&empty, 4, 0.05).is_empty());

        let dominant = FrequencyProfile { counts: vec![0, 90, 2, 0, 1, 0], total_codewords: 100 };
        assert_eq!(erasure_hints(&dominant, 4, 0.05), vec![2]);

        let tied = FrequencyProfile { counts: vec![50, 10, 50, 50], total_codewords: 100 };
        assert_eq!(erasure_hints(&tied, 2, 0.05), vec![1, 3]);
        assert!(erasure_hints(&tied, 0, 0.05).is_empty());
    }

    #[test]
    fn planted_corruptors_become_hints() {
        let bad = [1, 4, 6, 9, 13, 17, 20, 22, 27, 30];
        let ev = planted(30, 300, &bad, 7);
        let loc = localize(&ev, &LocalizerParams::default()).unwrap();
        assert_eq!(erasure_hints(&loc.profile, 10, 0.05), bad.to_vec());
    }
}
