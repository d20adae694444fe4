//! `(n, k)` DFT code over the complex field.
//!
//! A message `m_0, .., m_{k-1}` is the coefficient vector of a polynomial
//! whose evaluations at the n-th roots of unity `ω_i = exp(2πι·i/n)`,
//! `i = 1..=n`, form the codeword. Decoding follows the analog BCH route:
//!
//! 1. syndromes at the `n - k` spectral positions that vanish on clean words,
//! 2. numerical rank of the syndrome Hankel matrix for the error count,
//! 3. linear-prediction (Prony) error locator, roots snapped to the `ω_i`,
//! 4. Vandermonde least squares for the error values,
//! 5. interpolation of the corrected word.
//!
//! Positions are 1-based throughout, matching the user indices of the
//! protocol. Every operation is a pure function of its inputs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{FortaError, Result};

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-9;
/// Relative syndrome level (against the received word) above which an
/// apparently clean word is probed for sub-threshold structure.
pub const DEFAULT_PROBE_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    /// Codeword length, the number of users.
    pub n: usize,
    /// Message length, collusion threshold plus one.
    pub k: usize,
    pub rank_tolerance: f64,
    /// Maximum angular distance (radians) between a locator root and its evaluation point.
    pub root_match_tolerance: f64,
    pub noise_floor: f64,
    pub probe_tolerance: f64,
}

impl CodecParams {
    /// Parameters with the default tolerances; the root match tolerance is
    /// half the angular spacing of the evaluation points.
    pub fn new(n: usize, k: usize) -> Self {
        CodecParams {
            n,
            k,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            root_match_tolerance: if n > 0 { PI / n as f64 } else { PI },
            noise_floor: DEFAULT_NOISE_FLOOR,
            probe_tolerance: DEFAULT_PROBE_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n <= self.k {
            return Err(FortaError::invalid_configuration(format!(
                "codec requires n > k >= 1 (n = {}, k = {})",
                self.n, self.k
            )));
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return Err(FortaError::invalid_configuration(format!(
                "rank_tolerance must lie in (0, 1), got {}",
                self.rank_tolerance
            )));
        }
        if !(self.root_match_tolerance > 0.0) {
            return Err(FortaError::invalid_configuration(
                "root_match_tolerance must be positive",
            ));
        }
        if !(self.noise_floor >= 0.0) || !(self.probe_tolerance >= 0.0) {
            return Err(FortaError::invalid_configuration(
                "noise_floor and probe_tolerance must be non-negative",
            ));
        }
        Ok(())
    }

    /// Number of unknown-position errors the code corrects, `⌊(n − k)/2⌋`.
    pub fn max_errors(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    values: Vec<Complex64>,
}

impl Codeword {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(FortaError::invalid_argument(format!(
                "codeword entry at position {} is not finite",
                i + 1
            )));
        }
        Ok(Codeword { values })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Polynomial coefficients, constant term first.
    pub message: Vec<Complex64>,
    /// Sorted 1-based positions whose solved error exceeds the noise floor.
    pub error_positions: Vec<usize>,
    pub error_values: Vec<Complex64>,
    /// Estimated error magnitude per position (index `i - 1` for position `i`).
    pub position_energies: Vec<f64>,
    /// Norm of the re-encoded message plus errors minus the received word.
    pub residual: f64,
    pub erasures_used: usize,
}

impl DecodeResult {
    pub fn constant_term(&self) -> Complex64 {
        self.message[0]
    }
}

/// Error positions and values explaining a syndrome vector.
#[derive(Debug, Clone)]
struct SparseFit {
    positions: Vec<usize>,
    values: Vec<Complex64>,
    residual: Vec<Complex64>,
    residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DftCodec {
    params: CodecParams,
    /// `roots[m] = exp(2πι·m/n)`.
    roots: Vec<Complex64>,
}

impl DftCodec {
    pub fn new(params: CodecParams) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        let roots = (0..n)
            .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
            .collect();
        Ok(DftCodec { params, roots })
    }

    pub fn params(&self) -> &CodecParams {
        &self.params
    }

    /// `ω_pos^exp`, exponents taken modulo n.
    #[inline]
    fn power(&self, pos: usize, exp: i64) -> Complex64 {
        let n = self.params.n as i64;
        let e = ((pos as i64 % n) * (exp % n)).rem_euclid(n);
        self.roots[e as usize]
    }

    /// `Σ_q values[q]·ω^{(q + offset)·step}` with the twiddle index advanced
    /// incrementally; `step` is reduced modulo n.
    #[inline]
    fn dft_sum(&self, values: &[Complex64], offset: usize, step: usize) -> Complex64 {
        let n = self.params.n;
        let step = step % n;
        let mut idx = (offset % n) * step % n;
        let mut acc = ZERO;
        for v in values {
            acc += v * self.roots[idx];
            idx += step;
            if idx >= n {
                idx -= n;
            }
        }
        acc
    }

    /// The evaluation point of a 1-based position.
    pub fn evaluation_point(&self, pos: usize) -> Complex64 {
        self.power(pos, 1)
    }

    pub fn encode(&self, message: &[Complex64]) -> Result<Codeword> {
        let CodecParams { n, k, .. } = self.params;
        if message.len() != k {
            return Err(FortaError::invalid_argument(format!(
                "message length {} does not match k = {k}",
                message.len()
            )));
        }
        Codeword::new(self.evaluate(message, n))
    }

    fn evaluate(&self, coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
        (1..=n).map(|i| self.dft_sum(coeffs, 0, i)).collect()
    }

    /// Spectral components `S_j = (1/n) Σ_i y_i ω_i^j` for `j = 1..=n−k`.
    ///
    /// A single error `e` at position `p` contributes `(e/n)·ω_p^j`.
    pub fn syndromes(&self, received: &Codeword) -> Result<Vec<Complex64>> {
        self.check_len(received)?;
        Ok(self.syndromes_of(received.values()))
    }

    fn syndromes_of(&self, values: &[Complex64]) -> Vec<Complex64> {
        let CodecParams { n, k, .. } = self.params;
        let scale = 1.0 / n as f64;
        (1..=(n - k)).map(|j| self.dft_sum(values, 1, j) * scale).collect()
    }

    fn check_len(&self, received: &Codeword) -> Result<()> {
        if received.len() != self.params.n {
            return Err(FortaError::invalid_argument(format!(
                "codeword length {} does not match n = {}",
                received.len(),
                self.params.n
            )));
        }
        Ok(())
    }

    /// Number of errors implied by the numerical rank of the syndrome Hankel
    /// matrix, capped at half the syndrome length.
    pub fn estimate_error_count(&self, syndromes: &[Complex64]) -> usize {
        let cap = syndromes.len() / 2;
        if cap == 0 {
            return 0;
        }
        let floor = self.params.noise_floor;
        // σ_1 ≤ ‖H‖_F, so small words skip the SVD entirely.
        if hankel_frobenius(syndromes) <= floor {
            return 0;
        }
        let sv = hankel_singular_values(syndromes);
        if sv[0] <= floor {
            return 0;
        }
        self.relative_rank(&sv, cap)
    }

    fn relative_rank(&self, sv: &[f64], cap: usize) -> usize {
        let tol = self.params.rank_tolerance;
        sv.iter()
            .take(cap)
            .take_while(|&&s| s / sv[0] > tol)
            .count()
    }

    /// Positions of `count` errors from a linear-prediction fit of the syndromes.
    pub fn locate_errors(&self, syndromes: &[Complex64], count: usize) -> Result<Vec<usize>> {
        let len = syndromes.len();
        if count == 0 || 2 * count > len {
            return Err(FortaError::invalid_argument(format!(
                "cannot locate {count} errors from {len} syndromes"
            )));
        }
        let rows = len - count;
        // s[j+ν] + Σ_l a_l s[j+ν−l] = 0
        let a = DMatrix::from_fn(rows, count, |j, l| syndromes[j + count - 1 - l]);
        let b = DVector::from_fn(rows, |j, _| -syndromes[j + count]);
        let coeffs = least_squares(a, &b);

        // Λ(z) = z^ν + a_1 z^{ν−1} + … + a_ν, highest degree first.
        let mut locator = Vec::with_capacity(count + 1);
        locator.push(Complex64::new(1.0, 0.0));
        locator.extend(coeffs.iter().copied());
        let roots = match self.aberth_roots(&locator) {
            Some(r) => r,
            None => companion_roots(&coeffs)?,
        };

        let mut positions = Vec::with_capacity(count);
        for root in roots {
            positions.push(self.snap_root(root)?);
        }
        positions.sort_unstable();
        positions.dedup();
        Ok(positions)
    }

    /// Aberth–Ehrlich iteration seeded at the evaluation points where the
    /// locator is smallest. `None` when it fails to converge.
    fn aberth_roots(&self, poly: &[Complex64]) -> Option<Vec<Complex64>> {
        let degree = poly.len() - 1;
        if degree == 1 {
            return Some(vec![-poly[1] / poly[0]]);
        }
        let mut seeds: Vec<(f64, usize)> = (1..=self.params.n)
            .map(|p| (horner(poly, self.evaluation_point(p)).norm(), p))
            .collect();
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut z: Vec<Complex64> = seeds
            .iter()
            .take(degree)
            .map(|&(_, p)| self.evaluation_point(p) * 1.0001)
            .collect();
        let deriv: Vec<Complex64> = poly[..degree]
            .iter()
            .enumerate()
            .map(|(i, c)| c * (degree - i) as f64)
            .collect();
        for _ in 0..200 {
            let mut max_step: f64 = 0.0;
            for i in 0..degree {
                let pz = horner(poly, z[i]);
                if pz == ZERO {
                    continue;
                }
                let ratio = pz / horner(&deriv, z[i]);
                let repulsion = (0..degree)
                    .filter(|&j| j != i)
                    .fold(ZERO, |acc, j| acc + (z[i] - z[j]).inv());
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if !(step.re.is_finite() && step.im.is_finite()) {
                    return None;
                }
                z[i] -= step;
                max_step = max_step.max(step.norm());
            }
            if max_step <= 1e-14 {
                return Some(z);
            }
        }
        None
    }

    /// Nearest evaluation point by angle; radial drift is ignored.
    fn snap_root(&self, root: Complex64) -> Result<usize> {
        if !(root.re.is_finite() && root.im.is_finite()) || root.norm() == 0.0 {
            return Err(FortaError::LocalizationFailure { root });
        }
        let n = self.params.n as f64;
        let theta = root.arg();
        let step = 2.0 * PI / n;
        let idx = (theta / step).round();
        let dist = (theta - idx * step).abs();
        if dist > self.params.root_match_tolerance {
            return Err(FortaError::LocalizationFailure { root });
        }
        let pos = (idx as i64).rem_euclid(self.params.n as i64) as usize;
        Ok(if pos == 0 { self.params.n } else { pos })
    }

    /// Full decoding pipeline. `erasure_hints` are positions declared suspect
    /// beforehand; each costs one unit of the `n − k` budget instead of two.
    pub fn decode(&self, received: &Codeword, erasure_hints: Option<&[usize]>) -> Result<DecodeResult> {
        self.check_len(received)?;
        let CodecParams { n, k, .. } = self.params;
        let hints = self.normalize_hints(erasure_hints)?;

        let syndromes = self.syndromes_of(received.values());
        let filtered = if hints.is_empty() {
            syndromes.clone()
        } else {
            self.erasure_filter(&syndromes, &hints)
        };
        let cap = filtered.len() / 2;
        let estimate = self.estimate_error_count(&filtered).min(cap);

        let fit = if estimate == 0 {
            self.fit_sparse(&syndromes, &filtered, &hints, 0, 0, f64::INFINITY)?
        } else {
            let accept = self.params.rank_tolerance * norm(&syndromes);
            self.fit_sparse(&syndromes, &filtered, &hints, estimate, cap, accept)?
        };
        let unknown = fit.positions.iter().filter(|p| !hints.contains(p)).count();
        debug_assert!(hints.len() + 2 * unknown <= n - k, "decoder budget exceeded");

        let mut corrected = received.values().to_vec();
        for (p, v) in fit.positions.iter().zip(&fit.values) {
            corrected[p - 1] -= v;
        }
        let message = self.interpolate(&corrected);

        let mut energies = vec![0.0; n];
        let mut error_positions = Vec::new();
        let mut error_values = Vec::new();
        for (&p, &v) in fit.positions.iter().zip(&fit.values) {
            energies[p - 1] = v.norm();
            if v.norm() > self.params.noise_floor {
                error_positions.push(p);
                error_values.push(v);
            }
        }

        let floor = self.params.noise_floor;
        let received_norm = received.norm();
        let evidence_source = if estimate == 0
            && fit.residual_norm > self.params.probe_tolerance * received_norm
        {
            // Nothing crossed the detection threshold but the word is not
            // clean to round-off: look for structure below the threshold.
            self.probe(&fit.residual, &mut energies, &fit.positions)
        } else {
            fit.residual.clone()
        };
        for (i, e) in self.min_norm_magnitudes(&evidence_source).into_iter().enumerate() {
            if !fit.positions.contains(&(i + 1)) && energies[i] == 0.0 {
                energies[i] = e.min(floor);
            }
        }

        let reencoded = self.evaluate(&message, n);
        let residual = norm_diff(&reencoded, &corrected);
        let result = DecodeResult {
            message,
            error_positions,
            error_values,
            position_energies: energies,
            residual,
            erasures_used: hints.len(),
        };
        let limit = 1e3 * floor * received_norm;
        if residual > limit {
            return Err(FortaError::DecodeUnreliable {
                residual,
                limit,
                partial: Box::new(result),
            });
        }
        Ok(result)
    }

    /// The received word interpolated without correction, with uncapped
    /// minimum-norm energies. Stands in for a decode that failed outright.
    pub fn uncorrected(&self, received: &Codeword) -> Result<DecodeResult> {
        self.check_len(received)?;
        let syndromes = self.syndromes_of(received.values());
        let message = self.interpolate(received.values());
        let reencoded = self.evaluate(&message, self.params.n);
        Ok(DecodeResult {
            residual: norm_diff(&reencoded, received.values()),
            message,
            error_positions: Vec::new(),
            error_values: Vec::new(),
            position_energies: self.min_norm_magnitudes(&syndromes),
            erasures_used: 0,
        })
    }

    /// Sub-threshold evidence: fit sparse structure to residual syndromes
    /// using the relative rank only. Writes capped magnitudes for the probed
    /// positions and returns what the probe leaves unexplained.
    fn probe(&self, residual: &[Complex64], energies: &mut [f64], fixed: &[usize]) -> Vec<Complex64> {
        let cap = residual.len() / 2;
        if cap == 0 {
            return residual.to_vec();
        }
        let sv = hankel_singular_values(residual);
        if sv[0] == 0.0 {
            return residual.to_vec();
        }
        let rank = self.relative_rank(&sv, cap).max(1);
        let accept = self.params.rank_tolerance * norm(residual);
        match self.fit_sparse(residual, residual, &[], rank, cap, accept) {
            Ok(fit) => {
                for (&p, v) in fit.positions.iter().zip(&fit.values) {
                    if !fixed.contains(&p) {
                        energies[p - 1] = v.norm().min(self.params.noise_floor);
                    }
                }
                fit.residual
            }
            Err(_) => residual.to_vec(),
        }
    }

    /// Locate-and-solve with escalation: starting from `start` unknown errors,
    /// accept the first support whose least-squares fit explains the full
    /// syndrome vector to within `accept`; otherwise return the best fit seen.
    fn fit_sparse(
        &self,
        full: &[Complex64],
        filtered: &[Complex64],
        fixed: &[usize],
        start: usize,
        cap: usize,
        accept: f64,
    ) -> Result<SparseFit> {
        let mut best: Option<SparseFit> = None;
        let mut last_err = None;
        for count in start..=cap.max(start) {
            let located = if count == 0 {
                Vec::new()
            } else {
                match self.locate_errors(filtered, count) {
                    Ok(p) => p,
                    Err(e) => {
                        last_err = Some(e);
                        continue;
                    }
                }
            };
            let mut positions: Vec<usize> = fixed.iter().copied().chain(located).collect();
            positions.sort_unstable();
            positions.dedup();
            let values = self.solve_values(full, &positions);
            let residual = self.syndrome_residual(full, &positions, &values);
            let residual_norm = norm(&residual);
            let fit = SparseFit {
                positions,
                values,
                residual,
                residual_norm,
            };
            if fit.residual_norm <= accept {
                return Ok(fit);
            }
            if best.as_ref().is_none_or(|b| fit.residual_norm < b.residual_norm) {
                best = Some(fit);
            }
        }
        match (best, last_err) {
            (Some(fit), _) => Ok(fit),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("at least one support size is always tried"),
        }
    }

    /// Least-squares error values at `positions` from `S_j = Σ_p (e_p/n) ω_p^j`.
    fn solve_values(&self, syndromes: &[Complex64], positions: &[usize]) -> Vec<Complex64> {
        if positions.is_empty() {
            return Vec::new();
        }
        let scale = 1.0 / self.params.n as f64;
        let g = DMatrix::from_fn(syndromes.len(), positions.len(), |j, c| {
            self.power(positions[c], j as i64 + 1) * scale
        });
        let b = DVector::from_column_slice(syndromes);
        least_squares(g, &b).iter().copied().collect()
    }

    fn syndrome_residual(&self, syndromes: &[Complex64], positions: &[usize], values: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / self.params.n as f64;
        syndromes
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let model = positions
                    .iter()
                    .zip(values)
                    .fold(ZERO, |acc, (&p, v)| acc + v * self.power(p, j as i64 + 1));
                s - model * scale
            })
            .collect()
    }

    /// Minimum-norm per-position error magnitudes consistent with `syndromes`.
    fn min_norm_magnitudes(&self, syndromes: &[Complex64]) -> Vec<f64> {
        let n = self.params.n;
        (1..=n).map(|i| self.dft_sum(syndromes, 1, n - i).norm()).collect()
    }

    /// Annihilate erasure positions: `T_j = Σ_l g_l S_{j+l}` with
    /// `Σ_l g_l z^l = Π_{p∈E} (z − ω_p)`.
    fn erasure_filter(&self, syndromes: &[Complex64], erasures: &[usize]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(1.0, 0.0)];
        for &p in erasures {
            let w = self.evaluation_point(p);
            let mut next = vec![ZERO; g.len() + 1];
            for (l, c) in g.iter().enumerate() {
                next[l + 1] += c;
                next[l] -= w * c;
            }
            g = next;
        }
        let out_len = syndromes.len().saturating_sub(erasures.len());
        (0..out_len)
            .map(|j| g.iter().enumerate().fold(ZERO, |acc, (l, c)| acc + c * syndromes[j + l]))
            .collect()
    }

    /// First k coefficients of the inverse DFT, `m_t = (1/n) Σ_i y_i ω_i^{−t}`.
    fn interpolate(&self, word: &[Complex64]) -> Vec<Complex64> {
        let CodecParams { n, k, .. } = self.params;
        let scale = 1.0 / n as f64;
        (0..k).map(|t| self.dft_sum(word, 1, n - t) * scale).collect()
    }

    fn normalize_hints(&self, hints: Option<&[usize]>) -> Result<Vec<usize>> {
        let CodecParams { n, k, .. } = self.params;
        let mut hints: Vec<usize> = hints.map(<[usize]>::to_vec).unwrap_or_default();
        if let Some(&bad) = hints.iter().find(|&&p| p == 0 || p > n) {
            return Err(FortaError::invalid_argument(format!(
                "erasure hint {bad} outside positions 1..={n}"
            )));
        }
        hints.sort_unstable();
        hints.dedup();
        if hints.len() > n - k {
            return Err(FortaError::invalid_argument(format!(
                "{} erasure hints exceed the redundancy n - k = {}",
                hints.len(),
                n - k
            )));
        }
        Ok(hints)
    }
}

fn hankel_shape(len: usize) -> (usize, usize) {
    let rows = len / 2;
    (rows, len + 1 - rows)
}

fn hankel_frobenius(s: &[Complex64]) -> f64 {
    let (rows, cols) = hankel_shape(s.len());
    let mut acc = 0.0;
    for a in 0..rows {
        for b in 0..cols {
            acc += s[a + b].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Singular values of the syndrome Hankel matrix, descending.
fn hankel_singular_values(s: &[Complex64]) -> Vec<f64> {
    let (rows, cols) = hankel_shape(s.len());
    let h = DMatrix::from_fn(rows, cols, |a, b| s[a + b]);
    let mut sv: Vec<f64> = h.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Least squares by Householder QR; SVD with truncation when R is close to singular.
fn least_squares(a: DMatrix<Complex64>, b: &DVector<Complex64>) -> DVector<Complex64> {
    let cols = a.ncols();
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    if dmax > 0.0 && diag.iter().all(|&d| d > 1e-10 * dmax) {
        let qtb = qr.q().adjoint() * b;
        if let Some(x) = r.solve_upper_triangular(&qtb) {
            return x;
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (smax * 1e-13).max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::from_element(cols, ZERO))
}

/// Eigenvalues of the companion matrix of `z^ν + a_1 z^{ν−1} + … + a_ν`.
fn companion_roots(coeffs: &DVector<Complex64>) -> Result<Vec<Complex64>> {
    let count = coeffs.len();
    let companion = DMatrix::from_fn(count, count, |r, c| {
        if r == 0 {
            -coeffs[c]
        } else if r == c + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            ZERO
        }
    });
    Schur::try_new(companion, 1e-15, 10_000)
        .map(|schur| schur.unpack().1.diagonal().iter().copied().collect())
        .ok_or(FortaError::LocalizationFailure {
            root: Complex64::new(f64::NAN, f64::NAN),
        })
}

fn horner(poly: &[Complex64], z: Complex64) -> Complex64 {
    poly.iter().fold(ZERO, |acc, c| acc * z + c)
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

fn norm_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}
