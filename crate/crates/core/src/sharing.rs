//! Analog secret sharing of real-valued updates.
//!
//! User `i` hides `w_i` as the constant term of a degree-`T` polynomial with
//! complex Gaussian coefficients and hands `P_i(ω_j)` to user `j`. Holders
//! report pairwise share differences, which the server decodes coordinate by
//! coordinate to obtain `w_j − w_k`; the same machinery sums the shares of a
//! selected set for the final aggregate.

use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::codec::{CodecParams, Codeword, DecodeResult, DftCodec};
use crate::error::{FortaError, Result};
use crate::rng::{self, purpose};
use crate::select::SelectionSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharingParams {
    pub n_users: usize,
    pub collusion_threshold: usize,
    /// Total masking standard deviation per coordinate, `σ_n`.
    pub privacy_sigma: f64,
    /// Scale of the synthetic finite-precision term added to the secret.
    pub injected_precision_sigma: f64,
    pub rng_seed: u64,
}

impl SharingParams {
    pub fn validate(&self) -> Result<()> {
        if self.collusion_threshold < 1 {
            return Err(FortaError::invalid_configuration("collusion threshold T must be at least 1"));
        }
        if self.n_users <= self.collusion_threshold + 1 {
            return Err(FortaError::invalid_configuration(format!(
                "need N > T + 1 (N = {}, T = {})",
                self.n_users, self.collusion_threshold
            )));
        }
        if !(self.privacy_sigma > 0.0 && self.privacy_sigma.is_finite()) {
            return Err(FortaError::invalid_configuration("privacy_sigma must be positive"));
        }
        if !(self.injected_precision_sigma >= 0.0 && self.injected_precision_sigma.is_finite()) {
            return Err(FortaError::invalid_configuration(
                "injected_precision_sigma must be non-negative",
            ));
        }
        Ok(())
    }

    /// Parameters of the `(N, T+1)` code the shares live in.
    pub fn codec_params(&self) -> CodecParams {
        CodecParams::new(self.n_users, self.collusion_threshold + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Share {
    pub owner: usize,
    pub holder: usize,
    pub payload: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMessage {
    pub reporter: usize,
    /// Ordered pair `(j, k)`, `j < k`; the payload is `s_ji − s_ki`.
    pub pair: (usize, usize),
    pub payload: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationMessage {
    pub holder: usize,
    pub payload: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub secret: Vec<f64>,
    /// Largest imaginary part seen in a decoded constant term.
    pub max_imaginary_residue: f64,
    pub per_coordinate_error_positions: Vec<Vec<usize>>,
    /// Decoder evidence per coordinate, consumed by the joint localizer.
    pub position_energies: Vec<Vec<f64>>,
    pub decode_failures: usize,
    pub total_codewords: usize,
}

/// All unordered user pairs `(j, k)`, `1 ≤ j < k ≤ n`, in lexicographic order.
pub fn user_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..=n)
        .flat_map(|j| ((j + 1)..=n).map(move |k| (j, k)))
        .collect()
}

/// Evaluations of the owner's sharing polynomial at every `ω_j`.
pub fn make_shares(update: &[f64], params: &SharingParams, owner: usize) -> Result<Vec<Share>> {
    params.validate()?;
    let n = params.n_users;
    let t = params.collusion_threshold;
    if update.is_empty() {
        return Err(FortaError::invalid_argument("update must have at least one coordinate"));
    }
    if owner == 0 || owner > n {
        return Err(FortaError::invalid_argument(format!("owner {owner} outside 1..={n}")));
    }
    if update.iter().any(|v| !v.is_finite()) {
        return Err(FortaError::invalid_argument(format!("update of user {owner} is not finite")));
    }
    let codec = DftCodec::new(params.codec_params())?;
    let mut rng = rng::stream(params.rng_seed, &[purpose::SHARES, owner as u64]);
    // CN(0, σ²/T): each real component carries half the variance.
    let component = Normal::new(0.0, (params.privacy_sigma.powi(2) / (2.0 * t as f64)).sqrt())
        .expect("validated sigma");
    let precision = (params.injected_precision_sigma > 0.0)
        .then(|| Normal::new(0.0, params.injected_precision_sigma).expect("validated sigma"));

    let d = update.len();
    let mut payloads = vec![Vec::with_capacity(d); n];
    let mut coeffs = vec![Complex64::new(0.0, 0.0); t + 1];
    for &w in update {
        let eps = precision.as_ref().map_or(0.0, |p| p.sample(&mut rng));
        coeffs[0] = Complex64::new(w + eps, 0.0);
        for c in coeffs.iter_mut().skip(1) {
            *c = Complex64::new(component.sample(&mut rng), component.sample(&mut rng));
        }
        let word = codec.encode(&coeffs)?;
        for (payload, v) in payloads.iter_mut().zip(word.values()) {
            payload.push(*v);
        }
    }
    Ok(payloads
        .into_iter()
        .enumerate()
        .map(|(j, payload)| Share {
            owner,
            holder: j + 1,
            payload,
        })
        .collect())
}

/// Check that `held` has exactly one share per owner and a single holder;
/// returns the holder and the shares indexed by `owner - 1`.
fn index_held(held: &[Share], n_users: usize) -> Result<(usize, Vec<&Share>)> {
    let holder = held
        .first()
        .map(|s| s.holder)
        .ok_or_else(|| FortaError::ProtocolViolation("holder has no shares".into()))?;
    let mut by_owner: Vec<Option<&Share>> = vec![None; n_users];
    for share in held {
        if share.holder != holder {
            return Err(FortaError::ProtocolViolation(format!(
                "share from owner {} addressed to holder {} found at holder {holder}",
                share.owner, share.holder
            )));
        }
        if share.owner == 0 || share.owner > n_users {
            return Err(FortaError::ProtocolViolation(format!(
                "share from unknown owner {}",
                share.owner
            )));
        }
        if by_owner[share.owner - 1].replace(share).is_some() {
            return Err(FortaError::ProtocolViolation(format!(
                "holder {holder} received two shares from owner {}",
                share.owner
            )));
        }
    }
    let dim = held[0].payload.len();
    let mut out = Vec::with_capacity(n_users);
    for (i, s) in by_owner.into_iter().enumerate() {
        let s = s.ok_or_else(|| {
            FortaError::ProtocolViolation(format!("holder {holder} is missing the share of owner {}", i + 1))
        })?;
        if s.payload.len() != dim {
            return Err(FortaError::ProtocolViolation(format!(
                "share of owner {} has dimension {} instead of {dim}",
                s.owner,
                s.payload.len()
            )));
        }
        out.push(s);
    }
    Ok((holder, out))
}

/// Pairwise share differences a holder reports, one per pair `j < k`.
pub fn difference_messages(held: &[Share], n_users: usize) -> Result<Vec<DifferenceMessage>> {
    let (holder, shares) = index_held(held, n_users)?;
    Ok(user_pairs(n_users)
        .into_iter()
        .map(|(j, k)| DifferenceMessage {
            reporter: holder,
            pair: (j, k),
            payload: shares[j - 1]
                .payload
                .iter()
                .zip(&shares[k - 1].payload)
                .map(|(a, b)| a - b)
                .collect(),
        })
        .collect())
}

fn transpose_reports<'a>(
    n_users: usize,
    reports: impl Iterator<Item = (usize, &'a [Complex64])>,
) -> Result<Vec<Codeword>> {
    let mut rows: Vec<Option<&[Complex64]>> = vec![None; n_users];
    for (reporter, payload) in reports {
        if reporter == 0 || reporter > n_users {
            return Err(FortaError::ProtocolViolation(format!("unknown reporter {reporter}")));
        }
        if rows[reporter - 1].replace(payload).is_some() {
            return Err(FortaError::ProtocolViolation(format!("duplicate report from user {reporter}")));
        }
    }
    let mut columns = Vec::with_capacity(n_users);
    for (i, row) in rows.into_iter().enumerate() {
        columns.push(row.ok_or_else(|| {
            FortaError::ProtocolViolation(format!("missing report from user {}", i + 1))
        })?);
    }
    let d = columns[0].len();
    if let Some(bad) = columns.iter().position(|c| c.len() != d) {
        return Err(FortaError::ProtocolViolation(format!(
            "report from user {} has dimension {} instead of {d}",
            bad + 1,
            columns[bad].len()
        )));
    }
    (0..d)
        .map(|l| Codeword::new(columns.iter().map(|c| c[l]).collect()))
        .collect()
}

/// The `d` codewords of one pair: codeword `l` holds coordinate `l` of every
/// reporter's difference, in reporter order.
pub fn assemble_codewords(messages: &[DifferenceMessage], n_users: usize) -> Result<Vec<Codeword>> {
    let pair = messages
        .first()
        .map(|m| m.pair)
        .ok_or_else(|| FortaError::ProtocolViolation("no difference messages".into()))?;
    if let Some(m) = messages.iter().find(|m| m.pair != pair) {
        return Err(FortaError::ProtocolViolation(format!(
            "message for pair {:?} mixed into pair {pair:?}",
            m.pair
        )));
    }
    transpose_reports(n_users, messages.iter().map(|m| (m.reporter, m.payload.as_slice())))
}

pub fn assemble_aggregate(messages: &[AggregationMessage], n_users: usize) -> Result<Vec<Codeword>> {
    transpose_reports(n_users, messages.iter().map(|m| (m.holder, m.payload.as_slice())))
}

/// Decode every coordinate independently and read the secret off the
/// constant term. Failed coordinates keep their partial value and are counted.
pub fn reconstruct(codewords: &[Codeword], codec: &DftCodec, hints: Option<&[usize]>) -> ReconstructionReport {
    let mut report = ReconstructionReport {
        secret: Vec::with_capacity(codewords.len()),
        max_imaginary_residue: 0.0,
        per_coordinate_error_positions: Vec::with_capacity(codewords.len()),
        position_energies: Vec::with_capacity(codewords.len()),
        decode_failures: 0,
        total_codewords: codewords.len(),
    };
    for word in codewords {
        let result: DecodeResult = match codec.decode(word, hints) {
            Ok(r) => r,
            Err(FortaError::DecodeUnreliable { partial, .. }) => {
                report.decode_failures += 1;
                *partial
            }
            Err(_) => {
                report.decode_failures += 1;
                match codec.uncorrected(word) {
                    Ok(r) => r,
                    Err(_) => {
                        report.secret.push(f64::NAN);
                        report.per_coordinate_error_positions.push(Vec::new());
                        report.position_energies.push(vec![0.0; codec.params().n]);
                        continue;
                    }
                }
            }
        };
        let constant = result.constant_term();
        report.max_imaginary_residue = report.max_imaginary_residue.max(constant.im.abs());
        report.secret.push(constant.re);
        report.per_coordinate_error_positions.push(result.error_positions);
        report.position_energies.push(result.position_energies);
    }
    report
}

/// Sum of the shares a holder received from the selected owners.
pub fn aggregation_message(held: &[Share], selected: &SelectionSet, n_users: usize) -> Result<AggregationMessage> {
    if selected.users.is_empty() {
        return Err(FortaError::invalid_argument("selection is empty"));
    }
    let (holder, shares) = index_held(held, n_users)?;
    let d = shares[0].payload.len();
    let mut payload = vec![Complex64::new(0.0, 0.0); d];
    for &j in &selected.users {
        let share = shares.get(j.wrapping_sub(1)).ok_or_else(|| {
            FortaError::ProtocolViolation(format!("selected user {j} has no share at holder {holder}"))
        })?;
        for (acc, v) in payload.iter_mut().zip(&share.payload) {
            *acc += v;
        }
    }
    Ok(AggregationMessage { holder, payload })
}

/// Debug dump: one CSV row per share coordinate.
pub fn write_share_dump<W: Write>(writer: W, round: usize, shares: &[Share]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["round", "owner", "holder", "coordinate", "re", "im"])?;
    for share in shares {
        for (l, v) in share.payload.iter().enumerate() {
            out.write_record([
                round.to_string(),
                share.owner.to_string(),
                share.holder.to_string(),
                (l + 1).to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
