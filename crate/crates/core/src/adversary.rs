//! Byzantine behaviour: poisoned updates, corrupted protocol messages and
//! the sub-threshold attack that hides in the decoder's noise floor.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::CodecParams;
use crate::error::{FortaError, Result};
use crate::rng::{self, purpose};
use crate::sharing::{AggregationMessage, DifferenceMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    Scale,
    AdditiveNoise,
    ShareCorrupt,
    PrecisionMimic,
    /// Scale the update and corrupt the reported shares.
    Combined,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        Self::None,
        Self::Scale,
        Self::AdditiveNoise,
        Self::ShareCorrupt,
        Self::PrecisionMimic,
        Self::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Scale => "scale",
            Self::AdditiveNoise => "additive_noise",
            Self::ShareCorrupt => "share_corrupt",
            Self::PrecisionMimic => "precision_mimic",
            Self::Combined => "combined",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = FortaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| FortaError::invalid_argument(format!("unknown attack kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub magnitude: f64,
    /// Message corruption scale for `Combined`.
    pub share_magnitude: f64,
    /// Scale by `−magnitude`: the update points against the honest direction.
    pub reverse: bool,
    pub byzantine: Vec<usize>,
    pub collusion: Vec<usize>,
    pub rng_seed: u64,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            magnitude: 0.0,
            share_magnitude: 0.0,
            reverse: false,
            byzantine: Vec::new(),
            collusion: Vec::new(),
            rng_seed: 0,
        }
    }

    pub fn is_byzantine(&self, user: usize) -> bool {
        self.byzantine.contains(&user)
    }

    /// Checks the threat model against the protocol bounds.
    pub fn validate(&self, n_users: usize, max_byzantine: usize, max_collusion: usize) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite())
            || !(self.share_magnitude >= 0.0 && self.share_magnitude.is_finite())
        {
            return Err(FortaError::invalid_configuration("attack magnitudes must be finite and non-negative"));
        }
        for (name, set, bound) in [
            ("byzantine", &self.byzantine, max_byzantine),
            ("collusion", &self.collusion, max_collusion),
        ] {
            if set.len() > bound {
                return Err(FortaError::invalid_configuration(format!(
                    "{name} set has {} users, bound is {bound}",
                    set.len()
                )));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(FortaError::invalid_configuration(format!("{name} set has duplicates")));
            }
            if let Some(u) = set.iter().find(|&&u| u == 0 || u > n_users) {
                return Err(FortaError::invalid_configuration(format!("{name} user {u} outside 1..={n_users}")));
            }
        }
        Ok(())
    }

    fn corrupts_messages(&self) -> bool {
        matches!(self.kind, AttackKind::ShareCorrupt | AttackKind::Combined | AttackKind::PrecisionMimic)
    }

    fn message_scale(&self) -> f64 {
        match self.kind {
            AttackKind::Combined => self.share_magnitude,
            _ => self.magnitude,
        }
    }
}

fn user_stream(spec: &AttackSpec, tag: u64, round: usize, user: usize) -> ChaCha8Rng {
    rng::stream(spec.rng_seed, &[tag, round as u64, user as u64])
}

/// Model poisoning of a local update; honest users pass through.
pub fn poison_update(update: &[f64], spec: &AttackSpec, user: usize, round: usize) -> Vec<f64> {
    if !spec.is_byzantine(user) {
        return update.to_vec();
    }
    match spec.kind {
        AttackKind::Scale | AttackKind::Combined => {
            let factor = if spec.reverse { -spec.magnitude } else { spec.magnitude };
            update.iter().map(|v| v * factor).collect()
        }
        AttackKind::AdditiveNoise if spec.magnitude > 0.0 => {
            let mut rng = user_stream(spec, purpose::POISON, round, user);
            let noise = Normal::new(0.0, spec.magnitude).expect("validated magnitude");
            update.iter().map(|v| v + noise.sample(&mut rng)).collect()
        }
        _ => update.to_vec(),
    }
}

fn complex_gaussian(rng: &mut impl Rng, dist: &Normal<f64>) -> Complex64 {
    Complex64::new(dist.sample(rng), dist.sample(rng))
}

fn corrupt_payloads<'a>(
    payloads: impl Iterator<Item = &'a mut Vec<Complex64>>,
    spec: &AttackSpec,
    noise_floor: f64,
    rng: &mut ChaCha8Rng,
) {
    let scale = spec.message_scale();
    if scale == 0.0 {
        return;
    }
    match spec.kind {
        AttackKind::ShareCorrupt | AttackKind::Combined => {
            // total variance `scale²` per complex entry
            let dist = Normal::new(0.0, scale / std::f64::consts::SQRT_2).expect("validated magnitude");
            for payload in payloads {
                for v in payload.iter_mut() {
                    *v += complex_gaussian(rng, &dist);
                }
            }
        }
        AttackKind::PrecisionMimic => {
            // one common phase so the bias adds up coherently
            let amplitude = scale * noise_floor;
            for payload in payloads {
                for v in payload.iter_mut() {
                    *v += Complex64::new(amplitude * rng.random_range(0.5..1.0), 0.0);
                }
            }
        }
        _ => {}
    }
}

/// Share corruption of a reporter's difference messages.
pub fn corrupt_messages(
    messages: Vec<DifferenceMessage>,
    spec: &AttackSpec,
    round: usize,
) -> Vec<DifferenceMessage> {
    if !matches!(spec.kind, AttackKind::ShareCorrupt | AttackKind::Combined) {
        return messages;
    }
    apply_to_reports(messages, spec, 0.0, round)
}

/// Sub-threshold common-phase perturbation of a reporter's messages, scaled
/// by the decoder's noise floor.
pub fn precision_mimic(
    messages: Vec<DifferenceMessage>,
    spec: &AttackSpec,
    codec: &CodecParams,
    round: usize,
) -> Vec<DifferenceMessage> {
    if spec.kind != AttackKind::PrecisionMimic {
        return messages;
    }
    apply_to_reports(messages, spec, codec.noise_floor, round)
}

fn apply_to_reports(
    mut messages: Vec<DifferenceMessage>,
    spec: &AttackSpec,
    noise_floor: f64,
    round: usize,
) -> Vec<DifferenceMessage> {
    let Some(reporter) = messages.first().map(|m| m.reporter) else {
        return messages;
    };
    if !spec.is_byzantine(reporter) {
        return messages;
    }
    let mut rng = user_stream(spec, purpose::MESSAGES, round, reporter);
    corrupt_payloads(messages.iter_mut().map(|m| &mut m.payload), spec, noise_floor, &mut rng);
    messages
}

/// Whatever corruption the attack applies to difference reports, applied to
/// a holder's aggregation message as well.
pub fn corrupt_aggregation(
    mut message: AggregationMessage,
    spec: &AttackSpec,
    codec: &CodecParams,
    round: usize,
) -> AggregationMessage {
    if !spec.corrupts_messages() || !spec.is_byzantine(message.holder) {
        return message;
    }
    let mut rng = user_stream(spec, purpose::AGGREGATE, round, message.holder);
    corrupt_payloads(std::iter::once(&mut message.payload), spec, codec.noise_floor, &mut rng);
    message
}

/// Applies whichever message attack is configured to one reporter's batch.
pub fn attack_reports(
    messages: Vec<DifferenceMessage>,
    spec: &AttackSpec,
    codec: &CodecParams,
    round: usize,
) -> Vec<DifferenceMessage> {
    match spec.kind {
        AttackKind::PrecisionMimic => precision_mimic(messages, spec, codec, round),
        _ => corrupt_messages(messages, spec, round),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: AttackKind, magnitude: f64) -> AttackSpec {
        AttackSpec {
            kind,
            magnitude,
            share_magnitude: magnitude,
            reverse: false,
            byzantine: vec![2, 5],
            collusion: vec![],
            rng_seed: 11,
        }
    }

    fn reports(reporter: usize) -> Vec<DifferenceMessage> {
        vec![
            DifferenceMessage { reporter, pair: (1, 2), payload: vec![Complex64::new(1.0, -1.0); 4] },
            DifferenceMessage { reporter, pair: (1, 3), payload: vec![Complex64::new(0.5, 0.0); 4] },
        ]
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in AttackKind::ALL {
            assert_eq!(k.as_str().parse::<AttackKind>().unwrap(), k);
        }
    }

    #[test]
    fn update_poisoning() {
        let u = vec![1.0, -2.0, 0.5];
        assert_eq!(poison_update(&u, &spec(AttackKind::Scale, 10.0), 2, 0), vec![10.0, -20.0, 5.0]);
        assert_eq!(poison_update(&u, &spec(AttackKind::None, 10.0), 2, 0), u);
        let reversed = AttackSpec { reverse: true, ..spec(AttackKind::Scale, 10.0) };
        assert_eq!(poison_update(&u, &reversed, 2, 0), vec![-10.0, 20.0, -5.0]);
        assert_eq!(poison_update(&u, &spec(AttackKind::AdditiveNoise, 0.0), 2, 0), u);
        let noisy = poison_update(&u, &spec(AttackKind::AdditiveNoise, 1.0), 5, 3);
        assert_ne!(noisy, u);
        assert_eq!(noisy, poison_update(&u, &spec(AttackKind::AdditiveNoise, 1.0), 5, 3));
        assert_ne!(noisy, poison_update(&u, &spec(AttackKind::AdditiveNoise, 1.0), 5, 4));
    }

    #[test]
    fn honest_users_untouched() {
        let codec = CodecParams::new(30, 10);
        let u = vec![1.0, 2.0];
        for kind in AttackKind::ALL {
            let s = spec(kind, 3.0);
            assert_eq!(poison_update(&u, &s, 1, 0), u);
            assert_eq!(attack_reports(reports(3), &s, &codec, 0), reports(3));
            let agg = AggregationMessage { holder: 4, payload: vec![Complex64::new(1.0, 0.0)] };
            assert_eq!(corrupt_aggregation(agg.clone(), &s, &codec, 0), agg);
        }
    }

    #[test]
    fn share_corruption() {
        let s = spec(AttackKind::ShareCorrupt, 1.0);
        let out = corrupt_messages(reports(2), &s, 0);
        assert!(out.iter().zip(reports(2)).all(|(a, b)| a.payload.iter().zip(&b.payload).all(|(x, y)| x != y)));
        assert_eq!(out, corrupt_messages(reports(2), &s, 0));
        assert_eq!(corrupt_messages(reports(2), &spec(AttackKind::ShareCorrupt, 0.0), 0), reports(2));
    }

    #[test]
    fn mimic_is_small_and_coherent() {
        let codec = CodecParams::new(30, 10);
        let s = spec(AttackKind::PrecisionMimic, 2.0);
        let out = precision_mimic(reports(5), &s, &codec, 1);
        for (a, b) in out.iter().zip(reports(5)) {
            for (x, y) in a.payload.iter().zip(&b.payload) {
                let delta = x - y;
                assert_eq!(delta.im, 0.0);
                assert!(delta.re >= 1e-9 - 1e-22 && delta.re <= 2e-9 + 1e-22, "{delta}");
            }
        }
        assert_eq!(precision_mimic(reports(5), &spec(AttackKind::PrecisionMimic, 0.0), &codec, 1), reports(5));
    }

    #[test]
    fn threat_model_bounds() {
        let s = spec(AttackKind::Scale, 10.0);
        assert!(s.validate(30, 10, 9).is_ok());
        assert!(s.validate(30, 1, 9).is_err());
        assert!(s.validate(4, 10, 9).is_err());
        let mut dup = s.clone();
        dup.byzantine = vec![3, 3];
        assert!(dup.validate(30, 10, 9).is_err());
        let mut neg = s;
        neg.magnitude = -1.0;
        assert!(neg.validate(30, 10, 9).is_err());
    }
}
