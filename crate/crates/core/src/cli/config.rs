//! TOML run configuration. Unknown keys and constraint violations are
//! reported with the dotted key that caused them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackSpec};
use crate::codec::{CodecParams, DEFAULT_NOISE_FLOOR, DEFAULT_PROBE_TOLERANCE, DEFAULT_RANK_TOLERANCE};
use crate::error::{FortaError, Result};
use crate::harness::task::{BlobSpec, CsvSpec};
use crate::harness::{GlobalStep, TaskSpec, TrainingConfig};
use crate::localizer::LocalizerParams;
use crate::select::{AggregationRule, DEFAULT_TEMPERATURE};
use crate::theory::FeedbackStats;

pub const SEED_ENV: &str = "FORTA_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "A")]
    pub a: usize,
    pub m: usize,
    #[serde(default = "d::rounds")]
    pub rounds: usize,
    #[serde(default = "d::learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_decay: f64,
    #[serde(default = "d::batch_size")]
    pub batch_size: usize,
    #[serde(default = "d::one")]
    pub local_steps: usize,
    #[serde(default = "d::rules")]
    pub rules: Vec<AggregationRule>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d::one_f")]
    pub privacy_sigma: f64,
    #[serde(default = "d::injected")]
    pub injected_precision_sigma: f64,
    #[serde(default)]
    pub global_step: GlobalStep,
    #[serde(default = "d::temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    #[serde(default = "d::rank_tolerance")]
    pub rank_tolerance: f64,
    /// Defaults to π/N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_match_tolerance: Option<f64>,
    #[serde(default = "d::noise_floor")]
    pub noise_floor: f64,
    #[serde(default = "d::probe_tolerance")]
    pub probe_tolerance: f64,
    #[serde(default = "d::gmm_max_iters")]
    pub gmm_max_iters: usize,
    #[serde(default = "d::gmm_tol")]
    pub gmm_tol: f64,
    #[serde(default = "d::min_log_separation")]
    pub min_log_separation: f64,
    #[serde(default = "d::outlier_z")]
    pub outlier_z: f64,
    #[serde(default = "d::hint_floor")]
    pub hint_floor: f64,
    #[serde(default = "d::max_fit_samples")]
    pub max_fit_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Blobs,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    #[serde(default)]
    pub kind: TaskKind,
    #[serde(default = "d::features")]
    pub features: usize,
    #[serde(default = "d::classes")]
    pub classes: usize,
    #[serde(default = "d::one_f")]
    pub spread: f64,
    #[serde(default = "d::one_f")]
    pub center_scale: f64,
    #[serde(default = "d::samples_per_user")]
    pub samples_per_user: usize,
    #[serde(default = "d::test_samples")]
    pub test_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "d::test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default)]
    pub kind: AttackKind,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default = "d::one_f")]
    pub share_magnitude: f64,
    #[serde(default)]
    pub reverse: bool,
    /// Empty means `A` users drawn from the seed.
    #[serde(default)]
    pub byzantine: Vec<usize>,
    #[serde(default)]
    pub collusion: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default = "d::sigma_g")]
    pub sigma_g: f64,
    #[serde(default = "d::sigma_eps")]
    pub sigma_eps: f64,
    #[serde(default = "d::one_f")]
    pub g_norm: f64,
    /// Defaults to the model dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Given statistics skip the estimation run.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "mu_T")]
    pub mu_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "sigma_T")]
    pub sigma_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "mu_Q")]
    pub mu_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "sigma_Q")]
    pub sigma_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "C1")]
    pub c1: Option<f64>,
    #[serde(default = "d::estimate_rounds")]
    pub estimate_rounds: usize,
    #[serde(default = "d::surrogate_samples")]
    pub surrogate_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d::out_dir")]
    pub dir: PathBuf,
    #[serde(default = "d::yes")]
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub protocol: ProtocolSection,
    #[serde(default = "d::codec")]
    pub codec: CodecSection,
    #[serde(default = "d::task")]
    pub task: TaskSection,
    #[serde(default = "d::attack")]
    pub attack: AttackSection,
    #[serde(default = "d::theory")]
    pub theory: TheorySection,
    #[serde(default = "d::output")]
    pub output: OutputSection,
}

/// Serde defaults.
mod d {
    use super::*;

    pub fn rounds() -> usize { 50 }
    pub fn learning_rate() -> f64 { 0.5 }
    pub fn batch_size() -> usize { 32 }
    pub fn one() -> usize { 1 }
    pub fn one_f() -> f64 { 1.0 }
    pub fn yes() -> bool { true }
    pub fn rules() -> Vec<AggregationRule> { AggregationRule::ALL.to_vec() }
    pub fn injected() -> f64 { 1e-7 }
    pub fn temperature() -> f64 { DEFAULT_TEMPERATURE }
    pub fn rank_tolerance() -> f64 { DEFAULT_RANK_TOLERANCE }
    pub fn noise_floor() -> f64 { DEFAULT_NOISE_FLOOR }
    pub fn probe_tolerance() -> f64 { DEFAULT_PROBE_TOLERANCE }
    pub fn gmm_max_iters() -> usize { LocalizerParams::default().max_iters }
    pub fn gmm_tol() -> f64 { LocalizerParams::default().tol }
    pub fn min_log_separation() -> f64 { LocalizerParams::default().min_log_separation }
    pub fn outlier_z() -> f64 { LocalizerParams::default().outlier_z }
    pub fn hint_floor() -> f64 { LocalizerParams::default().hint_floor }
    pub fn max_fit_samples() -> usize { LocalizerParams::default().max_fit_samples }
    pub fn features() -> usize { BlobSpec::default().features }
    pub fn classes() -> usize { BlobSpec::default().classes }
    pub fn samples_per_user() -> usize { BlobSpec::default().samples_per_user }
    pub fn test_samples() -> usize { BlobSpec::default().test_samples }
    pub fn test_fraction() -> f64 { 0.2 }
    pub fn sigma_g() -> f64 { 0.01 }
    pub fn sigma_eps() -> f64 { 1e-7 }
    pub fn estimate_rounds() -> usize { 10 }
    pub fn surrogate_samples() -> usize { 2000 }
    pub fn out_dir() -> PathBuf { PathBuf::from("forta-out") }

    pub fn codec() -> CodecSection { toml::from_str("").expect("codec defaults") }
    pub fn task() -> TaskSection { toml::from_str("").expect("task defaults") }
    pub fn attack() -> AttackSection { toml::from_str("").expect("attack defaults") }
    pub fn theory() -> TheorySection { toml::from_str("").expect("theory defaults") }
    pub fn output() -> OutputSection { toml::from_str("").expect("output defaults") }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "protocol",
        &[
            "N", "T", "A", "m", "rounds", "learning_rate", "lr_decay", "batch_size", "local_steps", "rules",
            "seed", "privacy_sigma", "injected_precision_sigma", "global_step", "temperature", "hint_budget",
        ],
    ),
    (
        "codec",
        &[
            "rank_tolerance", "root_match_tolerance", "noise_floor", "probe_tolerance", "gmm_max_iters",
            "gmm_tol", "min_log_separation", "outlier_z", "hint_floor", "max_fit_samples",
        ],
    ),
    (
        "task",
        &["kind", "features", "classes", "spread", "center_scale", "samples_per_user", "test_samples", "path", "test_fraction"],
    ),
    ("attack", &["kind", "magnitude", "share_magnitude", "reverse", "byzantine", "collusion"]),
    (
        "theory",
        &["sigma_g", "sigma_eps", "g_norm", "d", "mu_T", "sigma_T", "mu_Q", "sigma_Q", "C1", "estimate_rounds", "surrogate_samples"],
    ),
    ("output", &["dir", "plot"]),
];

/// A parsed configuration: the training setup shared by every rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: FileConfig,
    pub training: TrainingConfig,
    pub rules: Vec<AggregationRule>,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl RunConfig {
    /// The resolved configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(&self.file).expect("config serializes")
    }

    pub fn for_rule(&self, rule: AggregationRule) -> TrainingConfig {
        TrainingConfig {
            rule,
            ..self.training.clone()
        }
    }

    /// Theory statistics given in the file, if all five are present.
    pub fn given_stats(&self) -> Option<FeedbackStats> {
        let t = &self.file.theory;
        Some(FeedbackStats {
            mu_t: t.mu_t?,
            sigma_t: t.sigma_t?,
            mu_q: t.mu_q?,
            sigma_q: t.sigma_q?,
            c1: t.c1?,
        })
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FortaError::config(path.display().to_string(), format!("cannot read: {e}")))?;
    let seed = std::env::var(SEED_ENV).ok();
    parse_config_str(&text, seed.as_deref())
}

/// `seed_override` takes the place of `protocol.seed` (the environment hook).
pub fn parse_config_str(text: &str, seed_override: Option<&str>) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| FortaError::config("config", e.message().to_string()))?;
    check_keys(&table)?;
    let mut file: FileConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = match message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            Some(field) => format!("protocol.{field}"),
            None => "config".to_string(),
        };
        FortaError::config(key, message)
    })?;
    if let Some(seed) = seed_override {
        file.protocol.seed = seed
            .trim()
            .parse()
            .map_err(|_| FortaError::config(SEED_ENV, format!("`{seed}` is not an unsigned integer")))?;
    }
    build(file)
}

fn check_keys(table: &toml::Table) -> Result<()> {
    if !table.contains_key("protocol") {
        return Err(FortaError::config("protocol", "missing section"));
    }
    for (section, value) in table {
        let Some((_, known)) = SECTIONS.iter().find(|(s, _)| s == section) else {
            return Err(FortaError::config(section.clone(), "unknown section"));
        };
        let inner = value
            .as_table()
            .ok_or_else(|| FortaError::config(section.clone(), "expected a table"))?;
        if let Some(key) = inner.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(FortaError::config(format!("{section}.{key}"), "unknown key"));
        }
    }
    Ok(())
}

fn build(file: FileConfig) -> Result<RunConfig> {
    let p = &file.protocol;
    let (n, t, a, m) = (p.n, p.t, p.a, p.m);
    let bad = |key: &str, msg: String| Err(FortaError::config(key, msg));
    if t < 1 {
        return bad("protocol.T", "T must be at least 1".into());
    }
    if 2 * a + 2 >= n {
        return bad("protocol.A", format!("2A + 2 < N violated (N = {n}, A = {a})"));
    }
    if n < 2 * a + t + 1 {
        return bad("protocol.N", format!("N ≥ 2A + T + 1 violated (N = {n}, T = {t}, A = {a})"));
    }
    if m == 0 || m > n - a {
        return bad("protocol.m", format!("need 1 ≤ m ≤ N − A = {}", n - a));
    }
    if p.rules.is_empty() {
        return bad("protocol.rules", "at least one rule is required".into());
    }
    if !(p.learning_rate > 0.0) {
        return bad("protocol.learning_rate", "must be positive".into());
    }
    if !(p.privacy_sigma > 0.0) {
        return bad("protocol.privacy_sigma", "must be positive".into());
    }
    if !(p.injected_precision_sigma >= 0.0) {
        return bad("protocol.injected_precision_sigma", "must be non-negative".into());
    }
    if !(p.temperature > 0.0) {
        return bad("protocol.temperature", "must be positive".into());
    }
    let at = &file.attack;
    if !(at.magnitude >= 0.0) {
        return bad("attack.magnitude", "must be non-negative".into());
    }
    if !(at.share_magnitude >= 0.0) {
        return bad("attack.share_magnitude", "must be non-negative".into());
    }
    if at.byzantine.len() > a {
        return bad("attack.byzantine", format!("{} users exceed A = {a}", at.byzantine.len()));
    }
    if at.collusion.len() > t {
        return bad("attack.collusion", format!("{} users exceed T = {t}", at.collusion.len()));
    }

    let c = &file.codec;
    let mut codec = CodecParams::new(n, t + 1);
    codec.rank_tolerance = c.rank_tolerance;
    codec.noise_floor = c.noise_floor;
    codec.probe_tolerance = c.probe_tolerance;
    if let Some(r) = c.root_match_tolerance {
        codec.root_match_tolerance = r;
    }
    codec.validate().map_err(|e| FortaError::config("codec", e.to_string()))?;
    let localizer = LocalizerParams {
        max_iters: c.gmm_max_iters,
        tol: c.gmm_tol,
        min_log_separation: c.min_log_separation,
        outlier_z: c.outlier_z,
        hint_floor: c.hint_floor,
        max_fit_samples: c.max_fit_samples,
        seed: 0,
    };
    localizer.validate().map_err(|e| FortaError::config("codec", e.to_string()))?;

    let tk = &file.task;
    let task = match tk.kind {
        TaskKind::Blobs => TaskSpec::Blobs(BlobSpec {
            features: tk.features,
            classes: tk.classes,
            spread: tk.spread,
            center_scale: tk.center_scale,
            samples_per_user: tk.samples_per_user,
            test_samples: tk.test_samples,
        }),
        TaskKind::Csv => TaskSpec::Csv(CsvSpec {
            path: tk.path.clone().ok_or_else(|| FortaError::config("task.path", "required for csv tasks"))?,
            test_fraction: tk.test_fraction,
        }),
    };
    task.validate().map_err(|e| FortaError::config("task", e.to_string()))?;

    let mut training = TrainingConfig::new(n, t, a, m);
    training.rounds = p.rounds;
    training.learning_rate = p.learning_rate;
    training.lr_decay = p.lr_decay;
    training.batch_size = p.batch_size;
    training.local_steps = p.local_steps;
    training.task = task;
    training.rule = p.rules[0];
    training.attack = AttackSpec {
        kind: at.kind,
        magnitude: at.magnitude,
        share_magnitude: at.share_magnitude,
        reverse: at.reverse,
        byzantine: at.byzantine.clone(),
        collusion: at.collusion.clone(),
        rng_seed: 0,
    };
    training.codec = codec;
    training.privacy_sigma = p.privacy_sigma;
    training.injected_precision_sigma = p.injected_precision_sigma;
    training.localizer = localizer;
    training.temperature = p.temperature;
    training.hint_budget = p.hint_budget;
    training.global_step = p.global_step;
    training.seed = p.seed;
    training.validate().map_err(|e| FortaError::config("protocol", e.to_string()))?;

    Ok(RunConfig {
        rules: p.rules.clone(),
        output_dir: file.output.dir.clone(),
        plot: file.output.plot,
        training,
        file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[protocol]\nN = 30\nT = 9\nA = 10\nm = 8\n";

    fn key_of(err: FortaError) -> String {
        match err {
            FortaError::Config { key, .. } => key,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, None).unwrap();
        assert_eq!(c.training.rounds, 50);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!(c.training.codec.k, 10);
        assert_eq!(c.rules, AggregationRule::ALL.to_vec());
        assert_eq!(c.training.attack.kind, AttackKind::None);
        assert!(c.plot);
        // the echo parses back to the same configuration
        let again = parse_config_str(&c.echo(), None).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn hypothesis_gate_names_a() {
        let err = parse_config_str("[protocol]\nN = 20\nT = 1\nA = 10\nm = 8\n", None).unwrap_err();
        assert!(err.to_string().contains("2A + 2 < N"), "{err}");
        assert_eq!(key_of(err), "protocol.A");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_str(&format!("{MINIMAL}Nusers = 3\n"), None).unwrap_err();
        assert_eq!(key_of(err), "protocol.Nusers");
        let err = parse_config_str(&format!("{MINIMAL}[plots]\nx = 1\n"), None).unwrap_err();
        assert_eq!(key_of(err), "plots");
    }

    #[test]
    fn missing_and_malformed() {
        assert_eq!(key_of(parse_config_str("[protocol]\nN = 30\nT = 9\nA = 10\n", None).unwrap_err()), "protocol.m");
        assert_eq!(key_of(parse_config_str("[protocol\n", None).unwrap_err()), "config");
        assert_eq!(key_of(parse_config_str("", None).unwrap_err()), "protocol");
        assert_eq!(key_of(parse_config_str(&format!("{MINIMAL}m = 25\n"), None).unwrap_err()), "config");
        let too_many = "[protocol]\nN = 30\nT = 9\nA = 10\nm = 21\n";
        assert_eq!(key_of(parse_config_str(too_many, None).unwrap_err()), "protocol.m");
        let neg = format!("{MINIMAL}[attack]\nkind = \"scale\"\nmagnitude = -1.0\n");
        assert_eq!(key_of(parse_config_str(&neg, None).unwrap_err()), "attack.magnitude");
        let csv = format!("{MINIMAL}[task]\nkind = \"csv\"\n");
        assert_eq!(key_of(parse_config_str(&csv, None).unwrap_err()), "task.path");
    }

    #[test]
    fn seed_override() {
        let c = parse_config_str(MINIMAL, Some("77")).unwrap();
        assert_eq!(c.training.seed, 77);
        assert_eq!(key_of(parse_config_str(MINIMAL, Some("x")).unwrap_err()), SEED_ENV);
    }

    #[test]
    fn sections_parse() {
        let text = format!(
            "{MINIMAL}rules = [\"krum\"]\n[attack]\nkind = \"precision_mimic\"\nmagnitude = 2.0\nbyzantine = [1, 2]\n\
             [codec]\nnoise_floor = 1e-8\n[theory]\nmu_T = 1.2\nsigma_T = 0.1\nmu_Q = 0.3\nsigma_Q = 0.1\nC1 = 3.0\n\
             [output]\ndir = \"x\"\nplot = false\n"
        );
        let c = parse_config_str(&text, None).unwrap();
        assert_eq!(c.rules, vec![AggregationRule::Krum]);
        assert_eq!(c.training.attack.byzantine, vec![1, 2]);
        assert_eq!(c.training.codec.noise_floor, 1e-8);
        assert_eq!(c.given_stats().unwrap().c1, 3.0);
        assert_eq!(c.output_dir, PathBuf::from("x"));
        assert!(!c.plot);
    }
}
