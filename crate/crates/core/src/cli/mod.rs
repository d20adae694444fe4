//! Operational commands behind the `forta` binary.

pub mod config;
pub mod svg;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::codec::{CodecParams, Codeword, DecodeResult, DftCodec};
use crate::error::{FortaError, Result};
use crate::harness::log::{write_profiles, write_runlog, write_scores};
use crate::harness::{build_task, run_experiment, Logistic, RunLog};
use crate::rng;
use crate::select::AggregationRule;
use crate::theory::{
    corollary_condition, estimate_feedback_stats, eta, eta_prime, sin_alpha, sin_alpha_mod, surrogate_differences,
    FeedbackStats, TheoryParams,
};

pub use config::{parse_config, parse_config_str, RunConfig, SEED_ENV};

pub const RUNLOG_CSV: &str = "runlog.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const PROFILE_CSV: &str = "profile.csv";
pub const ACCURACY_SVG: &str = "accuracy.svg";
pub const CONFIG_ECHO: &str = "config.toml";
pub const BOUNDS_TXT: &str = "bounds.txt";

const OUTPUTS: &[&str] = &[RUNLOG_CSV, SCORES_CSV, PROFILE_CSV, ACCURACY_SVG, CONFIG_ECHO, BOUNDS_TXT];

/// `<dir>.incomplete`, where outputs are staged until the run finishes.
pub fn staging_dir(dir: &Path) -> PathBuf {
    let mut name = dir.as_os_str().to_owned();
    name.push(".incomplete");
    PathBuf::from(name)
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    f(&mut file)?;
    file.flush()?;
    Ok(())
}

/// Moves a finished staging directory into place. An existing target is
/// replaced only when it holds nothing but files this tool writes.
fn publish(staging: &Path, dir: &Path) -> Result<()> {
    if dir.exists() {
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name();
            if !OUTPUTS.iter().any(|o| name == *o) {
                return Err(FortaError::invalid_argument(format!(
                    "{} exists and holds {:?}; refusing to replace it",
                    dir.display(),
                    name
                )));
            }
        }
        fs::remove_dir_all(dir)?;
    }
    fs::rename(staging, dir)?;
    Ok(())
}

fn fresh_staging(dir: &Path) -> Result<PathBuf> {
    let staging = staging_dir(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    Ok(staging)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub logs: Vec<RunLog>,
}

/// Runs every configured rule on the same seed and writes the CSVs, the
/// chart and the resolved config. On failure the staged files stay in
/// `<dir>.incomplete`.
pub fn cmd_run(config: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let dir = out.unwrap_or(&config.output_dir).to_path_buf();
    let staging = fresh_staging(&dir)?;
    fs::write(staging.join(CONFIG_ECHO), config.echo())?;
    let mut logs = Vec::with_capacity(config.rules.len());
    for &rule in &config.rules {
        logs.push(run_experiment(&config.for_rule(rule))?);
    }
    write_file(&staging.join(RUNLOG_CSV), |f| write_runlog(f, &logs))?;
    write_file(&staging.join(SCORES_CSV), |f| write_scores(f, &logs))?;
    write_file(&staging.join(PROFILE_CSV), |f| write_profiles(f, &logs))?;
    if config.plot {
        fs::write(staging.join(ACCURACY_SVG), svg::accuracy_chart(&logs))?;
    }
    publish(&staging, &dir)?;
    Ok(RunOutcome { dir, logs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSpec {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub error_counts: Vec<usize>,
    pub mag_min: f64,
    pub mag_max: f64,
    /// Log-spaced magnitude bands between `mag_min` and `mag_max`.
    pub mag_steps: usize,
    pub seed: u64,
}

impl FuzzSpec {
    pub fn validate(&self) -> Result<()> {
        CodecParams::new(self.n, self.k).validate()?;
        if self.trials == 0 || self.mag_steps == 0 {
            return Err(FortaError::invalid_argument("trials and mag-steps must be positive"));
        }
        if self.error_counts.is_empty() || self.error_counts.iter().any(|&e| e > self.n) {
            return Err(FortaError::invalid_argument(format!("error counts must lie in 0..={}", self.n)));
        }
        if !(self.mag_min > 0.0 && self.mag_max >= self.mag_min && self.mag_max.is_finite()) {
            return Err(FortaError::invalid_argument("need 0 < mag-min ≤ mag-max"));
        }
        Ok(())
    }

    fn bands(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.mag_min.ln(), self.mag_max.ln());
        let edge = |i: usize| (lo + (hi - lo) * i as f64 / self.mag_steps as f64).exp();
        (0..self.mag_steps)
            .map(|i| {
                let b = if i + 1 == self.mag_steps { self.mag_max } else { edge(i + 1) };
                (if i == 0 { self.mag_min } else { edge(i) }, b)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzRow {
    pub error_count: usize,
    /// Lower edge of the magnitude band.
    pub magnitude: f64,
    pub success_rate: f64,
    /// Mean decode residual over trials that produced a result.
    pub mean_residual: f64,
}

fn relative_error(got: &[Complex64], want: &[Complex64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// One injection trial: success means every injected position was found,
/// no other, and the message came back to 1e-5 relative error.
fn fuzz_trial(codec: &DftCodec, errors: usize, band: (f64, f64), seed: u64) -> Result<(bool, Option<f64>)> {
    let (n, k) = (codec.params().n, codec.params().k);
    let mut r = rng::stream(seed, &[]);
    let message: Vec<Complex64> = (0..k)
        .map(|_| Complex64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
        .collect();
    let mut values = codec.encode(&message)?.into_values();
    let mut positions: Vec<usize> = (1..=n).collect();
    for i in 0..errors {
        let j = r.random_range(i..n);
        positions.swap(i, j);
    }
    let mut injected = positions[..errors].to_vec();
    injected.sort_unstable();
    for &p in &injected {
        let mag = if band.1 > band.0 { r.random_range(band.0..band.1) } else { band.0 };
        values[p - 1] += Complex64::from_polar(mag, r.random_range(0.0..2.0 * PI));
    }
    let check = |out: &DecodeResult| out.error_positions == injected && relative_error(&out.message, &message) <= 1e-5;
    Ok(match codec.decode(&Codeword::new(values)?, None) {
        Ok(out) => (check(&out), Some(out.residual)),
        Err(FortaError::DecodeUnreliable { partial, .. }) => (false, Some(partial.residual)),
        Err(FortaError::LocalizationFailure { .. }) => (false, None),
        Err(e) => return Err(e),
    })
}

/// Monte-Carlo decoder characterization, one row per error count and band.
pub fn cmd_codec_fuzz(spec: &FuzzSpec) -> Result<Vec<FuzzRow>> {
    spec.validate()?;
    let codec = DftCodec::new(CodecParams::new(spec.n, spec.k))?;
    let mut rows = Vec::new();
    for &errors in &spec.error_counts {
        for (b, band) in spec.bands().into_iter().enumerate() {
            let outcomes = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = rng::derive_seed(spec.seed, &[errors as u64, b as u64, t as u64]);
                    fuzz_trial(&codec, errors, band, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let successes = outcomes.iter().filter(|o| o.0).count();
            let residuals: Vec<f64> = outcomes.iter().filter_map(|o| o.1).collect();
            rows.push(FuzzRow {
                error_count: errors,
                magnitude: band.0,
                success_rate: successes as f64 / spec.trials as f64,
                mean_residual: if residuals.is_empty() {
                    f64::NAN
                } else {
                    residuals.iter().sum::<f64>() / residuals.len() as f64
                },
            });
        }
    }
    Ok(rows)
}

/// `error_count,magnitude,success_rate,mean_residual`
pub fn write_fuzz_csv<W: Write>(out: W, rows: &[FuzzRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["error_count", "magnitude", "success_rate", "mean_residual"])?;
    for r in rows {
        w.write_record([
            r.error_count.to_string(),
            r.magnitude.to_string(),
            r.success_rate.to_string(),
            r.mean_residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub params: TheoryParams,
    pub stats: FeedbackStats,
    /// Whether `stats` came from a run rather than the config.
    pub estimated: bool,
    pub eta: f64,
    pub eta_prime: f64,
    pub sigma_prime: f64,
    pub sin_alpha: f64,
    pub sin_alpha_valid: bool,
    pub sin_alpha_mod: f64,
    pub sin_alpha_mod_valid: bool,
    pub corollary: bool,
}

impl BoundsReport {
    pub fn render(&self) -> String {
        let p = &self.params;
        let s = &self.stats;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("N", p.n.to_string());
        line("A", p.a.to_string());
        line("d", p.d.to_string());
        line("sigma_g", p.sigma_g.to_string());
        line("sigma_eps", p.sigma_eps.to_string());
        line("g_norm", p.g_norm.to_string());
        line("stats_source", if self.estimated { "estimated" } else { "config" }.to_string());
        line("mu_T", s.mu_t.to_string());
        line("sigma_T", s.sigma_t.to_string());
        line("mu_Q", s.mu_q.to_string());
        line("sigma_Q", s.sigma_q.to_string());
        line("C1", s.c1.to_string());
        line("eta", format!("{:.6}", self.eta));
        line("eta_prime", format!("{:.6}", self.eta_prime));
        line("sigma_prime", format!("{:.6e}", self.sigma_prime));
        line("sin_alpha", format!("{:.6e}", self.sin_alpha));
        line("sin_alpha_valid", self.sin_alpha_valid.to_string());
        line("sin_alpha_mod", format!("{:.6e}", self.sin_alpha_mod));
        line("sin_alpha_mod_valid", self.sin_alpha_mod_valid.to_string());
        line("corollary_holds", self.corollary.to_string());
        out
    }
}

fn model_dim(config: &RunConfig) -> Result<usize> {
    if let Some(d) = config.file.theory.d {
        return Ok(d);
    }
    let t = &config.training;
    let task = build_task(&t.task, t.n_users, t.seed)?;
    Ok(Logistic {
        classes: task.classes,
        features: task.features,
    }
    .dim())
}

/// Confidences from a short modified-Krum run plus surrogate differences.
fn estimate_stats(config: &RunConfig, d: usize) -> Result<FeedbackStats> {
    let th = &config.file.theory;
    let mut training = config.for_rule(AggregationRule::ModifiedKrum);
    training.rounds = th.estimate_rounds;
    let log = run_experiment(&training)?;
    let lambdas: Vec<Vec<f64>> = log.records.iter().filter_map(|r| r.lambda.clone()).collect();
    let pairs = config.training.n_users.min(8);
    let groups = surrogate_differences(
        d,
        th.sigma_g,
        th.sigma_eps,
        pairs,
        th.surrogate_samples,
        rng::derive_seed(config.training.seed, &[rng::purpose::DATA, d as u64]),
    )?;
    estimate_feedback_stats(&lambdas, &groups)
}

/// Evaluates both bounds and the dominance condition.
pub fn bounds_report(config: &RunConfig) -> Result<BoundsReport> {
    let th = &config.file.theory;
    let params = TheoryParams {
        n: config.training.n_users,
        a: config.training.byzantine,
        d: model_dim(config)?,
        sigma_g: th.sigma_g,
        sigma_eps: th.sigma_eps,
        g_norm: th.g_norm,
    };
    params.validate()?;
    let (stats, estimated) = match config.given_stats() {
        Some(s) => (s, false),
        None => (estimate_stats(config, params.d)?, true),
    };
    let plain = sin_alpha(&params)?;
    let modified = sin_alpha_mod(&params, &stats)?;
    Ok(BoundsReport {
        eta: eta(params.n, params.a)?,
        eta_prime: eta_prime(params.n, params.a)?,
        sigma_prime: params.sigma_prime(),
        sin_alpha: plain.value,
        sin_alpha_valid: plain.valid,
        sin_alpha_mod: modified.value,
        sin_alpha_mod_valid: modified.valid,
        corollary: corollary_condition(&params, &stats)?,
        params,
        stats,
        estimated,
    })
}

/// Writes the report to `<dir>/bounds.txt` and returns its text.
pub fn cmd_bounds(config: &RunConfig, out: Option<&Path>) -> Result<String> {
    let text = bounds_report(config)?.render();
    let dir = out.unwrap_or(&config.output_dir);
    fs::create_dir_all(dir)?;
    fs::write(dir.join(BOUNDS_TXT), &text)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(errors: usize, trials: usize) -> FuzzSpec {
        FuzzSpec {
            n: 30,
            k: 10,
            trials,
            error_counts: vec![errors],
            mag_min: 0.1,
            mag_max: 10.0,
            mag_steps: 1,
            seed: 3,
        }
    }

    #[test]
    fn fuzz_bands_cover_range() {
        let mut s = spec(1, 1);
        s.mag_steps = 2;
        let b = s.bands();
        assert_eq!(b[0].0, 0.1);
        assert!((b[0].1 - 1.0).abs() < 1e-12 && b[1].0 == b[0].1);
        assert_eq!(b[1].1, 10.0);
    }

    #[test]
    fn fuzz_rates() {
        let rows = cmd_codec_fuzz(&spec(10, 100)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].success_rate >= 0.97, "{rows:?}");
        let over = cmd_codec_fuzz(&spec(11, 50)).unwrap();
        assert_eq!(over[0].success_rate, 0.0);
        assert_eq!(cmd_codec_fuzz(&spec(3, 20)).unwrap(), cmd_codec_fuzz(&spec(3, 20)).unwrap());
        assert!(cmd_codec_fuzz(&spec(31, 1)).is_err());
    }

    #[test]
    fn fuzz_csv() {
        let rows = [FuzzRow { error_count: 2, magnitude: 0.1, success_rate: 1.0, mean_residual: 0.5 }];
        let mut buf = Vec::new();
        write_fuzz_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "error_count,magnitude,success_rate,mean_residual\n2,0.1,1,0.5\n"
        );
    }

    #[test]
    fn bounds_from_given_stats() {
        let c = parse_config_str(
            "[protocol]\nN = 30\nT = 9\nA = 10\nm = 8\n[theory]\nsigma_g = 0.01\nsigma_eps = 0.0\ng_norm = 50.0\n\
             mu_T = 1.2\nsigma_T = 0.1\nmu_Q = 0.3\nsigma_Q = 0.1\nC1 = 3.0\n",
            None,
        )
        .unwrap();
        let r = bounds_report(&c).unwrap();
        assert!((r.eta - 280f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.params.d, 68);
        assert!((r.sin_alpha - 0.05519).abs() < 1e-4);
        assert!(!r.estimated);
        assert!(r.render().contains("eta = 16.733201"));
    }

    #[test]
    fn staging_name() {
        assert_eq!(staging_dir(Path::new("a/out")), PathBuf::from("a/out.incomplete"));
    }
}
