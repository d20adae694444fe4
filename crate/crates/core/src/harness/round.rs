use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use super::log::{RoundRecord, RoundStatus, RunLog};
use super::model::{evaluate, sample_batch, Logistic};
use super::task::{build_task, Dataset};
use super::{GlobalModel, GlobalStep, Role, TrainingConfig, UserState};
use crate::adversary::{attack_reports, corrupt_aggregation, poison_update, AttackKind};
use crate::codec::DftCodec;
use crate::error::{FortaError, Result};
use crate::localizer::{erasure_hints, localize, CodewordId, ErrorEvidence, LocalizerParams};
use crate::rng::{self, purpose};
use crate::select::{
    distances, krum_scores, modified_scores, select, soft_confidences, AggregationRule, SelectionSet,
};
use crate::sharing::{
    aggregation_message, assemble_aggregate, assemble_codewords, difference_messages, make_shares,
    reconstruct, user_pairs, AggregationMessage, DifferenceMessage, ReconstructionReport, Share,
};

/// Everything a round needs besides the model and the config.
#[derive(Debug, Clone)]
pub struct Federation {
    pub model: Logistic,
    pub users: Vec<UserState>,
    pub test: Dataset,
    pub train: Dataset,
}

impl Federation {
    pub fn new(task: super::Task, byzantine: &[usize], seed: u64) -> Self {
        let model = Logistic {
            classes: task.classes,
            features: task.features,
        };
        let train = task.pooled_train();
        let users = task
            .users
            .into_iter()
            .enumerate()
            .map(|(i, data)| UserState {
                id: i + 1,
                data,
                role: if byzantine.contains(&(i + 1)) { Role::Byzantine } else { Role::Honest },
                rng_seed: rng::derive_seed(seed, &[purpose::BATCH, (i + 1) as u64]),
            })
            .collect();
        Self {
            model,
            users,
            test: task.test,
            train,
        }
    }
}

/// Mini-batch gradient of the local loss; with several local steps, the
/// accumulated gradient of a short local SGD run.
pub fn local_update(
    model: &Logistic,
    global: &GlobalModel,
    user: &UserState,
    batch_size: usize,
    local_steps: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    if user.data.is_empty() {
        return Err(FortaError::invalid_configuration(format!("user {} has no data", user.id)));
    }
    let mut rng = rng::stream(user.rng_seed, &[global.round as u64]);
    let mut w = global.w.clone();
    let mut total = vec![0.0; w.len()];
    for _ in 0..local_steps {
        let rows = sample_batch(&mut rng, user.data.len(), batch_size);
        let g = model.gradient_on(&w, &user.data, &rows);
        for ((t, wi), gi) in total.iter_mut().zip(w.iter_mut()).zip(&g) {
            *t += gi;
            *wi -= learning_rate * gi;
        }
    }
    Ok(total)
}

/// Byzantine set for a run: the configured one, or `A` users drawn from the seed.
fn resolve_byzantine(config: &TrainingConfig) -> Vec<usize> {
    if config.attack.kind == AttackKind::None {
        return config.attack.byzantine.clone();
    }
    if !config.attack.byzantine.is_empty() {
        return config.attack.byzantine.clone();
    }
    let mut rng = rng::stream(config.seed, &[purpose::ROLES]);
    let mut picked: Vec<usize> = index::sample(&mut rng, config.n_users, config.byzantine)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picked.sort_unstable();
    picked
}

struct PairPass {
    reports: Vec<ReconstructionReport>,
    failures: usize,
    max_imaginary: f64,
}

fn decode_pairs(
    pairs: &[(usize, usize)],
    per_pair: &[Vec<DifferenceMessage>],
    codec: &DftCodec,
    n: usize,
    hints: Option<&[usize]>,
) -> Result<PairPass> {
    let reports = pairs
        .par_iter()
        .zip(per_pair.par_iter())
        .map(|(_, msgs)| Ok(reconstruct(&assemble_codewords(msgs, n)?, codec, hints)))
        .collect::<Result<Vec<_>>>()?;
    let failures = reports.iter().map(|r| r.decode_failures).sum();
    let max_imaginary = reports.iter().map(|r| r.max_imaginary_residue).fold(0.0, f64::max);
    Ok(PairPass {
        reports,
        failures,
        max_imaginary,
    })
}

fn evidence_of(pairs: &[(usize, usize)], pass: &PairPass, n: usize) -> Result<ErrorEvidence> {
    let mut ev = ErrorEvidence::new(n);
    for (&pair, report) in pairs.iter().zip(&pass.reports) {
        for (coordinate, energies) in report.position_energies.iter().enumerate() {
            ev.push(CodewordId { pair, coordinate }, energies)?;
        }
    }
    Ok(ev)
}

/// Steps after the local updates that can abort the round.
struct Secure<'a> {
    config: &'a TrainingConfig,
    codec: DftCodec,
    held: Vec<Vec<Share>>,
    round: usize,
}

impl Secure<'_> {
    fn aggregate(&self, selected: &SelectionSet, hints: Option<&[usize]>) -> Result<(Vec<f64>, usize)> {
        let n = self.config.n_users;
        let msgs: Vec<AggregationMessage> = self
            .held
            .iter()
            .map(|h| {
                aggregation_message(h, selected, n)
                    .map(|m| corrupt_aggregation(m, &self.config.attack, self.codec.params(), self.round))
            })
            .collect::<Result<_>>()?;
        let report = reconstruct(&assemble_aggregate(&msgs, n)?, &self.codec, hints);
        if report.decode_failures > 0 {
            return Err(FortaError::ProtocolViolation(format!(
                "aggregate decoding failed on {} of {} coordinates",
                report.decode_failures, report.total_codewords
            )));
        }
        Ok((report.secret, report.decode_failures))
    }
}

/// One full round. Aborted rounds leave the model untouched.
pub fn run_round(
    global: &GlobalModel,
    fed: &Federation,
    config: &TrainingConfig,
) -> Result<(GlobalModel, RoundRecord)> {
    let n = config.n_users;
    let round = global.round;
    let eta = config.learning_rate_at(round);
    let spec = &config.attack;

    // (1)-(2) broadcast, local updates, model poisoning
    let updates: Vec<Vec<f64>> = fed
        .users
        .par_iter()
        .map(|u| {
            let raw = local_update(&fed.model, global, u, config.batch_size, config.local_steps, eta)?;
            Ok(poison_update(&raw, spec, u.id, round))
        })
        .collect::<Result<_>>()?;

    let mut record = RoundRecord::new(round, config.rule);

    let outcome: Result<(Vec<f64>, usize)> = if config.rule == AggregationRule::FedAvg {
        let mut sum = vec![0.0; fed.model.dim()];
        for u in &updates {
            for (s, v) in sum.iter_mut().zip(u) {
                *s += v;
            }
        }
        record.selected = (1..=n).collect();
        Ok((sum, n))
    } else {
        secure_round(&updates, config, round, &mut record)
    };

    let (aggregate, count) = match outcome {
        Ok(v) => v,
        Err(e @ (FortaError::ProtocolViolation(_) | FortaError::DecodeUnreliable { .. })) => {
            record.status = RoundStatus::Aborted(e.to_string());
            record.selected.clear();
            finish(&mut record, fed, &global.w)?;
            return Ok((
                GlobalModel {
                    w: global.w.clone(),
                    round: round + 1,
                },
                record,
            ));
        }
        Err(e) => return Err(e),
    };

    // (10) global step
    let scale = match config.global_step {
        GlobalStep::Mean => eta / count as f64,
        GlobalStep::Sum => eta,
    };
    let w: Vec<f64> = global.w.iter().zip(&aggregate).map(|(w, a)| w - scale * a).collect();
    if w.iter().any(|v| !v.is_finite()) {
        record.status = RoundStatus::Aborted("model step produced non-finite weights".into());
        record.selected.clear();
        finish(&mut record, fed, &global.w)?;
        return Ok((
            GlobalModel {
                w: global.w.clone(),
                round: round + 1,
            },
            record,
        ));
    }
    finish(&mut record, fed, &w)?;
    Ok((GlobalModel { w, round: round + 1 }, record))
}

fn finish(record: &mut RoundRecord, fed: &Federation, w: &[f64]) -> Result<()> {
    record.accuracy = evaluate(&fed.model, w, &fed.test)?;
    record.loss = fed.model.loss(w, &fed.train);
    Ok(())
}

/// Steps (3)-(9) for the two Krum rules.
fn secure_round(
    updates: &[Vec<f64>],
    config: &TrainingConfig,
    round: usize,
    record: &mut RoundRecord,
) -> Result<(Vec<f64>, usize)> {
    let n = config.n_users;
    let spec = &config.attack;
    let codec = DftCodec::new(config.codec)?;
    let sharing = config.sharing(rng::derive_seed(config.seed, &[purpose::SHARES, round as u64]));

    // (3) sharing and exchange
    let mut held: Vec<Vec<Share>> = vec![Vec::with_capacity(n); n];
    let all: Vec<Vec<Share>> = (1..=n)
        .into_par_iter()
        .map(|owner| make_shares(&updates[owner - 1], &sharing, owner))
        .collect::<Result<_>>()?;
    for shares in all {
        for s in shares {
            held[s.holder - 1].push(s);
        }
    }

    // (4) pairwise differences, with message attacks at Byzantine reporters
    let pairs = user_pairs(n);
    let per_reporter: Vec<Vec<DifferenceMessage>> = held
        .par_iter()
        .map(|h| difference_messages(h, n).map(|m| attack_reports(m, spec, &config.codec, round)))
        .collect::<Result<_>>()?;
    let mut per_pair: Vec<Vec<DifferenceMessage>> = vec![Vec::with_capacity(n); pairs.len()];
    for msgs in per_reporter {
        for (slot, m) in per_pair.iter_mut().zip(msgs) {
            slot.push(m);
        }
    }

    // (5) first-pass reconstruction
    let first = decode_pairs(&pairs, &per_pair, &codec, n, None)?;
    let mut used = &first;
    let second;
    let mut hints = Vec::new();
    let mut lambda = None;

    if config.rule == AggregationRule::ModifiedKrum {
        // (6) joint localization
        let evidence = evidence_of(&pairs, &first, n)?;
        let params = LocalizerParams {
            seed: rng::derive_seed(config.seed, &[purpose::GMM, round as u64]),
            ..config.localizer
        };
        let loc = localize(&evidence, &params)?;
        drop(evidence);
        hints = erasure_hints(&loc.profile, config.hint_budget(), params.hint_floor);
        lambda = Some(soft_confidences(&loc.profile, config.temperature)?);
        record.profile = Some(loc.profile);
        // (7) second pass with erasures
        if !hints.is_empty() {
            second = decode_pairs(&pairs, &per_pair, &codec, n, Some(&hints))?;
            used = &second;
        }
    }
    record.decode_failures = used.failures;
    record.max_imaginary_residue = used.max_imaginary;
    record.hints = hints.clone();

    // (8) distances, scores, selection
    let diffs: BTreeMap<(usize, usize), Vec<f64>> = pairs
        .iter()
        .zip(&used.reports)
        .map(|(&p, r)| (p, r.secret.clone()))
        .collect();
    let dist = distances(&diffs, n)?;
    let table = krum_scores(&dist, config.byzantine)?;
    let ranking = match &lambda {
        Some(conf) => modified_scores(&table, conf, n, config.byzantine)?,
        None => table.scores.clone(),
    };
    let selected = select(&ranking, config.select, config.rule)?;
    record.selected = selected.users.clone();
    record.scores = Some(table.scores);
    if let Some(conf) = lambda {
        record.lambda = Some(conf.lambda);
        record.modified = Some(ranking);
    }

    // (9) secure aggregation of the selected set
    let secure = Secure {
        config,
        codec,
        held,
        round,
    };
    let hint_ref = (!hints.is_empty()).then_some(hints.as_slice());
    let (sum, failures) = secure.aggregate(&selected, hint_ref)?;
    record.decode_failures += failures;
    Ok((sum, selected.users.len()))
}

/// Seeds everything, builds the task and runs the configured rounds.
pub fn run_experiment(config: &TrainingConfig) -> Result<RunLog> {
    config.validate()?;
    let started = Instant::now();
    let mut config = config.clone();
    config.attack.byzantine = resolve_byzantine(&config);
    if config.attack.rng_seed == 0 {
        config.attack.rng_seed = rng::derive_seed(config.seed, &[purpose::POISON]);
    }
    let task = build_task(&config.task, config.n_users, config.seed)?;
    let fed = Federation::new(task, &config.attack.byzantine, config.seed);
    let mut model = GlobalModel {
        w: vec![0.0; fed.model.dim()],
        round: 0,
    };
    let mut log = RunLog {
        rule: config.rule,
        byzantine: config.attack.byzantine.clone(),
        global_step: config.global_step,
        records: Vec::with_capacity(config.rounds),
        wall_clock_secs: 0.0,
    };
    for _ in 0..config.rounds {
        let (next, record) = run_round(&model, &fed, &config)?;
        model = next;
        log.records.push(record);
    }
    log.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(log)
}
