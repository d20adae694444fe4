//! The federated round loop and its configuration.

pub mod log;
pub mod model;
mod round;
pub mod task;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackSpec};
use crate::codec::CodecParams;
use crate::error::{FortaError, Result};
use crate::localizer::LocalizerParams;
use crate::select::{AggregationRule, DEFAULT_TEMPERATURE};
use crate::sharing::SharingParams;

pub use log::{RoundRecord, RunLog};
pub use model::{evaluate, Logistic};
pub use round::{local_update, run_experiment, run_round, Federation};
pub use task::{build_task, Dataset, Task, TaskSpec};

/// How the reconstructed aggregate becomes a model step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GlobalStep {
    #[default]
    Mean,
    Sum,
}

impl GlobalStep {
    pub fn as_str(self) -> &'static str {
        match self {
            GlobalStep::Mean => "mean",
            GlobalStep::Sum => "sum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Honest,
    Byzantine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub w: Vec<f64>,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub id: usize,
    pub data: Dataset,
    pub role: Role,
    /// Base of the user's per-round batch streams.
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub n_users: usize,
    pub collusion: usize,
    pub byzantine: usize,
    pub select: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// `η_t = learning_rate / (1 + lr_decay · t)`.
    pub lr_decay: f64,
    pub batch_size: usize,
    /// Local SGD steps per round; the update is the accumulated gradient.
    pub local_steps: usize,
    pub task: TaskSpec,
    pub rule: AggregationRule,
    /// An empty Byzantine set with an active attack is filled from the seed.
    pub attack: AttackSpec,
    pub codec: CodecParams,
    pub privacy_sigma: f64,
    pub injected_precision_sigma: f64,
    pub localizer: LocalizerParams,
    pub temperature: f64,
    /// Erasure hints fed to the second pass; defaults to `A`.
    pub hint_budget: Option<usize>,
    pub global_step: GlobalStep,
    pub seed: u64,
}

impl TrainingConfig {
    /// Defaults for the desk-scale experiment around the given protocol sizes.
    pub fn new(n_users: usize, collusion: usize, byzantine: usize, select: usize) -> Self {
        Self {
            n_users,
            collusion,
            byzantine,
            select,
            rounds: 50,
            learning_rate: 0.5,
            lr_decay: 0.0,
            batch_size: 32,
            local_steps: 1,
            task: TaskSpec::default(),
            rule: AggregationRule::ModifiedKrum,
            attack: AttackSpec::none(),
            codec: CodecParams::new(n_users, collusion + 1),
            privacy_sigma: 1.0,
            injected_precision_sigma: 1e-7,
            localizer: LocalizerParams::default(),
            temperature: DEFAULT_TEMPERATURE,
            hint_budget: None,
            global_step: GlobalStep::Mean,
            seed: 0,
        }
    }

    pub fn learning_rate_at(&self, round: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * round as f64)
    }

    pub fn hint_budget(&self) -> usize {
        self.hint_budget.unwrap_or(self.byzantine)
    }

    pub fn sharing(&self, rng_seed: u64) -> SharingParams {
        SharingParams {
            n_users: self.n_users,
            collusion_threshold: self.collusion,
            privacy_sigma: self.privacy_sigma,
            injected_precision_sigma: self.injected_precision_sigma,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t, a, m) = (self.n_users, self.collusion, self.byzantine, self.select);
        if 2 * a + 2 >= n {
            return Err(FortaError::invalid_configuration(format!(
                "2A + 2 < N violated (N = {n}, A = {a})"
            )));
        }
        if n < 2 * a + t + 1 {
            return Err(FortaError::invalid_configuration(format!(
                "N ≥ 2A + T + 1 violated (N = {n}, T = {t}, A = {a}); the code cannot correct A errors"
            )));
        }
        if m == 0 || m > n - a {
            return Err(FortaError::invalid_configuration(format!("need 1 ≤ m ≤ N − A (m = {m}, N − A = {})", n - a)));
        }
        self.sharing(0).validate()?;
        if self.codec.n != n || self.codec.k != t + 1 {
            return Err(FortaError::invalid_configuration(format!(
                "codec must be ({n}, {}) for N = {n}, T = {t}",
                t + 1
            )));
        }
        self.codec.validate()?;
        self.localizer.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.lr_decay >= 0.0) {
            return Err(FortaError::invalid_configuration("learning rate must be positive, decay non-negative"));
        }
        if self.batch_size == 0 || self.local_steps == 0 {
            return Err(FortaError::invalid_configuration("batch_size and local_steps must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(FortaError::invalid_configuration("temperature must be positive"));
        }
        if self.hint_budget() > n - self.codec.k - 1 {
            return Err(FortaError::invalid_configuration(format!(
                "hint budget {} exceeds N − K − 1 = {}",
                self.hint_budget(),
                n - self.codec.k - 1
            )));
        }
        self.task.validate()?;
        self.attack.validate(n, a, t)?;
        if self.attack.kind != AttackKind::None && self.attack.byzantine.is_empty() && a == 0 {
            return Err(FortaError::invalid_configuration("an attack needs A ≥ 1"));
        }
        Ok(())
    }
}
