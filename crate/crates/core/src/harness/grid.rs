//! Experiment configurations and the grid document they expand from.

use serde::{Deserialize, Serialize};

use crate::engine::{FirstProposer, Procedure, RoleDynamics, SplitGame, StoppingRule};
use crate::error::{Error, Result};
use crate::model::PersuasionTask;
use crate::scenarios;

const BUNDLED_GRID: &str = include_str!("../../data/grid.json");

pub const BARGAINING_SCENARIOS: [&str; 3] = ["math_baseline", "splitting_coins", "making_deals"];
pub const PERSUASION_SCENARIOS: [&str; 3] = ["math_baseline", "grading_students", "selling_products"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Bargaining,
    Persuasion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duration {
    OneShot,
    LongTerm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerAssignment {
    Random,
    /// Agent 0 proposes first.
    Systematic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSetting {
    Unbounded,
    Bounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FutureEncounter {
    None,
    ReEncounterFixedRoles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: u32,
    pub task_type: TaskType,
    pub duration: Duration,
    pub proposer_assignment: ProposerAssignment,
    pub value_setting: ValueSetting,
    /// One-shot configs only.
    pub future_encounter: Option<FutureEncounter>,
    /// Long-term configs only.
    pub role_dynamics: Option<RoleDynamics>,
    pub scenario: String,
    pub runs: usize,
    pub stopping: StoppingRule,
    /// Discount factors the scripted agents assume, `(δ1, δ2)`.
    pub patience: Option<[f64; 2]>,
    pub realization_steps: usize,
    pub seed_base: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.duration, self.future_encounter, self.role_dynamics) {
            (Duration::OneShot, Some(_), None) | (Duration::LongTerm, None, Some(_)) => {}
            (Duration::OneShot, _, _) => {
                return Err(Error::Config(format!(
                    "config {}: one-shot settings take a future encounter and no role dynamics",
                    self.id
                )))
            }
            (Duration::LongTerm, _, _) => {
                return Err(Error::Config(format!(
                    "config {}: long-term settings take role dynamics and no future encounter",
                    self.id
                )))
            }
        }
        let tags: &[&str] = match self.task_type {
            TaskType::Bargaining => &BARGAINING_SCENARIOS,
            TaskType::Persuasion => &PERSUASION_SCENARIOS,
        };
        if !tags.contains(&self.scenario.as_str()) {
            return Err(Error::Config(format!(
                "config {}: unknown {:?} scenario {:?}",
                self.id, self.task_type, self.scenario
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config(format!("config {}: needs at least one run", self.id)));
        }
        if let Some([a, b]) = self.patience {
            if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("config {}: patience must lie in (0, 1)", self.id)));
            }
        }
        StoppingRule::new(self.stopping.stop_probability, self.stopping.max_timestep)?;
        Ok(())
    }

    pub fn label(&self) -> String {
        let kind = match self.task_type {
            TaskType::Bargaining => "Bargaining",
            TaskType::Persuasion => "Persuasion",
        };
        format!("{kind}-{}", self.id)
    }

    pub fn first_proposer(&self) -> FirstProposer {
        match self.proposer_assignment {
            ProposerAssignment::Systematic => FirstProposer::Agent(0),
            ProposerAssignment::Random => FirstProposer::CoinFlip,
        }
    }

    /// The procedure the engine runs. A one-shot game that the agents may
    /// meet again is played as repeated rounds with fixed roles.
    pub fn procedure(&self) -> Procedure {
        let first = self.first_proposer();
        match (self.duration, self.future_encounter, self.role_dynamics) {
            (Duration::LongTerm, _, roles) => {
                Procedure::long_term(roles.unwrap_or(RoleDynamics::Fixed), first, self.stopping)
            }
            (Duration::OneShot, Some(FutureEncounter::ReEncounterFixedRoles), _) => {
                Procedure::long_term(RoleDynamics::Fixed, first, self.stopping)
            }
            (Duration::OneShot, _, _) => Procedure {
                first,
                ..Procedure::one_shot()
            },
        }
    }

    pub fn persuasion_task(&self) -> Result<PersuasionTask> {
        scenarios::by_tag(&self.scenario)
            .ok_or_else(|| Error::Config(format!("no persuasion task for scenario {:?}", self.scenario)))
    }

    /// Split game for bargaining configs: a unit pie in cents, or the
    /// bounded `η` frontier.
    pub fn split_game(&self) -> SplitGame {
        let game = match self.value_setting {
            ValueSetting::Unbounded => SplitGame::unbounded(1.0).with_unit(0.01),
            ValueSetting::Bounded => SplitGame::bounded(),
        };
        game.with_label(self.scenario.clone())
    }

    pub fn patience_or_default(&self) -> [f64; 2] {
        self.patience.unwrap_or([0.99, 0.99])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Proposer,
    Value,
    Future,
    Roles,
    Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDefaults {
    pub runs: usize,
    pub stopping: StoppingRule,
    pub patience: Option<[f64; 2]>,
    pub realization_steps: usize,
    pub seed_base: u64,
}

/// A block of the grid: the cartesian product of its dimension lists,
/// enumerated with `order[0]` as the outermost loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub task_type: TaskType,
    pub duration: Duration,
    pub order: Vec<Dimension>,
    #[serde(default)]
    pub proposer: Vec<ProposerAssignment>,
    #[serde(default)]
    pub value: Vec<ValueSetting>,
    #[serde(default)]
    pub future: Vec<FutureEncounter>,
    #[serde(default)]
    pub roles: Vec<RoleDynamics>,
    #[serde(default)]
    pub scenario: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub defaults: GridDefaults,
    pub blocks: Vec<GridBlock>,
}

impl GridSpec {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_GRID).expect("bundled grid parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl GridBlock {
    fn len_of(&self, d: Dimension) -> usize {
        match d {
            Dimension::Proposer => self.proposer.len(),
            Dimension::Value => self.value.len(),
            Dimension::Future => self.future.len(),
            Dimension::Roles => self.roles.len(),
            Dimension::Scenario => self.scenario.len(),
        }
    }

    fn check(&self) -> Result<()> {
        let needed: &[Dimension] = match self.duration {
            Duration::OneShot => &[Dimension::Proposer, Dimension::Value, Dimension::Future, Dimension::Scenario],
            Duration::LongTerm => &[Dimension::Proposer, Dimension::Value, Dimension::Roles, Dimension::Scenario],
        };
        let mut sorted = self.order.clone();
        sorted.sort_by_key(|d| *d as u8);
        let mut want = needed.to_vec();
        want.sort_by_key(|d| *d as u8);
        if sorted != want {
            return Err(Error::Config(format!(
                "{:?} {:?} block must order exactly the dimensions {:?}",
                self.task_type, self.duration, needed
            )));
        }
        let stray = match self.duration {
            Duration::OneShot => !self.roles.is_empty(),
            Duration::LongTerm => !self.future.is_empty(),
        };
        if stray {
            return Err(Error::Config(format!(
                "{:?} block lists a dimension that does not apply to it",
                self.duration
            )));
        }
        if let Some(d) = self.order.iter().find(|d| self.len_of(**d) == 0) {
            return Err(Error::Config(format!("dimension {d:?} has no values")));
        }
        Ok(())
    }
}

/// Expands the grid document into configs with ids counting from 1 in
/// block order.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for block in &spec.blocks {
        block.check()?;
        let sizes: Vec<usize> = block.order.iter().map(|d| block.len_of(*d)).collect();
        let total: usize = sizes.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut pick = [0usize; 5];
            for (d, size) in block.order.iter().zip(&sizes).rev() {
                pick[*d as usize] = rem % size;
                rem /= size;
            }
            let at = |d: Dimension| pick[d as usize];
            let config = ExperimentConfig {
                id: out.len() as u32 + 1,
                task_type: block.task_type,
                duration: block.duration,
                proposer_assignment: block.proposer[at(Dimension::Proposer)],
                value_setting: block.value[at(Dimension::Value)],
                future_encounter: (block.duration == Duration::OneShot).then(|| block.future[at(Dimension::Future)]),
                role_dynamics: (block.duration == Duration::LongTerm).then(|| block.roles[at(Dimension::Roles)]),
                scenario: block.scenario[at(Dimension::Scenario)].clone(),
                runs: spec.defaults.runs,
                stopping: spec.defaults.stopping,
                patience: spec.defaults.patience,
                realization_steps: spec.defaults.realization_steps,
                seed_base: spec.defaults.seed_base,
            };
            config.validate()?;
            out.push(config);
        }
    }
    Ok(out)
}

pub fn bundled_grid() -> Vec<ExperimentConfig> {
    build_grid(&GridSpec::bundled()).expect("bundled grid is valid")
}

/// Fields a user may override on top of a grid config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigOverrides {
    pub runs: Option<usize>,
    pub stopping: Option<StoppingRule>,
    pub patience: Option<[f64; 2]>,
    pub realization_steps: Option<usize>,
    pub seed_base: Option<u64>,
}

impl ConfigOverrides {
    pub fn apply(&self, config: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        if let Some(v) = self.runs {
            c.runs = v;
        }
        if let Some(v) = self.stopping {
            c.stopping = v;
        }
        if let Some(v) = self.patience {
            c.patience = Some(v);
        }
        if let Some(v) = self.realization_steps {
            c.realization_steps = v;
        }
        if let Some(v) = self.seed_base {
            c.seed_base = v;
        }
        c.validate()?;
        Ok(c)
    }
}
