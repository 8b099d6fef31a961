//! Persuasion tasks, strategies and expected payoffs.
//!
//! The signal alphabet defaults to the action set, so a scheme has one
//! column per action and an action rule is square.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row sums and probability ranges.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sender,
    Receiver,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Sender => Role::Receiver,
            Role::Receiver => Role::Sender,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Sender => "sender",
            Role::Receiver => "receiver",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PayoffPair {
    pub sender: f64,
    pub receiver: f64,
}

impl PayoffPair {
    pub fn new(sender: f64, receiver: f64) -> Self {
        PayoffPair { sender, receiver }
    }

    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Sender => self.sender,
            Role::Receiver => self.receiver,
        }
    }

    /// Strictly better for both players.
    pub fn dominates(&self, other: &PayoffPair, tol: f64) -> bool {
        self.sender > other.sender + tol && self.receiver > other.receiver + tol
    }
}

impl From<PayoffPair> for [f64; 2] {
    fn from(p: PayoffPair) -> Self {
        [p.sender, p.receiver]
    }
}

impl From<[f64; 2]> for PayoffPair {
    fn from(p: [f64; 2]) -> Self {
        PayoffPair::new(p[0], p[1])
    }
}

/// Dense row-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Stochastic {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Stochastic {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("matrix has no rows".into()));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::Shape("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(n * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Shape(format!(
                    "row {r} has {} entries, expected {m}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < -PROB_TOL || v > 1.0 + PROB_TOL {
                    return Err(Error::Distribution(format!(
                        "entry ({r}, {c}) = {v} is not a probability"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Distribution(format!("row {r} sums to {sum}")));
            }
            data.extend_from_slice(row);
        }
        Ok(Stochastic { rows: n, cols: m, data })
    }

    /// Every row puts all mass on column `col`.
    pub fn constant(rows: usize, cols: usize, col: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            data[r * cols + col] = 1.0;
        }
        Stochastic { rows, cols, data }
    }

    pub fn from_choices(cols: usize, choices: &[usize]) -> Self {
        let mut data = vec![0.0; choices.len() * cols];
        for (r, &c) in choices.iter().enumerate() {
            data[r * cols + c] = 1.0;
        }
        Stochastic {
            rows: choices.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Stochastic::from_choices(n, &(0..n).collect::<Vec<_>>())
    }

    /// Two-by-two matrix given the probabilities of column 1 in each row.
    pub fn binary(p0: f64, p1: f64) -> Result<Self> {
        Stochastic::from_rows(vec![vec![1.0 - p0, p0], vec![1.0 - p1, p1]])
    }

    /// Builds from a row-major flat vector of length `rows * cols`.
    pub fn from_flat(rows: usize, cols: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries, found {}",
                rows * cols,
                flat.len()
            )));
        }
        Stochastic::from_rows(flat.chunks(cols).map(|c| c.to_vec()).collect())
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Stochastic { rows, cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|c| c.to_vec()).collect()
    }

    /// `(p0, p1)` for a two-by-two matrix, the inverse of [`Stochastic::binary`].
    pub fn binary_params(&self) -> Option<(f64, f64)> {
        (self.rows == 2 && self.cols == 2).then(|| (self.get(0, 1), self.get(1, 1)))
    }

    pub fn approx_eq(&self, other: &Stochastic, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// True when every row is the same distribution.
    pub fn rows_identical(&self, tol: f64) -> bool {
        (1..self.rows).all(|r| {
            self.row(r)
                .iter()
                .zip(self.row(0))
                .all(|(a, b)| (a - b).abs() <= tol)
        })
    }
}

impl Serialize for Stochastic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Stochastic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Stochastic::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// `φ(σ | s)`: rows are states, columns are signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalingScheme(pub Stochastic);

/// `π(a | σ)`: rows are signals, columns are actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionRule(pub Stochastic);

impl SignalingScheme {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Stochastic::from_rows(rows).map(SignalingScheme)
    }

    /// `x1 = φ(σ=1 | s=0)`, `x2 = φ(σ=1 | s=1)`.
    pub fn binary(x1: f64, x2: f64) -> Result<Self> {
        Stochastic::binary(x1, x2).map(SignalingScheme)
    }

    pub fn n_states(&self) -> usize {
        self.0.n_rows()
    }

    pub fn n_signals(&self) -> usize {
        self.0.n_cols()
    }

    pub fn prob(&self, state: usize, signal: usize) -> f64 {
        self.0.get(state, signal)
    }

    pub fn approx_eq(&self, other: &SignalingScheme, tol: f64) -> bool {
        self.0.approx_eq(&other.0, tol)
    }

    /// A scheme whose rows coincide reveals nothing: every posterior is the prior.
    pub fn is_uninformative(&self, tol: f64) -> bool {
        self.0.rows_identical(tol)
    }
}

impl ActionRule {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Stochastic::from_rows(rows).map(ActionRule)
    }

    /// `y1 = π(a=1 | σ=0)`, `y2 = π(a=1 | σ=1)`.
    pub fn binary(y1: f64, y2: f64) -> Result<Self> {
        Stochastic::binary(y1, y2).map(ActionRule)
    }

    pub fn n_signals(&self) -> usize {
        self.0.n_rows()
    }

    pub fn n_actions(&self) -> usize {
        self.0.n_cols()
    }

    pub fn prob(&self, signal: usize, action: usize) -> f64 {
        self.0.get(signal, action)
    }

    pub fn approx_eq(&self, other: &ActionRule, tol: f64) -> bool {
        self.0.approx_eq(&other.0, tol)
    }

    /// Follows every recommendation.
    pub fn obedient(n_actions: usize) -> Self {
        ActionRule(Stochastic::identity(n_actions))
    }
}

/// Unvalidated task document, the on-disk scenario format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub prior: Vec<f64>,
    pub sender_reward: Vec<Vec<f64>>,
    pub receiver_reward: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoStates,
    NoActions,
    PriorLength { expected: usize, found: usize },
    PriorEntry { index: usize, value: f64 },
    PriorNotNormalized { sum: f64 },
    RewardShape { table: Role, expected: (usize, usize), found: (usize, usize) },
    RewardNotFinite { table: Role, state: usize, action: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "state set is empty"),
            Violation::NoActions => write!(f, "action set is empty"),
            Violation::PriorLength { expected, found } => {
                write!(f, "prior has {found} entries for {expected} states")
            }
            Violation::PriorEntry { index, value } => {
                write!(f, "prior entry {index} = {value} is not in [0, 1]")
            }
            Violation::PriorNotNormalized { sum } => write!(f, "prior not normalized (sum = {sum})"),
            Violation::RewardShape { table, expected, found } => write!(
                f,
                "{table} reward table is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::RewardNotFinite { table, state, action } => {
                write!(f, "{table} reward at ({state}, {action}) is not finite")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Lists every violated invariant; never fails.
pub fn validate(scenario: &Scenario) -> ValidationReport {
    let mut violations = Vec::new();
    let n_s = scenario.states.len();
    let n_a = scenario.actions.len();
    if n_s == 0 {
        violations.push(Violation::NoStates);
    }
    if n_a == 0 {
        violations.push(Violation::NoActions);
    }
    if scenario.prior.len() != n_s {
        violations.push(Violation::PriorLength {
            expected: n_s,
            found: scenario.prior.len(),
        });
    }
    for (index, &value) in scenario.prior.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            violations.push(Violation::PriorEntry { index, value });
        }
    }
    let sum: f64 = scenario.prior.iter().sum();
    if !scenario.prior.is_empty() && (sum - 1.0).abs() > PROB_TOL {
        violations.push(Violation::PriorNotNormalized { sum });
    }
    for (table, rows) in [
        (Role::Sender, &scenario.sender_reward),
        (Role::Receiver, &scenario.receiver_reward),
    ] {
        let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let ragged = rows.iter().any(|r| r.len() != n_a);
        if rows.len() != n_s || ragged {
            violations.push(Violation::RewardShape {
                table,
                expected: (n_s, n_a),
                found: (rows.len(), cols),
            });
            continue;
        }
        for (state, row) in rows.iter().enumerate() {
            for (action, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::RewardNotFinite { table, state, action });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// A validated persuasion task `(S, μ0, A, r^i, r^j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Scenario", into = "Scenario")]
pub struct PersuasionTask {
    label: String,
    states: Vec<String>,
    actions: Vec<String>,
    prior: Vec<f64>,
    sender: Vec<f64>,
    receiver: Vec<f64>,
}

impl TryFrom<Scenario> for PersuasionTask {
    type Error = Error;

    fn try_from(s: Scenario) -> Result<Self> {
        let report = validate(&s);
        if !report.is_valid() {
            return Err(Error::InvalidTask(report.to_string()));
        }
        Ok(PersuasionTask {
            sender: s.sender_reward.concat(),
            receiver: s.receiver_reward.concat(),
            label: s.label,
            states: s.states,
            actions: s.actions,
            prior: s.prior,
        })
    }
}

impl From<PersuasionTask> for Scenario {
    fn from(t: PersuasionTask) -> Self {
        let n_a = t.actions.len();
        Scenario {
            sender_reward: t.sender.chunks(n_a).map(|c| c.to_vec()).collect(),
            receiver_reward: t.receiver.chunks(n_a).map(|c| c.to_vec()).collect(),
            label: t.label,
            states: t.states,
            actions: t.actions,
            prior: t.prior,
        }
    }
}

impl PersuasionTask {
    pub fn new(
        label: impl Into<String>,
        prior: Vec<f64>,
        sender_reward: Vec<Vec<f64>>,
        receiver_reward: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let states = (0..prior.len()).map(|s| s.to_string()).collect();
        let actions = (0..sender_reward.first().map_or(0, |r| r.len()))
            .map(|a| a.to_string())
            .collect();
        Scenario {
            label: label.into(),
            states,
            actions,
            prior,
            sender_reward,
            receiver_reward,
        }
        .try_into()
    }

    pub fn with_names(mut self, states: Vec<String>, actions: Vec<String>) -> Result<Self> {
        if states.len() != self.states.len() || actions.len() != self.actions.len() {
            return Err(Error::Shape("name lists do not match the task".into()));
        }
        self.states = states;
        self.actions = actions;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn to_scenario(&self) -> Scenario {
        self.clone().into()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn reward(&self, role: Role, state: usize, action: usize) -> f64 {
        let table = match role {
            Role::Sender => &self.sender,
            Role::Receiver => &self.receiver,
        };
        table[state * self.actions.len() + action]
    }

    pub fn is_binary(&self) -> bool {
        self.n_states() == 2 && self.n_actions() == 2
    }

    /// Swaps the two reward tables.
    pub fn swapped(&self) -> PersuasionTask {
        let mut t = self.clone();
        std::mem::swap(&mut t.sender, &mut t.receiver);
        t
    }
}

fn check_shapes(task: &PersuasionTask, scheme: &SignalingScheme, rule: &ActionRule) -> Result<()> {
    if scheme.n_states() != task.n_states() {
        return Err(Error::Shape(format!(
            "scheme has {} rows for {} states",
            scheme.n_states(),
            task.n_states()
        )));
    }
    if rule.n_signals() != scheme.n_signals() {
        return Err(Error::Shape(format!(
            "rule has {} rows for {} signals",
            rule.n_signals(),
            scheme.n_signals()
        )));
    }
    if rule.n_actions() != task.n_actions() {
        return Err(Error::Shape(format!(
            "rule has {} columns for {} actions",
            rule.n_actions(),
            task.n_actions()
        )));
    }
    Ok(())
}

/// Expected payoffs `Σ_s μ0(s) Σ_σ φ(σ|s) Σ_a π(a|σ) r(s, a)` for both players.
pub fn evaluate(task: &PersuasionTask, scheme: &SignalingScheme, rule: &ActionRule) -> Result<PayoffPair> {
    check_shapes(task, scheme, rule)?;
    let mut out = PayoffPair::default();
    for s in 0..task.n_states() {
        let mu = task.prior[s];
        if mu == 0.0 {
            continue;
        }
        for sig in 0..scheme.n_signals() {
            let w = mu * scheme.prob(s, sig);
            if w == 0.0 {
                continue;
            }
            for a in 0..task.n_actions() {
                let p = w * rule.prob(sig, a);
                out.sender += p * task.reward(Role::Sender, s, a);
                out.receiver += p * task.reward(Role::Receiver, s, a);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::grading;

    #[test]
    fn honest_and_babbling_payoffs() {
        let task = grading();
        let honest = SignalingScheme::binary(0.0, 1.0).unwrap();
        let obey = ActionRule::obedient(2);
        assert_eq!(evaluate(&task, &honest, &obey).unwrap(), PayoffPair::new(1.0 / 3.0, 1.0 / 3.0));
        let babble = SignalingScheme::binary(0.0, 0.0).unwrap();
        let never = ActionRule::binary(0.0, 0.0).unwrap();
        assert_eq!(evaluate(&task, &babble, &never).unwrap(), PayoffPair::new(0.0, 0.0));
    }

    #[test]
    fn eta_family_payoffs() {
        let task = grading();
        for eta in [0.1, 0.25, 0.4, 0.5] {
            let p = evaluate(&task, &SignalingScheme::binary(eta, 1.0).unwrap(), &ActionRule::obedient(2)).unwrap();
            assert!((p.sender - (1.0 + 2.0 * eta) / 3.0).abs() < 1e-15);
            assert!((p.receiver - (1.0 - 2.0 * eta) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let task = grading();
        let scheme = SignalingScheme::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let err = evaluate(&task, &scheme, &ActionRule::obedient(2)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn validate_reports_unnormalized_prior() {
        let mut sc = grading().to_scenario();
        sc.prior = vec![0.5, 0.6];
        let report = validate(&sc);
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("prior not normalized"));
        assert!(PersuasionTask::try_from(sc).is_err());
    }

    #[test]
    fn validate_reports_reward_shape() {
        let mut sc = grading().to_scenario();
        sc.receiver_reward.pop();
        let report = validate(&sc);
        assert!(matches!(report.violations[0], Violation::RewardShape { table: Role::Receiver, .. }));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(SignalingScheme::from_rows(vec![vec![0.5, 0.6], vec![1.0, 0.0]]).is_err());
        assert!(SignalingScheme::binary(1.5, 0.0).is_err());
    }

    #[test]
    fn scenario_round_trip_is_exact() {
        let task = grading();
        let text = serde_json::to_string(&task).unwrap();
        let back: PersuasionTask = serde_json::from_str(&text).unwrap();
        assert_eq!(task, back);
        assert_eq!(back.prior()[0].to_bits(), (2.0f64 / 3.0).to_bits());
    }
}
