//! Receiver meta rules that look at the game structure before acting.
//!
//! A threshold `χ` decides whether the receiver obeys the committed scheme
//! (plays `π1`) or ignores it (plays `π0`).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{evaluate, ActionRule, PayoffPair, PersuasionTask, SignalingScheme};
use crate::persuasion::{best_response_posterior, best_response_prior_for};

const THRESHOLD_TOL: f64 = 1e-12;

type PayoffPredicate = Arc<dyn Fn(PayoffPair, PayoffPair) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum Threshold {
    /// Obey iff the receiver's obedient payoff is at least the sender's.
    PayoffComparison,
    /// Obey iff the scheme reveals the state exactly.
    Honesty,
    /// Any predicate over `(R0, R1)`.
    Custom { name: String, predicate: PayoffPredicate },
}

pub fn threshold_payoff_comparison() -> Threshold {
    Threshold::PayoffComparison
}

pub fn threshold_honesty() -> Threshold {
    Threshold::Honesty
}

impl Threshold {
    pub fn custom(name: impl Into<String>, f: impl Fn(PayoffPair, PayoffPair) -> bool + Send + Sync + 'static) -> Self {
        Threshold::Custom {
            name: name.into(),
            predicate: Arc::new(f),
        }
    }

    pub fn tag(&self) -> &str {
        match self {
            Threshold::PayoffComparison => "payoff_comparison",
            Threshold::Honesty => "honesty",
            Threshold::Custom { name, .. } => name,
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "payoff_comparison" => Ok(Threshold::PayoffComparison),
            "honesty" => Ok(Threshold::Honesty),
            other => Err(Error::Config(format!("unknown threshold {other:?}"))),
        }
    }

    /// `χ(R0, R1)` for payoff predicates.
    pub fn on_payoffs(&self, r0: PayoffPair, r1: PayoffPair) -> Option<bool> {
        match self {
            Threshold::PayoffComparison => Some(r1.sender <= r1.receiver + THRESHOLD_TOL),
            Threshold::Custom { predicate, .. } => Some(predicate(r0, r1)),
            Threshold::Honesty => None,
        }
    }

    /// `χ` for the committed scheme, computing `R0` and `R1` as needed.
    pub fn evaluate(&self, task: &PersuasionTask, scheme: &SignalingScheme) -> Result<bool> {
        if let Threshold::Honesty = self {
            if scheme.n_signals() != scheme.n_states() {
                return Err(Error::Shape(format!(
                    "honesty needs as many signals as states, got {} for {}",
                    scheme.n_signals(),
                    scheme.n_states()
                )));
            }
            return Ok((0..scheme.n_states()).all(|s| scheme.prob(s, s) >= 1.0 - THRESHOLD_TOL));
        }
        let (pi0, pi1) = resolved_rules(task, scheme)?;
        let r0 = evaluate(task, scheme, &pi0)?;
        let r1 = evaluate(task, scheme, &pi1)?;
        Ok(self.on_payoffs(r0, r1).expect("payoff threshold"))
    }
}

impl fmt::Debug for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Threshold({})", self.tag())
    }
}

fn resolved_rules(task: &PersuasionTask, scheme: &SignalingScheme) -> Result<(ActionRule, ActionRule)> {
    let pi1 = best_response_posterior(task, scheme)?;
    Ok((best_response_prior_for(task, scheme.n_signals()), pi1))
}

/// A receiver committed to a threshold: given a scheme it resolves to
/// exactly one of `π0` and `π1`.
#[derive(Clone, Debug)]
pub struct MetaActionRule {
    pub threshold: Threshold,
}

impl MetaActionRule {
    pub fn new(threshold: Threshold) -> Self {
        MetaActionRule { threshold }
    }

    pub fn resolve(&self, task: &PersuasionTask, scheme: &SignalingScheme) -> Result<ActionRule> {
        let (pi0, pi1) = resolved_rules(task, scheme)?;
        Ok(if self.threshold.evaluate(task, scheme)? { pi1 } else { pi0 })
    }
}

/// The receiver's action distribution after seeing `signal` under `scheme`.
pub fn satisfaction_check(
    task: &PersuasionTask,
    scheme: &SignalingScheme,
    threshold: &Threshold,
    signal: usize,
) -> Result<Vec<f64>> {
    if signal >= scheme.n_signals() {
        return Err(Error::Shape(format!("signal {signal} out of range")));
    }
    let rule = MetaActionRule::new(threshold.clone()).resolve(task, scheme)?;
    Ok(rule.0.row(signal).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persuasion::babbling_scheme;
    use crate::scenarios::grading;

    #[test]
    fn comparison_on_payoffs() {
        let t = threshold_payoff_comparison();
        let any = PayoffPair::new(0.0, 0.0);
        assert_eq!(t.on_payoffs(any, PayoffPair::new(0.5, 0.5)), Some(true));
        assert_eq!(t.on_payoffs(any, PayoffPair::new(0.7, 0.1)), Some(false));
    }

    #[test]
    fn grading_persuasive_scheme_is_ignored() {
        let task = grading();
        let s = SignalingScheme::binary(0.5, 1.0).unwrap();
        for sig in 0..2 {
            assert_eq!(satisfaction_check(&task, &s, &threshold_payoff_comparison(), sig).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn grading_honest_scheme_is_obeyed() {
        let task = grading();
        let s = SignalingScheme::binary(0.0, 1.0).unwrap();
        let t = threshold_payoff_comparison();
        assert_eq!(satisfaction_check(&task, &s, &t, 0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(satisfaction_check(&task, &s, &t, 1).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn babbling_makes_threshold_irrelevant() {
        let task = grading();
        let s = babbling_scheme(&task);
        let yes = Threshold::custom("yes", |_, _| true);
        let no = Threshold::custom("no", |_, _| false);
        for sig in 0..2 {
            assert_eq!(
                satisfaction_check(&task, &s, &yes, sig).unwrap(),
                satisfaction_check(&task, &s, &no, sig).unwrap()
            );
        }
    }

    #[test]
    fn honesty_threshold() {
        let task = grading();
        let t = threshold_honesty();
        assert!(t.evaluate(&task, &SignalingScheme::binary(0.0, 1.0).unwrap()).unwrap());
        assert!(!t.evaluate(&task, &SignalingScheme::binary(0.5, 1.0).unwrap()).unwrap());
        let near = SignalingScheme::from_rows(vec![vec![1.0 - 1e-15, 1e-15], vec![1e-15, 1.0 - 1e-15]]).unwrap();
        assert!(t.evaluate(&task, &near).unwrap());
    }

    #[test]
    fn honesty_needs_square_scheme() {
        let task = grading();
        let wide = SignalingScheme::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(threshold_honesty().evaluate(&task, &wide), Err(Error::Shape(_))));
    }

    #[test]
    fn comparison_on_eta_frontier_accepts_only_zero() {
        let task = grading();
        let t = threshold_payoff_comparison();
        for k in 0..=500 {
            let eta = k as f64 / 1000.0;
            let s = SignalingScheme::binary(eta, 1.0).unwrap();
            assert_eq!(t.evaluate(&task, &s).unwrap(), k == 0, "eta = {eta}");
        }
    }

    #[test]
    fn tags_round_trip() {
        for t in [threshold_payoff_comparison(), threshold_honesty()] {
            assert_eq!(Threshold::from_tag(t.tag()).unwrap().tag(), t.tag());
        }
    }
}
