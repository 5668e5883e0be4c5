//! Value-based policies and the acting contract used by environments.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ObsKey, Observation};
use crate::error::{Error, Result};
use crate::qmix::MixedQPolicy;
use crate::rng::SimRng;

/// Anything that can pick an action at a decision point.
pub trait Actor: Sync {
    fn act(&self, obs: &Observation, legal: &[usize], rng: &mut SimRng) -> usize;
}

/// Index of the maximal value among `legal`, lowest index on ties.
pub fn greedy_among(values: &[f64], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &a in &legal[1..] {
        if values[a] > values[best] {
            best = a;
        }
    }
    best
}

/// Observation-keyed action values. Unseen keys read as `default_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: BTreeMap<ObsKey, Vec<f64>>,
    default_value: f64,
    action_count: usize,
}

impl QTable {
    pub fn new(action_count: usize, default_value: f64) -> Self {
        assert!(action_count > 0);
        QTable {
            values: BTreeMap::new(),
            default_value,
            action_count,
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn default_value(&self) -> f64 {
        self.default_value
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &ObsKey> {
        self.values.keys()
    }

    pub fn get(&self, key: &ObsKey) -> Option<&[f64]> {
        self.values.get(key).map(Vec::as_slice)
    }

    pub fn values(&self, key: &ObsKey) -> Vec<f64> {
        match self.values.get(key) {
            Some(v) => v.clone(),
            None => vec![self.default_value; self.action_count],
        }
    }

    pub fn set(&mut self, key: ObsKey, values: Vec<f64>) -> Result<()> {
        if values.len() != self.action_count {
            return Err(Error::InvalidArgument(format!(
                "value vector of length {} for a table with {} actions",
                values.len(),
                self.action_count
            )));
        }
        self.values.insert(key, values);
        Ok(())
    }

    pub(crate) fn entry(&mut self, key: &ObsKey) -> &mut Vec<f64> {
        let (n, d) = (self.action_count, self.default_value);
        self.values.entry(key.clone()).or_insert_with(|| vec![d; n])
    }

    /// Adds `delta` to every stored value and to the default.
    pub fn shifted(&self, delta: f64) -> QTable {
        QTable {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x + delta).collect()))
                .collect(),
            default_value: self.default_value + delta,
            action_count: self.action_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "epsilon", rename_all = "kebab-case")]
pub enum ActionMode {
    Greedy,
    EpsilonGreedy(f64),
}

impl ActionMode {
    pub fn epsilon(self) -> f64 {
        match self {
            ActionMode::Greedy => 0.0,
            ActionMode::EpsilonGreedy(e) => e,
        }
    }

    pub fn from_epsilon(epsilon: f64) -> Self {
        if epsilon > 0.0 {
            ActionMode::EpsilonGreedy(epsilon.min(1.0))
        } else {
            ActionMode::Greedy
        }
    }
}

/// Where a value policy reads its action values from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QSource {
    Table(Arc<QTable>),
    Mixture(MixedQPolicy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePolicy {
    pub source: QSource,
    pub mode: ActionMode,
}

impl ValuePolicy {
    pub fn greedy(table: QTable) -> Self {
        ValuePolicy {
            source: QSource::Table(Arc::new(table)),
            mode: ActionMode::Greedy,
        }
    }

    /// Empty table acting uniformly at random: the usual initial policy.
    pub fn uniform_random(action_count: usize) -> Self {
        ValuePolicy {
            source: QSource::Table(Arc::new(QTable::new(action_count, 0.0))),
            mode: ActionMode::EpsilonGreedy(1.0),
        }
    }

    pub fn action_count(&self) -> usize {
        match &self.source {
            QSource::Table(t) => t.action_count(),
            QSource::Mixture(m) => m.action_count(),
        }
    }

    pub fn q_values(&self, key: &ObsKey) -> Vec<f64> {
        match &self.source {
            QSource::Table(t) => t.values(key),
            QSource::Mixture(m) => m.mixed_q(key),
        }
    }

    pub fn greedy_action(&self, key: &ObsKey, legal: &[usize]) -> usize {
        greedy_among(&self.q_values(key), legal)
    }
}

impl Actor for ValuePolicy {
    fn act(&self, obs: &Observation, legal: &[usize], rng: &mut SimRng) -> usize {
        let eps = self.mode.epsilon();
        if eps > 0.0 && rng.random::<f64>() < eps {
            return legal[rng.random_range(0..legal.len())];
        }
        self.greedy_action(&obs.key, legal)
    }
}

/// A policy stored in a strategy set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    Value(ValuePolicy),
    /// Fixed action probabilities at every decision point, renormalized over the
    /// legal actions. Used for scripted matrix-game strategies.
    Stochastic { probabilities: Vec<f64> },
}

impl Policy {
    pub fn stochastic(probabilities: Vec<f64>) -> Result<Self> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "not a probability vector: {probabilities:?}"
            )));
        }
        Ok(Policy::Stochastic { probabilities })
    }

    pub fn as_value(&self) -> Option<&ValuePolicy> {
        match self {
            Policy::Value(v) => Some(v),
            Policy::Stochastic { .. } => None,
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            Policy::Value(v) => v.action_count(),
            Policy::Stochastic { probabilities } => probabilities.len(),
        }
    }

    /// Probabilities over all actions at `obs`; illegal actions get zero.
    pub fn action_probabilities(&self, obs: &Observation, legal: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.action_count()];
        match self {
            Policy::Value(v) => {
                let eps = v.mode.epsilon();
                let share = eps / legal.len() as f64;
                for &a in legal {
                    out[a] = share;
                }
                out[v.greedy_action(&obs.key, legal)] += 1.0 - eps;
            }
            Policy::Stochastic { probabilities } => {
                let mass: f64 = legal.iter().map(|&a| probabilities[a]).sum();
                for &a in legal {
                    out[a] = if mass > 0.0 {
                        probabilities[a] / mass
                    } else {
                        1.0 / legal.len() as f64
                    };
                }
            }
        }
        out
    }

    /// Deterministic representative action: greedy for value policies, the most
    /// likely legal action for stochastic ones.
    pub fn greedy_action(&self, obs: &Observation, legal: &[usize]) -> usize {
        match self {
            Policy::Value(v) => v.greedy_action(&obs.key, legal),
            Policy::Stochastic { probabilities } => greedy_among(probabilities, legal),
        }
    }
}

impl Actor for Policy {
    fn act(&self, obs: &Observation, legal: &[usize], rng: &mut SimRng) -> usize {
        match self {
            Policy::Value(v) => v.act(obs, legal, rng),
            Policy::Stochastic { .. } => {
                let probs = self.action_probabilities(obs, legal);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &a in legal {
                    acc += probs[a];
                    if u < acc {
                        return a;
                    }
                }
                *legal.last().expect("no legal actions")
            }
        }
    }
}
