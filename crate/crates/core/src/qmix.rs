//! Q-Mixing with a prior opponent weighting.
//!
//! A mixture of value functions is evaluated as the probability-weighted sum of the
//! component action values at each observation:
//!
//! `Q(o, a | σ) = Σ_k σ_k · Q_k(o, a)`
//!
//! The same aggregation backs two operations. [`combine_responses`] merges a
//! player's stored best responses (one per opponent policy) into a response to the
//! opponent's mixture. [`combine_opponents`] merges the opponent's own policies into
//! one fixed representative opponent.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::ObsKey;
use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::policy::{ActionMode, Policy, QSource, QTable, ValuePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedQPolicy {
    components: Vec<Arc<QTable>>,
    weights: Vec<f64>,
    action_count: usize,
}

impl MixedQPolicy {
    pub fn new(components: Vec<Arc<QTable>>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} components with {} weights",
                components.len(),
                weights.len()
            )));
        }
        // Reuse the mixed-strategy checks for the weight vector.
        MixedStrategy::new(0, weights.clone())?;
        let action_count = components[0].action_count();
        if components.iter().any(|c| c.action_count() != action_count) {
            return Err(Error::InvalidArgument(
                "mixed components disagree on action count".into(),
            ));
        }
        Ok(MixedQPolicy {
            components,
            weights,
            action_count,
        })
    }

    pub fn components(&self) -> &[Arc<QTable>] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Weighted sum of component values at `key`; components that never saw the
    /// key contribute their default value.
    pub fn mixed_q(&self, key: &ObsKey) -> Vec<f64> {
        let mut out = vec![0.0; self.action_count];
        for (table, &w) in self.components.iter().zip(&self.weights) {
            match table.get(key) {
                Some(vals) => {
                    for (o, v) in out.iter_mut().zip(vals) {
                        *o += w * v;
                    }
                }
                None => {
                    let d = table.default_value();
                    out.iter_mut().for_each(|o| *o += w * d);
                }
            }
        }
        out
    }
}

/// Flattens weighted value policies into one mixture. Nested mixtures are expanded
/// so every component is a plain table. The exploration rate of the result is the
/// weighted exploration rate of the inputs, so a weight-1 input is reproduced exactly.
fn mix<'a>(
    items: impl IntoIterator<Item = (Option<&'a ValuePolicy>, f64, usize)>,
) -> Result<ValuePolicy> {
    let mut tables = Vec::new();
    let mut weights = Vec::new();
    let mut epsilon = 0.0;
    let mut only: Option<&ValuePolicy> = None;
    let mut supported = 0;
    for (policy, w, index) in items {
        if w == 0.0 {
            continue;
        }
        let policy = policy.ok_or_else(|| Error::NotValueBased(format!("strategy {index}")))?;
        supported += 1;
        only = Some(policy);
        epsilon += w * policy.mode.epsilon();
        match &policy.source {
            QSource::Table(t) => {
                tables.push(t.clone());
                weights.push(w);
            }
            QSource::Mixture(m) => {
                for (t, &inner) in m.components().iter().zip(m.weights()) {
                    if inner > 0.0 {
                        tables.push(t.clone());
                        weights.push(w * inner);
                    }
                }
            }
        }
    }
    if supported == 1 {
        // Exact identity for degenerate mixtures, without reweighting round-off.
        return Ok(only.expect("one supported policy").clone());
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(ValuePolicy {
        source: QSource::Mixture(MixedQPolicy::new(tables, weights)?),
        mode: ActionMode::from_epsilon(epsilon),
    })
}

/// Builds a response to `opponent_solution` from per-opponent-policy responses.
/// `responses[j]` answers opponent strategy `j`; entries may be missing only where
/// the solution puts zero weight.
pub fn combine_responses(
    responses: &[Option<Arc<Policy>>],
    opponent_solution: &MixedStrategy,
) -> Result<ValuePolicy> {
    let mut items = Vec::new();
    for (j, &w) in opponent_solution.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let response = responses
            .get(j)
            .and_then(Option::as_ref)
            .ok_or(Error::MissingResponse(j))?;
        items.push((response.as_value(), w, j));
    }
    mix(items)
}

/// Collapses an opponent mixture into one fixed value policy.
pub fn combine_opponents(
    opponent_policies: &[Arc<Policy>],
    opponent_solution: &MixedStrategy,
) -> Result<ValuePolicy> {
    if opponent_policies.len() != opponent_solution.len() {
        return Err(Error::InvalidArgument(format!(
            "{} opponent policies with a mixture of length {}",
            opponent_policies.len(),
            opponent_solution.len()
        )));
    }
    mix(opponent_policies
        .iter()
        .zip(opponent_solution.weights())
        .enumerate()
        .map(|(j, (p, &w))| (p.as_value(), w, j)))
}
