//! Regret against deviation sets, held-out evaluation policies and policy similarity.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, Mutex};

use itertools::Itertools;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{estimate_payoffs, EpisodeOptions, Environment, MatrixGameEnv, ObsKey};
use crate::error::{Error, Result};
use crate::game::{EmpiricalGame, MixedStrategy};
use crate::policy::{Actor, Policy};
use crate::rng::{self, purpose};

#[derive(Debug, Clone)]
pub struct LabeledPolicy {
    pub label: String,
    pub policy: Arc<Policy>,
}

impl LabeledPolicy {
    pub fn new(label: impl Into<String>, policy: Arc<Policy>) -> Self {
        LabeledPolicy {
            label: label.into(),
            policy,
        }
    }
}

/// Label of a discovered policy in an empirical game.
pub fn strategy_label(player: usize, index: usize) -> String {
    format!("p{player}_s{index}")
}

/// One weighted list of policies per player.
pub type MixedProfile = Vec<Vec<(LabeledPolicy, f64)>>;

/// Pairs a solution's mixtures with the game's policies, dropping zero weights.
pub fn mixed_profile(game: &EmpiricalGame<Arc<Policy>>, mixtures: &[MixedStrategy]) -> MixedProfile {
    mixtures
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.weights()
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(k, &w)| (LabeledPolicy::new(strategy_label(i, k), game.strategies(i)[k].clone()), w))
                .collect()
        })
        .collect()
}

/// Every policy of each player in the game, labeled.
pub fn psro_set(game: &EmpiricalGame<Arc<Policy>>) -> Vec<Vec<LabeledPolicy>> {
    (0..game.n_players())
        .map(|i| {
            game.strategies(i)
                .iter()
                .enumerate()
                .map(|(k, p)| LabeledPolicy::new(strategy_label(i, k), p.clone()))
                .collect()
        })
        .collect()
}

/// Payoffs of pure policy profiles: exact for matrix games, simulated and cached by
/// label tuple otherwise. Each simulated matchup draws from a stream derived from
/// the root seed and the labels, so results do not depend on query order.
pub struct PayoffEstimator<'a> {
    env: &'a dyn Environment,
    episodes: u64,
    seed: u64,
    cache: Mutex<HashMap<Vec<String>, Vec<f64>>>,
}

impl<'a> PayoffEstimator<'a> {
    pub fn new(env: &'a dyn Environment, episodes: u64, seed: u64) -> Self {
        PayoffEstimator {
            env,
            episodes,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_matchups(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn compute(&self, profile: &[&LabeledPolicy]) -> Result<Vec<f64>> {
        if let Some(m) = self.env.as_matrix() {
            let dists: Vec<Vec<f64>> = profile
                .iter()
                .enumerate()
                .map(|(j, p)| m.action_distribution(j, &p.policy))
                .collect();
            return Ok(m.expected_payoffs(&dists));
        }
        let mut h = DefaultHasher::new();
        for p in profile {
            p.label.hash(&mut h);
        }
        let seed = rng::derive_seed(self.seed, &[purpose::EVAL, h.finish()]);
        let actors: Vec<&dyn Actor> = profile.iter().map(|p| p.policy.as_ref() as &dyn Actor).collect();
        estimate_payoffs(self.env, &actors, self.episodes, seed)
    }

    /// Computes all uncached profiles in parallel.
    pub fn prefetch(&self, profiles: &[Vec<&LabeledPolicy>]) -> Result<()> {
        let todo: Vec<&Vec<&LabeledPolicy>> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = HashSet::new();
            profiles
                .iter()
                .filter(|p| {
                    let key = labels(p);
                    !cache.contains_key(&key) && seen.insert(key)
                })
                .collect()
        };
        let results: Vec<(Vec<String>, Vec<f64>)> = todo
            .par_iter()
            .map(|p| Ok((labels(p), self.compute(p)?)))
            .collect::<Result<_>>()?;
        self.cache.lock().expect("cache lock").extend(results);
        Ok(())
    }

    pub fn payoffs(&self, profile: &[&LabeledPolicy]) -> Result<Vec<f64>> {
        let key = labels(profile);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = self.compute(profile)?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    /// `u_player(deviation, σ_-player)`, or `u_player(σ)` when `deviation` is `None`.
    pub fn expected(&self, player: usize, deviation: Option<&LabeledPolicy>, sigma: &MixedProfile) -> Result<f64> {
        let mut total = 0.0;
        for (profile, prob) in joint_support(player, deviation, sigma) {
            total += prob * self.payoffs(&profile)?[player];
        }
        Ok(total)
    }
}

fn labels(profile: &[&LabeledPolicy]) -> Vec<String> {
    profile.iter().map(|p| p.label.clone()).collect()
}

fn joint_support<'p>(
    player: usize,
    deviation: Option<&'p LabeledPolicy>,
    sigma: &'p MixedProfile,
) -> Vec<(Vec<&'p LabeledPolicy>, f64)> {
    sigma
        .iter()
        .enumerate()
        .map(|(j, mix)| match deviation {
            Some(d) if j == player => vec![(d, 1.0)],
            _ => mix.iter().map(|(p, w)| (p, *w)).collect(),
        })
        .multi_cartesian_product()
        .map(|combo| {
            let prob = combo.iter().map(|(_, w)| w).product();
            (combo.into_iter().map(|(p, _)| p).collect(), prob)
        })
        .collect()
}

/// Per-player `max_{π ∈ D_i} u_i(π, σ_-i) − u_i(σ)`. May be negative for weak sets.
pub fn regret(est: &PayoffEstimator<'_>, sigma: &MixedProfile, deviations: &[Vec<LabeledPolicy>]) -> Result<Vec<f64>> {
    let n = sigma.len();
    if deviations.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} deviation lists for {n} players",
            deviations.len()
        )));
    }
    if let Some(i) = deviations.iter().position(Vec::is_empty) {
        return Err(Error::EmptyDeviationSet(i));
    }
    let mut needed = Vec::new();
    for i in 0..n {
        needed.extend(joint_support(i, None, sigma).into_iter().map(|(p, _)| p));
        for d in &deviations[i] {
            needed.extend(joint_support(i, Some(d), sigma).into_iter().map(|(p, _)| p));
        }
    }
    est.prefetch(&needed)?;
    (0..n)
        .map(|i| {
            let base = est.expected(i, None, sigma)?;
            let mut best = f64::NEG_INFINITY;
            for d in &deviations[i] {
                best = best.max(est.expected(i, Some(d), sigma)?);
            }
            Ok(best - base)
        })
        .collect()
}

/// Regret against `psro ∪ eval`, clipped below at zero.
pub fn proxy_regret(
    est: &PayoffEstimator<'_>,
    sigma: &MixedProfile,
    psro: &[Vec<LabeledPolicy>],
    eval: &[Vec<LabeledPolicy>],
) -> Result<Vec<f64>> {
    let union: Vec<Vec<LabeledPolicy>> = (0..sigma.len())
        .map(|i| {
            let mut all = psro.get(i).cloned().unwrap_or_default();
            all.extend(eval.get(i).cloned().unwrap_or_default());
            all
        })
        .collect();
    Ok(regret(est, sigma, &union)?.into_iter().map(|r| r.max(0.0)).collect())
}

pub fn sum_regret(regrets: &[f64]) -> f64 {
    regrets.iter().sum()
}

/// Exact regret in a matrix game with every pure action as a deviation.
pub fn matrix_regret(env: &MatrixGameEnv, sigma: &MixedProfile) -> Vec<f64> {
    let dists = marginal_actions(env, sigma);
    (0..dists.len())
        .map(|i| {
            let values = env.action_values(i, &dists);
            let base: f64 = values.iter().zip(&dists[i]).map(|(v, p)| v * p).sum();
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - base
        })
        .collect()
}

/// Per-player action distribution induced by a mixture over policies.
pub fn marginal_actions(env: &MatrixGameEnv, sigma: &MixedProfile) -> Vec<Vec<f64>> {
    sigma
        .iter()
        .enumerate()
        .map(|(i, mix)| {
            let mut d = vec![0.0; env.action_counts()[i]];
            for (p, w) in mix {
                for (x, y) in d.iter_mut().zip(env.action_distribution(i, &p.policy)) {
                    *x += w * y;
                }
            }
            d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub labels: Vec<String>,
    /// `agreement[a][b]`: fraction of corpus states where the greedy actions of
    /// policies `a` and `b` coincide.
    pub agreement: Vec<Vec<f64>>,
    pub collected_states: usize,
    pub unique_states: usize,
}

impl SimilarityReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("policy\t{}\n", self.labels.join("\t"));
        for (label, row) in self.labels.iter().zip(&self.agreement) {
            out.push_str(label);
            for v in row {
                out.push_str(&format!("\t{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Greedy-action agreement over the states visited when the policies play each other.
///
/// Every seat assignment of the policies is a candidate profile; at most
/// `profiles_to_sample` of them are simulated for `episodes_per_profile` episodes.
/// States are deduplicated by observation key before comparing.
pub fn similarity_report(
    policies: &[LabeledPolicy],
    env: &dyn Environment,
    profiles_to_sample: usize,
    episodes_per_profile: u64,
    seed: u64,
) -> Result<SimilarityReport> {
    if policies.len() < 2 {
        return Err(Error::InvalidArgument("similarity needs at least two policies".into()));
    }
    let n = env.n_players();
    let all: Vec<Vec<usize>> = (0..n).map(|_| 0..policies.len()).multi_cartesian_product().collect();
    let mut pick = rng::stream(seed, &[purpose::SIMILARITY]);
    let chosen: Vec<Vec<usize>> = if all.len() <= profiles_to_sample {
        all
    } else {
        let mut idx = sample(&mut pick, all.len(), profiles_to_sample).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| all[k].clone()).collect()
    };
    let batches: Vec<Vec<(ObsKey, Vec<usize>)>> = chosen
        .par_iter()
        .enumerate()
        .map(|(c, profile)| {
            let actors: Vec<&dyn Actor> = profile.iter().map(|&k| policies[k].policy.as_ref() as &dyn Actor).collect();
            let mut states = Vec::new();
            for e in 0..episodes_per_profile {
                let mut r = rng::stream(seed, &[purpose::SIMILARITY, c as u64, e]);
                let opts = EpisodeOptions::new(n).seated((e % n as u64) as usize).recording_all();
                let res = env.play(&actors, &opts, &mut r)?;
                for t in res.transitions.into_iter().flatten() {
                    states.push((t.from.observation.key, t.from.legal));
                }
            }
            Ok(states)
        })
        .collect::<Result<_>>()?;
    let collected_states = batches.iter().map(Vec::len).sum();
    let corpus: BTreeMap<ObsKey, Vec<usize>> = batches.into_iter().flatten().collect();
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let greedy: Vec<Vec<usize>> = policies
        .iter()
        .map(|p| {
            corpus
                .iter()
                .map(|(key, legal)| {
                    let obs = crate::env::Observation {
                        key: key.clone(),
                        features: Vec::new(),
                    };
                    p.policy.greedy_action(&obs, legal)
                })
                .collect()
        })
        .collect();
    let m = policies.len();
    let mut agreement = vec![vec![1.0; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let same = greedy[a].iter().zip(&greedy[b]).filter(|(x, y)| x == y).count();
            let v = same as f64 / corpus.len() as f64;
            agreement[a][b] = v;
            agreement[b][a] = v;
        }
    }
    Ok(SimilarityReport {
        labels: policies.iter().map(|p| p.label.clone()).collect(),
        agreement,
        collected_states,
        unique_states: corpus.len(),
    })
}
