//! Random search over oracle hyperparameters.
//!
//! Each sampled config is scored twice: the mean final greedy return over `k`
//! independent trainings against single opponents (pure score), and the final
//! greedy return after training against the uniform mixture of the same `k`
//! opponents (mix score). The best config for each score becomes the pure and mix
//! budget respectively.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{estimate_payoffs, Environment};
use crate::error::{Error, Result};
use crate::oracle::{train_best_response, OpponentMixture, OracleHParams, Preset};
use crate::policy::{Actor, Policy};
use crate::rng::{self, purpose};

/// Candidate values per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HParamGrid {
    pub batch_size: Vec<u64>,
    pub replay_capacity: Vec<u64>,
    pub min_replay_size: Vec<u64>,
    pub learning_rate: Vec<f64>,
    pub exploration_timesteps: Vec<u64>,
    pub total_timesteps: Vec<u64>,
}

impl HParamGrid {
    /// Leduc candidate lists.
    pub fn leduc() -> Self {
        HParamGrid {
            batch_size: vec![32, 64],
            replay_capacity: vec![300, 1_000, 3_000, 10_000],
            min_replay_size: vec![100, 300, 1_000],
            learning_rate: vec![1e-3, 3e-3, 1e-4, 3e-4],
            exploration_timesteps: vec![300, 1_000, 3_000, 10_000, 30_000, 100_000],
            total_timesteps: vec![1_000, 3_000, 10_000, 30_000, 100_000, 300_000],
        }
    }

    /// Small grid for matrix games.
    pub fn desk() -> Self {
        HParamGrid {
            learning_rate: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
            exploration_timesteps: vec![300, 1_000, 3_000],
            total_timesteps: vec![1_000, 3_000, 10_000],
            ..HParamGrid::leduc()
        }
    }

    pub fn for_env(env_name: &str) -> Self {
        if env_name == "leduc" {
            HParamGrid::leduc()
        } else {
            HParamGrid::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("batch_size", self.batch_size.len()),
            ("replay_capacity", self.replay_capacity.len()),
            ("min_replay_size", self.min_replay_size.len()),
            ("learning_rate", self.learning_rate.len()),
            ("exploration_timesteps", self.exploration_timesteps.len()),
            ("total_timesteps", self.total_timesteps.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return Err(Error::config(format!("hparam_search.{name}"), "candidate list is empty"));
            }
        }
        if self.total_timesteps.contains(&0) {
            return Err(Error::config("hparam_search.total_timesteps", "candidates must be positive"));
        }
        if self.learning_rate.iter().any(|&lr| !(lr > 0.0 && lr <= 1.0)) {
            return Err(Error::config("hparam_search.learning_rate", "candidates must be in (0, 1]"));
        }
        Ok(())
    }

    /// Draws one config uniformly. Exploration longer than the budget is clamped to it.
    pub fn sample(&self, rng: &mut impl Rng) -> OracleHParams {
        fn pick<T: Copy>(rng: &mut impl Rng, xs: &[T]) -> T {
            xs[rng.random_range(0..xs.len())]
        }
        let batch_size = pick(rng, &self.batch_size);
        let replay_capacity = pick(rng, &self.replay_capacity);
        let min_replay_size = pick(rng, &self.min_replay_size);
        let learning_rate = pick(rng, &self.learning_rate);
        let exploration = pick(rng, &self.exploration_timesteps);
        let total = pick(rng, &self.total_timesteps);
        OracleHParams {
            batch_size,
            replay_capacity,
            min_replay_size,
            ..OracleHParams::new(learning_rate, total, exploration.min(total))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HParamSearchSpec {
    pub grid: HParamGrid,
    pub sample_count: usize,
    /// Number of opponent policies `k`.
    pub opponent_count: usize,
    pub seed: u64,
    /// Episodes used to measure each final greedy return (ignored for matrix games).
    pub eval_episodes: u64,
    /// PSRO epochs used to generate opponents when none are supplied.
    pub bootstrap_epochs: usize,
    /// Run directory whose final solution supplies the opponents.
    pub opponents: Option<PathBuf>,
}

impl HParamSearchSpec {
    pub fn defaults(env_name: &str, seed: u64) -> Self {
        HParamSearchSpec {
            grid: HParamGrid::for_env(env_name),
            sample_count: 30,
            opponent_count: 5,
            seed,
            eval_episodes: 200,
            bootstrap_epochs: 3,
            opponents: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.sample_count == 0 {
            return Err(Error::config("hparam_search.sample_count", "must be at least 1"));
        }
        if self.opponent_count == 0 {
            return Err(Error::config("hparam_search.opponent_count", "must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("hparam_search.eval_episodes", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub hparams: OracleHParams,
    pub pure_score: f64,
    pub mix_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub pure: OracleHParams,
    pub mix: OracleHParams,
    /// Index into `scores` of each winner.
    pub pure_index: usize,
    pub mix_index: usize,
    /// Per sampled config, in sampling order.
    pub scores: Vec<ConfigScore>,
}

impl SearchOutcome {
    pub fn scores_tsv(&self) -> String {
        let mut out = String::from(
            "config\tlearning_rate\ttotal_timesteps\texploration_timesteps\tbatch_size\treplay_capacity\tmin_replay_size\tpure_score\tmix_score\n",
        );
        for (c, s) in self.scores.iter().enumerate() {
            let h = &s.hparams;
            out.push_str(&format!(
                "{c}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                h.learning_rate,
                h.total_timesteps,
                h.exploration_timesteps,
                h.batch_size,
                h.replay_capacity,
                h.min_replay_size,
                s.pure_score,
                s.mix_score
            ));
        }
        out
    }

    /// `[oracle.pure]` and `[oracle.mix]` tables ready to paste into a run config.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Oracle<'a> {
            pure: &'a OracleHParams,
            mix: &'a OracleHParams,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            oracle: Oracle<'a>,
        }
        toml::to_string(&Doc {
            oracle: Oracle {
                pure: &self.pure,
                mix: &self.mix,
            },
        })
        .expect("hparams serialize")
    }
}

/// Player 0's expected return when `learner` faces `opponent` in every other seat.
pub fn greedy_return(env: &dyn Environment, learner: &Policy, opponent: &Policy, episodes: u64, seed: u64) -> Result<f64> {
    let n = env.n_players();
    if let Some(m) = env.as_matrix() {
        let dists: Vec<Vec<f64>> = (0..n)
            .map(|j| m.action_distribution(j, if j == 0 { learner } else { opponent }))
            .collect();
        return Ok(m.expected_payoffs(&dists)[0]);
    }
    let actors: Vec<&dyn Actor> = (0..n)
        .map(|j| if j == 0 { learner as &dyn Actor } else { opponent as &dyn Actor })
        .collect();
    Ok(estimate_payoffs(env, &actors, episodes, seed)?[0])
}

fn score(
    env: &dyn Environment,
    hp: &OracleHParams,
    opponents: &[Arc<Policy>],
    spec: &HParamSearchSpec,
    c: u64,
) -> Result<ConfigScore> {
    let n = env.n_players();
    let slot_of = |items: Vec<(Arc<Policy>, f64)>| {
        OpponentMixture::mixture((0..n).map(|j| (j != 0).then(|| items.clone())).collect())
    };
    let eval_seed = |k: u64| rng::derive_seed(spec.seed, &[purpose::SEARCH, 3, c, k]);
    let mut pure_total = 0.0;
    for (k, opp) in opponents.iter().enumerate() {
        let k = k as u64;
        let mut r = rng::stream(spec.seed, &[purpose::SEARCH, 1, c, k]);
        let br = train_best_response(env, 0, &slot_of(vec![(opp.clone(), 1.0)]), hp, &mut r)?;
        pure_total += greedy_return(env, &Policy::Value(br.policy), opp, spec.eval_episodes, eval_seed(k))?;
    }
    let w = 1.0 / opponents.len() as f64;
    let uniform = slot_of(opponents.iter().map(|p| (p.clone(), w)).collect());
    let mut r = rng::stream(spec.seed, &[purpose::SEARCH, 2, c]);
    let br = Policy::Value(train_best_response(env, 0, &uniform, hp, &mut r)?.policy);
    let mut mix_score = 0.0;
    for (k, opp) in opponents.iter().enumerate() {
        mix_score += w * greedy_return(env, &br, opp, spec.eval_episodes, eval_seed(k as u64))?;
    }
    Ok(ConfigScore {
        hparams: hp.clone(),
        pure_score: pure_total / opponents.len() as f64,
        mix_score,
    })
}

fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Samples `spec.sample_count` configs and picks the pure and mix winners.
/// Ties go to the config sampled first. The learner is player 0 and each opponent
/// policy fills every other seat.
pub fn hparam_search(spec: &HParamSearchSpec, env: &dyn Environment, opponents: &[Arc<Policy>]) -> Result<SearchOutcome> {
    spec.validate()?;
    if opponents.len() != spec.opponent_count {
        return Err(Error::InvalidArgument(format!(
            "{} opponent policies supplied, opponent_count is {}",
            opponents.len(),
            spec.opponent_count
        )));
    }
    let mut r = rng::stream(spec.seed, &[purpose::SEARCH, 0]);
    let configs: Vec<OracleHParams> = (0..spec.sample_count).map(|_| spec.grid.sample(&mut r)).collect();
    let scores: Vec<ConfigScore> = configs
        .par_iter()
        .enumerate()
        .map(|(c, hp)| score(env, hp, opponents, spec, c as u64))
        .collect::<Result<_>>()?;
    let pure_index = argmax(scores.iter().map(|s| s.pure_score));
    let mix_index = argmax(scores.iter().map(|s| s.mix_score));
    Ok(SearchOutcome {
        pure: scores[pure_index].hparams.clone(),
        mix: scores[mix_index].hparams.clone(),
        pure_index,
        mix_index,
        scores,
    })
}

/// Convenience for callers without a grid: the env's default presets as a one-point grid.
pub fn preset_grid(env_name: &str) -> HParamGrid {
    let p = OracleHParams::preset(env_name, Preset::Pure);
    HParamGrid {
        batch_size: vec![p.batch_size],
        replay_capacity: vec![p.replay_capacity],
        min_replay_size: vec![p.min_replay_size],
        learning_rate: vec![p.learning_rate],
        exploration_timesteps: vec![p.exploration_timesteps],
        total_timesteps: vec![p.total_timesteps],
    }
}
