//! Best-response oracles producing value-based policies.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeOptions, Environment, MatrixGameEnv, ObsKey, Observation};
use crate::error::{Error, Result};
use crate::policy::{greedy_among, Actor, Policy, QTable, ValuePolicy};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    /// Fixed step size `learning_rate`.
    Constant,
    /// `max(learning_rate, 1 / visits)` per (observation, action): a running
    /// average early on, settling to the configured rate.
    HarmonicFloor,
}

/// Oracle hyperparameters. The replay and batch fields configure
/// function-approximation oracles; the tabular oracle ignores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleHParams {
    pub learning_rate: f64,
    #[serde(default = "default_schedule")]
    pub lr_schedule: LrSchedule,
    /// `None` uses the environment's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    pub total_timesteps: u64,
    pub exploration_timesteps: u64,
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_end")]
    pub epsilon_end: f64,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
    #[serde(default = "default_replay")]
    pub replay_capacity: u64,
    #[serde(default = "default_min_replay")]
    pub min_replay_size: u64,
}

fn default_schedule() -> LrSchedule {
    LrSchedule::HarmonicFloor
}
fn default_epsilon_start() -> f64 {
    1.0
}
fn default_epsilon_end() -> f64 {
    0.03
}
fn default_batch() -> u64 {
    32
}
fn default_replay() -> u64 {
    10_000
}
fn default_min_replay() -> u64 {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Pure,
    Mix,
}

impl OracleHParams {
    pub fn new(learning_rate: f64, total_timesteps: u64, exploration_timesteps: u64) -> Self {
        OracleHParams {
            learning_rate,
            lr_schedule: default_schedule(),
            discount: None,
            total_timesteps,
            exploration_timesteps,
            epsilon_start: default_epsilon_start(),
            epsilon_end: default_epsilon_end(),
            batch_size: default_batch(),
            replay_capacity: default_replay(),
            min_replay_size: default_min_replay(),
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = Some(discount);
        self
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.lr_schedule = schedule;
        self
    }

    /// Named presets. Leduc uses pure: lr 1e-3, 3e3 steps; mix: lr 1e-4, 1e5 steps,
    /// both with 3e2 exploration steps. Matrix games get small budgets.
    pub fn preset(env_name: &str, preset: Preset) -> Self {
        match (env_name, preset) {
            ("leduc", Preset::Pure) => OracleHParams {
                batch_size: 32,
                replay_capacity: 10_000,
                min_replay_size: 100,
                ..OracleHParams::new(1e-3, 3_000, 300)
            },
            ("leduc", Preset::Mix) => OracleHParams {
                batch_size: 64,
                replay_capacity: 3_000,
                min_replay_size: 100,
                ..OracleHParams::new(1e-4, 100_000, 300)
            },
            (_, Preset::Pure) => OracleHParams::new(1e-3, 5_000, 2_500),
            (_, Preset::Mix) => OracleHParams::new(1e-3, 10_000, 5_000),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let fail = |name: &str, why: &str| Err(Error::config(format!("{field}.{name}"), why));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate", "must be in (0, 1]");
        }
        if let Some(g) = self.discount {
            if !(0.0..=1.0).contains(&g) {
                return fail("discount", "must be in [0, 1]");
            }
        }
        if self.exploration_timesteps > self.total_timesteps {
            return fail("exploration_timesteps", "must not exceed total_timesteps");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon_start", "epsilons must be in [0, 1]");
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over the exploration steps.
pub fn epsilon_at(t: u64, hp: &OracleHParams) -> f64 {
    if hp.exploration_timesteps == 0 {
        return hp.epsilon_end;
    }
    let frac = t.min(hp.exploration_timesteps) as f64 / hp.exploration_timesteps as f64;
    hp.epsilon_start - (hp.epsilon_start - hp.epsilon_end) * frac
}

/// For each non-learning player, the policies it may field and their weights.
/// A fixed opponent is a single policy with weight 1.
#[derive(Debug, Clone)]
pub struct OpponentMixture {
    slots: Vec<Option<Vec<(Arc<Policy>, f64)>>>,
}

impl OpponentMixture {
    /// One fixed policy per player; the learner's slot is ignored.
    pub fn fixed(learner: usize, policies: Vec<Arc<Policy>>) -> Self {
        OpponentMixture {
            slots: policies
                .into_iter()
                .enumerate()
                .map(|(j, p)| (j != learner).then(|| vec![(p, 1.0)]))
                .collect(),
        }
    }

    /// Per-player weighted policy lists; the learner's slot must be `None`.
    pub fn mixture(slots: Vec<Option<Vec<(Arc<Policy>, f64)>>>) -> Self {
        OpponentMixture { slots }
    }

    pub fn n_players(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, player: usize) -> Option<&[(Arc<Policy>, f64)]> {
        self.slots[player].as_deref()
    }

    /// Draws one policy per opponent. Singleton slots consume no randomness.
    pub fn sample(&self, rng: &mut SimRng) -> Vec<Option<Arc<Policy>>> {
        self.slots
            .iter()
            .map(|slot| {
                slot.as_ref().map(|items| {
                    if items.len() == 1 {
                        return items[0].0.clone();
                    }
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    for (p, w) in items {
                        acc += w;
                        if u < acc {
                            return p.clone();
                        }
                    }
                    items
                        .iter()
                        .rev()
                        .find(|(_, w)| *w > 0.0)
                        .unwrap_or(&items[items.len() - 1])
                        .0
                        .clone()
                })
            })
            .collect()
    }

    fn validate(&self, env: &dyn Environment, learner: usize) -> Result<()> {
        if self.slots.len() != env.n_players() || learner >= env.n_players() {
            return Err(Error::InvalidArgument(format!(
                "opponent spec for {} players, learner {learner}, environment has {}",
                self.slots.len(),
                env.n_players()
            )));
        }
        for (j, slot) in self.slots.iter().enumerate() {
            match (j == learner, slot) {
                (true, None) => {}
                (false, Some(items)) if !items.is_empty() => {
                    let sum: f64 = items.iter().map(|(_, w)| w).sum();
                    if (sum - 1.0).abs() > 1e-9 || items.iter().any(|(_, w)| *w < 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "opponent weights for player {j} do not form a distribution"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "bad opponent slot for player {j}"
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Response {
    pub policy: ValuePolicy,
    /// Learner timesteps consumed.
    pub steps: u64,
}

/// Produces a best response for `learner` against an opponent mixture.
pub trait ResponseOracle: Send + Sync {
    fn name(&self) -> &'static str;

    fn respond(
        &self,
        env: &dyn Environment,
        learner: usize,
        opponents: &OpponentMixture,
        hparams: &OracleHParams,
        rng: &mut SimRng,
    ) -> Result<Response>;
}

struct Learner<'a> {
    q: &'a QTable,
    epsilon: f64,
}

impl Actor for Learner<'_> {
    fn act(&self, obs: &Observation, legal: &[usize], rng: &mut SimRng) -> usize {
        if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
            return legal[rng.random_range(0..legal.len())];
        }
        let vals = self.q.get(&obs.key);
        match vals {
            Some(v) => greedy_among(v, legal),
            None => legal[0],
        }
    }
}

/// Tabular one-step Q-learning against fixed or per-episode-resampled opponents.
///
/// Opponents are drawn once at the start of every episode and held for the whole
/// episode. The learner's seat alternates with episode parity. Training stops
/// after exactly `total_timesteps` learner updates.
pub fn train_best_response(
    env: &dyn Environment,
    learner: usize,
    opponents: &OpponentMixture,
    hp: &OracleHParams,
    rng: &mut SimRng,
) -> Result<Response> {
    if hp.total_timesteps == 0 {
        return Err(Error::BudgetZero);
    }
    hp.validate("oracle")?;
    opponents.validate(env, learner)?;
    let n = env.n_players();
    let gamma = hp.discount.unwrap_or_else(|| env.default_discount());
    let mut q = QTable::new(env.action_count(learner), 0.0);
    let mut visits: BTreeMap<ObsKey, Vec<u64>> = BTreeMap::new();
    let mut steps = 0u64;
    let mut episode = 0u64;
    while steps < hp.total_timesteps {
        let drawn = opponents.sample(rng);
        let learner_actor = Learner {
            q: &q,
            epsilon: epsilon_at(steps, hp),
        };
        let actors: Vec<&dyn Actor> = (0..n)
            .map(|j| match &drawn[j] {
                Some(p) if j != learner => p.as_ref() as &dyn Actor,
                _ => &learner_actor as &dyn Actor,
            })
            .collect();
        let opts = EpisodeOptions::new(n)
            .seated((episode % n as u64) as usize)
            .recording(learner);
        let result = env.play(&actors, &opts, rng)?;
        episode += 1;
        for t in &result.transitions[learner] {
            if steps == hp.total_timesteps {
                break;
            }
            let bootstrap = match &t.next {
                Some(next) if gamma > 0.0 => gamma * {
                    let v = q.values(&next.observation.key);
                    next.legal.iter().map(|&a| v[a]).fold(f64::NEG_INFINITY, f64::max)
                },
                _ => 0.0,
            };
            let target = t.reward + bootstrap;
            let count = {
                let c = visits
                    .entry(t.from.observation.key.clone())
                    .or_insert_with(|| vec![0; q.action_count()]);
                c[t.action] += 1;
                c[t.action]
            };
            let alpha = match hp.lr_schedule {
                LrSchedule::Constant => hp.learning_rate,
                LrSchedule::HarmonicFloor => hp.learning_rate.max(1.0 / count as f64),
            };
            let row = q.entry(&t.from.observation.key);
            row[t.action] += alpha * (target - row[t.action]);
            steps += 1;
        }
    }
    Ok(Response {
        policy: ValuePolicy::greedy(q),
        steps,
    })
}

/// Exact best response in a matrix game: action values by tensor contraction
/// against each opponent's marginal action distribution.
pub fn exact_best_response(
    env: &dyn Environment,
    learner: usize,
    opponents: &OpponentMixture,
) -> Result<(ValuePolicy, f64)> {
    let matrix: &MatrixGameEnv = env
        .as_matrix()
        .ok_or_else(|| Error::WrongEnvironment(env.name().to_string()))?;
    opponents.validate(env, learner)?;
    let n = env.n_players();
    let dists: Vec<Vec<f64>> = (0..n)
        .map(|j| match opponents.slot(j) {
            Some(items) if j != learner => {
                let mut d = vec![0.0; matrix.action_counts()[j]];
                for (p, w) in items {
                    for (x, y) in d.iter_mut().zip(matrix.action_distribution(j, p)) {
                        *x += w * y;
                    }
                }
                d
            }
            _ => Vec::new(),
        })
        .collect();
    let values = matrix.action_values(learner, &dists);
    let legal: Vec<usize> = (0..values.len()).collect();
    let best = greedy_among(&values, &legal);
    let value = values[best];
    let mut table = QTable::new(values.len(), 0.0);
    table.set(MatrixGameEnv::observation().key, values)?;
    Ok((ValuePolicy::greedy(table), value))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TabularQOracle;

impl ResponseOracle for TabularQOracle {
    fn name(&self) -> &'static str {
        "tabular"
    }

    fn respond(
        &self,
        env: &dyn Environment,
        learner: usize,
        opponents: &OpponentMixture,
        hparams: &OracleHParams,
        rng: &mut SimRng,
    ) -> Result<Response> {
        train_best_response(env, learner, opponents, hparams, rng)
    }
}

/// Analytic oracle for matrix games. Consumes no simulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOracle;

impl ResponseOracle for ExactOracle {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn respond(
        &self,
        env: &dyn Environment,
        learner: usize,
        opponents: &OpponentMixture,
        _hparams: &OracleHParams,
        _rng: &mut SimRng,
    ) -> Result<Response> {
        let (policy, _) = exact_best_response(env, learner, opponents)?;
        Ok(Response { policy, steps: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LeducEnv;
    use crate::rng;

    fn scripted(p: &[f64]) -> Arc<Policy> {
        Arc::new(Policy::stochastic(p.to_vec()).unwrap())
    }

    fn vs(p: &[f64]) -> OpponentMixture {
        OpponentMixture::fixed(1, vec![scripted(p), scripted(&[1.0, 0.0, 0.0])])
    }

    #[test]
    fn epsilon_schedule() {
        let hp = OracleHParams::new(0.1, 1000, 400);
        assert_eq!(epsilon_at(0, &hp), 1.0);
        assert!((epsilon_at(400, &hp) - 0.03).abs() < 1e-15);
        assert!((epsilon_at(200, &hp) - 0.515).abs() < 1e-15);
        assert!((epsilon_at(10_000, &hp) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn hparam_validation() {
        assert!(OracleHParams::new(0.0, 10, 5).validate("o").is_err());
        assert!(OracleHParams::new(0.5, 10, 50).validate("o").is_err());
        assert!(OracleHParams::new(0.5, 10, 5).with_discount(1.5).validate("o").is_err());
        assert!(OracleHParams::new(1.0, 10, 10).validate("o").is_ok());
    }

    #[test]
    fn zero_budget_rejected() {
        let env = MatrixGameEnv::rps();
        let mut r = rng::stream(0, &[]);
        let hp = OracleHParams::new(0.1, 0, 0);
        assert!(matches!(
            train_best_response(&env, 1, &vs(&[1.0, 0.0, 0.0]), &hp, &mut r),
            Err(Error::BudgetZero)
        ));
    }

    #[test]
    fn learns_against_pure_rock() {
        let env = MatrixGameEnv::rps();
        let mut r = rng::stream(1, &[]);
        let hp = OracleHParams::new(0.1, 50_000, 25_000)
            .with_discount(0.0)
            .with_schedule(LrSchedule::Constant);
        let resp = train_best_response(&env, 1, &vs(&[1.0, 0.0, 0.0]), &hp, &mut r).unwrap();
        assert_eq!(resp.steps, 50_000);
        let q = resp.policy.q_values(&MatrixGameEnv::observation().key);
        for (a, b) in q.iter().zip([0.5, 1.0, 0.0]) {
            assert!((a - b).abs() < 0.02, "{q:?}");
        }
        assert_eq!(resp.policy.greedy_action(&MatrixGameEnv::observation().key, &[0, 1, 2]), 1);
    }

    #[test]
    fn exact_response_cases() {
        let env = MatrixGameEnv::rps();
        let key = MatrixGameEnv::observation().key;
        let (p, v) = exact_best_response(&env, 1, &vs(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!((p.greedy_action(&key, &[0, 1, 2]), v), (0, 1.0));
        let (p, v) = exact_best_response(&env, 1, &vs(&[0.0, 0.3, 0.7])).unwrap();
        assert_eq!(p.greedy_action(&key, &[0, 1, 2]), 0);
        assert!((v - 0.7).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let (p, v) = exact_best_response(&env, 1, &vs(&[third, third, third])).unwrap();
        assert_eq!(p.greedy_action(&key, &[0, 1, 2]), 0);
        assert!((v - 0.5).abs() < 1e-12);
        let leduc = LeducEnv::new();
        let random = Arc::new(Policy::Value(ValuePolicy::uniform_random(3)));
        assert!(matches!(
            exact_best_response(&leduc, 0, &OpponentMixture::fixed(0, vec![random.clone(), random])),
            Err(Error::WrongEnvironment(_))
        ));
    }

    #[test]
    fn exact_response_over_policy_mixture() {
        let env = MatrixGameEnv::rps();
        let opp = OpponentMixture::mixture(vec![
            Some(vec![
                (scripted(&[0.0, 0.3, 0.7]), 10.0 / 21.0),
                (scripted(&[0.4, 0.6, 0.0]), 11.0 / 21.0),
            ]),
            None,
        ]);
        let (p, _) = exact_best_response(&env, 1, &opp).unwrap();
        let q = p.q_values(&MatrixGameEnv::observation().key);
        // Marginal opponent: (4.4, 9.6, 7)/21.
        let marg = [4.4 / 21.0, 9.6 / 21.0, 7.0 / 21.0];
        let expect = [
            0.5 * marg[0] + marg[2],
            marg[0] + 0.5 * marg[1],
            marg[1] + 0.5 * marg[2],
        ];
        for (a, b) in q.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_exact_on_leduc() {
        let env = LeducEnv::new();
        let random = Arc::new(Policy::Value(ValuePolicy::uniform_random(3)));
        let opp = OpponentMixture::fixed(0, vec![random.clone(), random]);
        let hp = OracleHParams::new(0.1, 777, 300);
        let mut r = rng::stream(5, &[]);
        let resp = train_best_response(&env, 0, &opp, &hp, &mut r).unwrap();
        assert_eq!(resp.steps, 777);
        assert!(!match &resp.policy.source {
            crate::policy::QSource::Table(t) => t.is_empty(),
            _ => true,
        });
    }

    #[test]
    fn sampling_is_per_episode() {
        let opp = OpponentMixture::mixture(vec![
            None,
            Some(vec![(scripted(&[1.0, 0.0, 0.0]), 0.5), (scripted(&[0.0, 1.0, 0.0]), 0.5)]),
        ]);
        let mut r = rng::stream(8, &[]);
        let mut firsts = 0;
        for _ in 0..1000 {
            let d = opp.sample(&mut r);
            assert!(d[0].is_none());
            if let Policy::Stochastic { probabilities } = d[1].as_deref().unwrap() {
                firsts += (probabilities[0] == 1.0) as usize;
            }
        }
        assert!(firsts > 430 && firsts < 570);
    }
}
