//! Epoch loops for PSRO, Mixed-Oracles and Mixed-Opponents, with incremental
//! empirical-game expansion.
//!
//! Every epoch `e` trains one new policy per player against the solution `σ*,e−1`
//! of the previous epoch, adds the policies, simulates only the newly reachable
//! payoff cells and re-solves. The three algorithms differ only in what a learner
//! trains against:
//!
//! | algorithm        | training opponent                                  | budget |
//! |------------------|----------------------------------------------------|--------|
//! | PSRO             | policies resampled from `σ_-i` at each episode     | mix    |
//! | Mixed-Oracles    | the opponent's newest policy; the added policy is the Q-mix of all stored responses under `σ_-i` | pure |
//! | Mixed-Opponents  | one Q-mixed opponent per opponent player           | pure   |

mod checkpoint;

pub use checkpoint::{load_game, load_policy, load_record, policy_file};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{estimate_payoffs, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::eval::{matrix_regret, mixed_profile};
use crate::game::{EmpiricalGame, MixedStrategy, StrategyId};
use crate::oracle::{ExactOracle, OpponentMixture, OracleHParams, Preset, ResponseOracle, TabularQOracle};
use crate::policy::{Actor, Policy, ValuePolicy};
use crate::qmix::{combine_opponents, combine_responses};
use crate::rng::{self, purpose};
use crate::solvers::{solve_uniform, SolutionProfile, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Psro,
    MixedOracles,
    MixedOpponents,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Psro, Algorithm::MixedOracles, Algorithm::MixedOpponents];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Psro => "psro",
            Algorithm::MixedOracles => "mixed-oracles",
            Algorithm::MixedOpponents => "mixed-opponents",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| {
                Error::config(
                    "engine.algorithm",
                    format!("unknown algorithm `{s}` (expected psro, mixed-oracles or mixed-opponents)"),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Tabular,
    Exact,
}

/// How empirical payoff cells are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffEval {
    /// Mean return over `episodes_per_cell` simulated episodes.
    #[default]
    Simulate,
    /// Exact expectation; matrix games only.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub env: EnvSpec,
    pub solver: SolverKind,
    pub epochs: usize,
    pub episodes_per_cell: u64,
    pub oracle: OracleKind,
    /// Budget for training against a single fixed opponent.
    pub pure: OracleHParams,
    /// Budget for training against an opponent mixture.
    pub mix: OracleHParams,
    pub seed: u64,
    pub workers: usize,
    /// Stop once the previous solution's ENFG SumRegret, measured after expansion,
    /// falls below this value.
    pub early_stop: Option<f64>,
    pub payoff_eval: PayoffEval,
}

impl RunConfig {
    pub const DEFAULT_EPISODES_PER_CELL: u64 = 30;

    pub fn new(algorithm: Algorithm, env: EnvSpec) -> Self {
        let name = env.to_string();
        RunConfig {
            algorithm,
            solver: SolverKind::nash(),
            epochs: 5,
            episodes_per_cell: Self::DEFAULT_EPISODES_PER_CELL,
            oracle: OracleKind::Tabular,
            pure: OracleHParams::preset(&name, Preset::Pure),
            mix: OracleHParams::preset(&name, Preset::Mix),
            seed: 0,
            workers: 1,
            early_stop: None,
            payoff_eval: PayoffEval::Simulate,
            env,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("engine.epochs", "must be at least 1"));
        }
        if self.episodes_per_cell == 0 {
            return Err(Error::config("engine.episodes_per_cell", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("engine.workers", "must be at least 1"));
        }
        if let Some(t) = self.early_stop {
            if !(t >= 0.0) {
                return Err(Error::config("engine.early_stop", "must be non-negative"));
            }
        }
        match self.solver {
            SolverKind::Nash { tolerance } if !(tolerance > 0.0) => {
                return Err(Error::config("solver.tolerance", "must be positive"));
            }
            SolverKind::Replicator { step_size, .. } if !(step_size > 0.0) => {
                return Err(Error::config("solver.step_size", "must be positive"));
            }
            _ => {}
        }
        self.pure.validate("oracle.pure")?;
        self.mix.validate("oracle.mix")?;
        if self.oracle == OracleKind::Tabular {
            if self.pure.total_timesteps == 0 {
                return Err(Error::config("oracle.pure.total_timesteps", "must be at least 1"));
            }
            if self.algorithm == Algorithm::Psro && self.mix.total_timesteps == 0 {
                return Err(Error::config("oracle.mix.total_timesteps", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Budget used by the configured algorithm for each training call.
    pub fn training_hparams(&self) -> &OracleHParams {
        match self.algorithm {
            Algorithm::Psro => &self.mix,
            Algorithm::MixedOracles | Algorithm::MixedOpponents => &self.pure,
        }
    }
}

/// Stored best responses `λ_i^j`, index-aligned with the opponent's strategy set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResponseLibrary {
    pub per_player: Vec<Vec<Arc<Policy>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Solution the epoch's learners trained against (`σ*,e−1`), padded with zeros
    /// for the policies added this epoch.
    pub targeted: Vec<Vec<f64>>,
    /// Solution of the expanded game (`σ*,e`).
    pub solution: SolutionProfile,
    pub new_ids: Vec<StrategyId>,
    pub epoch_training_steps: u64,
    /// Cumulative learner timesteps across all training calls.
    pub training_steps: u64,
    /// Cumulative episodes spent filling payoff cells.
    pub eval_episodes: u64,
    pub cells_simulated: usize,
    /// Per-player regret of `σ*,e` within the empirical game.
    pub enfg_regret: Vec<f64>,
    /// Per-player regret of `σ*,e−1` within the expanded empirical game.
    pub targeted_enfg_regret: Vec<f64>,
    /// Exact regret of `σ*,e` in the underlying game (matrix games only).
    pub game_regret: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub env_name: String,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl RunRecord {
    pub fn last(&self) -> &EpochRecord {
        self.epochs.last().expect("a run always has its initial record")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expansion {
    pub cells: usize,
    pub episodes: u64,
}

/// Fills exactly the missing payoff cells, in `missing_profiles` order. Existing
/// cells are never re-simulated. Cell `(k_0, .., k_n)` draws from a stream derived
/// from `seed` and its indices, so the result is independent of sharding.
pub fn expand_enfg(
    game: &mut EmpiricalGame<Arc<Policy>>,
    env: &dyn Environment,
    episodes_per_cell: u64,
    seed: u64,
    mode: PayoffEval,
) -> Result<Expansion> {
    let missing = game.missing_profiles();
    let matrix = match mode {
        PayoffEval::Analytic => Some(
            env.as_matrix()
                .ok_or_else(|| Error::config("engine.payoff_eval", format!("analytic payoffs need a matrix game, not `{}`", env.name())))?,
        ),
        PayoffEval::Simulate => None,
    };
    let filled: Vec<Vec<f64>> = missing
        .par_iter()
        .map(|profile| {
            let policies: Vec<&Policy> = profile
                .indices()
                .iter()
                .enumerate()
                .map(|(j, &k)| game.strategies(j)[k].as_ref())
                .collect();
            match matrix {
                Some(m) => {
                    let dists: Vec<Vec<f64>> = policies
                        .iter()
                        .enumerate()
                        .map(|(j, p)| m.action_distribution(j, p))
                        .collect();
                    Ok(m.expected_payoffs(&dists))
                }
                None => {
                    let mut path = vec![purpose::EXPAND];
                    path.extend(profile.indices().iter().map(|&k| k as u64));
                    let actors: Vec<&dyn Actor> = policies.iter().map(|p| *p as &dyn Actor).collect();
                    estimate_payoffs(env, &actors, episodes_per_cell, rng::derive_seed(seed, &path))
                }
            }
        })
        .collect::<Result<_>>()?;
    let (count, episodes) = match mode {
        PayoffEval::Simulate => (episodes_per_cell, episodes_per_cell * missing.len() as u64),
        PayoffEval::Analytic => (1, 0),
    };
    for (profile, payoffs) in missing.iter().zip(filled) {
        game.record(profile.clone(), payoffs, count)?;
    }
    Ok(Expansion {
        cells: missing.len(),
        episodes,
    })
}

struct Trained {
    policy: Policy,
    response: Option<Arc<Policy>>,
    steps: u64,
}

/// A run in progress. Create with [`Run::new`], advance with [`Run::step`].
pub struct Run {
    config: RunConfig,
    env: Arc<dyn Environment>,
    oracle: Box<dyn ResponseOracle>,
    pool: rayon::ThreadPool,
    game: EmpiricalGame<Arc<Policy>>,
    library: ResponseLibrary,
    record: RunRecord,
    finished: bool,
}

impl fmt::Debug for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Run")
            .field("algorithm", &self.config.algorithm)
            .field("env", &self.env.name())
            .field("epoch", &self.epoch())
            .finish()
    }
}

impl Run {
    /// Builds the configured environment (relative matrix paths resolve against the
    /// working directory) and starts from one uniform-random policy per player.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let env: Arc<dyn Environment> = Arc::from(config.env.build(None)?);
        Self::with_env(config, env)
    }

    pub fn with_env(config: RunConfig, env: Arc<dyn Environment>) -> Result<Self> {
        let initial = (0..env.n_players())
            .map(|i| Arc::new(Policy::Value(ValuePolicy::uniform_random(env.action_count(i)))))
            .collect();
        Self::with_initial_policies(config, env, initial)
    }

    /// Starts from the given policies, one per player.
    pub fn with_initial_policies(
        config: RunConfig,
        env: Arc<dyn Environment>,
        initial: Vec<Arc<Policy>>,
    ) -> Result<Self> {
        config.validate()?;
        let n = env.n_players();
        if initial.len() != n {
            return Err(Error::InvalidArgument(format!("{} initial policies for {n} players", initial.len())));
        }
        let mut game = EmpiricalGame::new(n);
        let new_ids = initial.into_iter().enumerate().map(|(i, p)| game.add_policy(i, p)).collect();
        let mut run = Self::assemble(config, env, game, ResponseLibrary::default(), None)?;
        let expansion = run.expand()?;
        let solution = solve_uniform(&run.game);
        let enfg_regret = run.game.regrets(&solution.mixtures)?;
        let game_regret = run.game_regret(&solution);
        run.record.epochs.push(EpochRecord {
            epoch: 0,
            targeted: solution.mixtures.iter().map(|m| m.weights().to_vec()).collect(),
            solution,
            new_ids,
            epoch_training_steps: 0,
            training_steps: 0,
            eval_episodes: expansion.episodes,
            cells_simulated: expansion.cells,
            targeted_enfg_regret: enfg_regret.clone(),
            enfg_regret,
            game_regret,
        });
        Ok(run)
    }

    fn assemble(
        config: RunConfig,
        env: Arc<dyn Environment>,
        game: EmpiricalGame<Arc<Policy>>,
        library: ResponseLibrary,
        record: Option<RunRecord>,
    ) -> Result<Self> {
        let n = env.n_players();
        if config.algorithm == Algorithm::MixedOracles && n != 2 {
            return Err(Error::PlayerCountUnsupported { supported: 2, actual: n });
        }
        let oracle: Box<dyn ResponseOracle> = match config.oracle {
            OracleKind::Tabular => Box::new(TabularQOracle),
            OracleKind::Exact => {
                if env.as_matrix().is_none() {
                    return Err(Error::config(
                        "oracle.kind",
                        format!("the exact oracle needs a matrix game, not `{}`", env.name()),
                    ));
                }
                Box::new(ExactOracle)
            }
        };
        if config.payoff_eval == PayoffEval::Analytic && env.as_matrix().is_none() {
            return Err(Error::config("engine.payoff_eval", "analytic payoffs need a matrix game"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let library = if library.per_player.is_empty() {
            ResponseLibrary {
                per_player: vec![Vec::new(); n],
            }
        } else {
            library
        };
        let record = record.unwrap_or_else(|| RunRecord {
            config: config.clone(),
            env_name: env.name().to_string(),
            epochs: Vec::new(),
            stopped_early: false,
        });
        let finished = record.stopped_early || record.epochs.len() > config.epochs;
        Ok(Run {
            config,
            env,
            oracle,
            pool,
            game,
            library,
            record,
            finished,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn game(&self) -> &EmpiricalGame<Arc<Policy>> {
        &self.game
    }

    pub fn library(&self) -> &ResponseLibrary {
        &self.library
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    /// Index of the last completed epoch; 0 before any training.
    pub fn epoch(&self) -> usize {
        self.record.last().epoch
    }

    /// Current solution `σ*,e`.
    pub fn solution(&self) -> &SolutionProfile {
        &self.record.last().solution
    }

    pub fn is_finished(&self) -> bool {
        self.finished || self.epoch() >= self.config.epochs
    }

    /// Runs every remaining epoch.
    pub fn run(&mut self) -> Result<&RunRecord> {
        while self.step()?.is_some() {}
        Ok(&self.record)
    }

    /// Runs one epoch. `None` once the run is finished.
    pub fn step(&mut self) -> Result<Option<&EpochRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let e = self.epoch() + 1;
        let target = self.solution().mixtures.clone();
        let n = self.game.n_players();
        let trained: Vec<Trained> = self
            .pool
            .install(|| (0..n).into_par_iter().map(|i| self.train(e, i, &target)).collect::<Result<_>>())?;

        let epoch_training_steps = trained.iter().map(|t| t.steps).sum();
        let mut new_ids = Vec::with_capacity(n);
        for (i, t) in trained.into_iter().enumerate() {
            if let Some(r) = t.response {
                self.library.per_player[i].push(r);
            }
            new_ids.push(self.game.add_policy(i, Arc::new(t.policy)));
        }
        self.game.epoch = e;
        let expansion = self.expand()?;

        let solution = self.config.solver.solve(&self.game)?;
        let padded: Vec<MixedStrategy> = target
            .iter()
            .map(|m| {
                let mut w = m.weights().to_vec();
                w.push(0.0);
                MixedStrategy::new(m.player, w)
            })
            .collect::<Result<_>>()?;
        let targeted_enfg_regret = self.game.regrets(&padded)?;
        let enfg_regret = self.game.regrets(&solution.mixtures)?;
        let game_regret = self.game_regret(&solution);
        let prev = self.record.last();
        let record = EpochRecord {
            epoch: e,
            targeted: padded.iter().map(|m| m.weights().to_vec()).collect(),
            new_ids,
            epoch_training_steps,
            training_steps: prev.training_steps + epoch_training_steps,
            eval_episodes: prev.eval_episodes + expansion.episodes,
            cells_simulated: expansion.cells,
            enfg_regret,
            game_regret,
            solution,
            targeted_enfg_regret,
        };
        if let Some(tol) = self.config.early_stop {
            if record.targeted_enfg_regret.iter().sum::<f64>() < tol {
                self.record.stopped_early = true;
                self.finished = true;
            }
        }
        self.record.epochs.push(record);
        Ok(Some(self.record.last()))
    }

    fn expand(&mut self) -> Result<Expansion> {
        let env = self.env.clone();
        let (episodes, seed, mode) = (self.config.episodes_per_cell, self.config.seed, self.config.payoff_eval);
        let game = &mut self.game;
        self.pool.install(|| expand_enfg(game, env.as_ref(), episodes, seed, mode))
    }

    fn game_regret(&self, solution: &SolutionProfile) -> Option<Vec<f64>> {
        self.env
            .as_matrix()
            .map(|m| matrix_regret(m, &mixed_profile(&self.game, &solution.mixtures)))
    }

    fn train(&self, e: usize, i: usize, target: &[MixedStrategy]) -> Result<Trained> {
        let env = self.env.as_ref();
        let n = self.game.n_players();
        let mut rng = rng::stream(self.config.seed, &[purpose::TRAIN, e as u64, i as u64]);
        let hp = self.config.training_hparams();
        match self.config.algorithm {
            Algorithm::Psro => {
                let slots = (0..n)
                    .map(|j| {
                        (j != i).then(|| {
                            self.game
                                .strategies(j)
                                .iter()
                                .zip(target[j].weights())
                                .filter(|(_, w)| **w > 0.0)
                                .map(|(p, w)| (p.clone(), *w))
                                .collect()
                        })
                    })
                    .collect();
                let r = self.oracle.respond(env, i, &OpponentMixture::mixture(slots), hp, &mut rng)?;
                Ok(Trained {
                    policy: Policy::Value(r.policy),
                    response: None,
                    steps: r.steps,
                })
            }
            Algorithm::MixedOracles => {
                let j = 1 - i;
                let newest = self.game.strategies(j).last().expect("non-empty").clone();
                let mut fixed = vec![newest.clone(); n];
                fixed[i] = self.game.strategies(i).last().expect("non-empty").clone();
                let r = self.oracle.respond(env, i, &OpponentMixture::fixed(i, fixed), hp, &mut rng)?;
                let response = Arc::new(Policy::Value(r.policy));
                let mut responses: Vec<Option<Arc<Policy>>> =
                    self.library.per_player[i].iter().cloned().map(Some).collect();
                responses.push(Some(response.clone()));
                let combined = combine_responses(&responses, &target[j])?;
                Ok(Trained {
                    policy: Policy::Value(combined),
                    response: Some(response),
                    steps: r.steps,
                })
            }
            Algorithm::MixedOpponents => {
                let mut fixed = Vec::with_capacity(n);
                for j in 0..n {
                    if j == i {
                        fixed.push(self.game.strategies(i).last().expect("non-empty").clone());
                    } else {
                        let combined = combine_opponents(self.game.strategies(j), &target[j])?;
                        fixed.push(Arc::new(Policy::Value(combined)));
                    }
                }
                let r = self.oracle.respond(env, i, &OpponentMixture::fixed(i, fixed), hp, &mut rng)?;
                Ok(Trained {
                    policy: Policy::Value(r.policy),
                    response: None,
                    steps: r.steps,
                })
            }
        }
    }
}
