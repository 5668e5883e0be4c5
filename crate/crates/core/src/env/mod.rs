//! Episodic multiagent environments.

mod leduc;
mod matrix;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Actor;
use crate::rng::{self, SimRng};

pub use leduc::{LeducAction, LeducEnv, LeducInfoState, LEDUC_FEATURES};
pub use matrix::MatrixGameEnv;

/// Canonical byte rendering of an information state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObsKey(String);

impl ObsKey {
    pub fn new(key: impl Into<String>) -> Self {
        ObsKey(key.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub key: ObsKey,
    pub features: Vec<f64>,
}

/// A decision point together with the actions legal there.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    pub observation: Observation,
    pub legal: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: DecisionPoint,
    pub action: usize,
    pub reward: f64,
    /// The agent's next decision point; `None` when the episode ended.
    pub next: Option<DecisionPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub returns: Vec<f64>,
    /// Per player; empty unless that player was recorded.
    pub transitions: Vec<Vec<Transition>>,
    /// Player seated first to act.
    pub first_player: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    pub first_player: usize,
    pub record: Vec<bool>,
}

impl EpisodeOptions {
    pub fn new(n_players: usize) -> Self {
        EpisodeOptions {
            first_player: 0,
            record: vec![false; n_players],
        }
    }

    pub fn seated(mut self, first_player: usize) -> Self {
        self.first_player = first_player;
        self
    }

    pub fn recording(mut self, player: usize) -> Self {
        self.record[player] = true;
        self
    }

    pub fn recording_all(mut self) -> Self {
        self.record.iter_mut().for_each(|r| *r = true);
        self
    }
}

/// The simulation contract. Actors are fixed for the whole episode.
pub trait Environment: Send + Sync {
    /// Canonical environment spec, e.g. `rps` or `leduc`.
    fn name(&self) -> &str;

    fn n_players(&self) -> usize;

    fn action_count(&self, player: usize) -> usize;

    fn play(
        &self,
        actors: &[&dyn Actor],
        options: &EpisodeOptions,
        rng: &mut SimRng,
    ) -> Result<EpisodeResult>;

    /// Discount used by the tabular oracle unless configured otherwise.
    fn default_discount(&self) -> f64;

    fn as_matrix(&self) -> Option<&MatrixGameEnv> {
        None
    }
}

pub(crate) fn check_action(player: usize, action: usize, legal: &[usize]) -> Result<()> {
    if legal.contains(&action) {
        Ok(())
    } else {
        Err(Error::IllegalAction {
            player,
            action,
            legal: legal.to_vec(),
        })
    }
}

/// One episode with default seating, recording nobody.
pub fn simulate_episode(
    env: &dyn Environment,
    actors: &[&dyn Actor],
    rng: &mut SimRng,
) -> Result<EpisodeResult> {
    env.play(actors, &EpisodeOptions::new(env.n_players()), rng)
}

/// Mean per-player return over `episodes` independent episodes.
///
/// Episode `k` draws from its own stream derived from `(seed, k)` and seats player
/// `k mod n` first, so the result does not depend on how episodes are sharded.
pub fn estimate_payoffs(
    env: &dyn Environment,
    actors: &[&dyn Actor],
    episodes: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let n = env.n_players();
    if actors.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} actors for {n} players",
            actors.len()
        )));
    }
    let returns: Vec<Vec<f64>> = (0..episodes)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, &[k]);
            let opts = EpisodeOptions::new(n).seated((k % n as u64) as usize);
            env.play(actors, &opts, &mut r).map(|e| e.returns)
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; n];
    for ret in &returns {
        for (m, r) in mean.iter_mut().zip(ret) {
            *m += r;
        }
    }
    mean.iter_mut().for_each(|m| *m /= episodes as f64);
    Ok(mean)
}

/// Environment selector as written in run configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EnvSpec {
    Rps,
    Leduc,
    Matrix(String),
}

impl EnvSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rps" => Ok(EnvSpec::Rps),
            "leduc" => Ok(EnvSpec::Leduc),
            _ => match s.strip_prefix("matrix:") {
                Some(path) if !path.is_empty() => Ok(EnvSpec::Matrix(path.to_string())),
                _ => Err(Error::config(
                    "env.name",
                    format!("unknown environment `{s}` (expected rps, leduc or matrix:<file>)"),
                )),
            },
        }
    }

    /// Builds the environment; relative matrix paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Rps => Box::new(MatrixGameEnv::rps()),
            EnvSpec::Leduc => Box::new(LeducEnv::new()),
            EnvSpec::Matrix(path) => {
                let p = Path::new(path);
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::config("env.name", format!("{}: {e}", full.display())))?;
                let mut env = MatrixGameEnv::from_json(&text)?;
                env.set_name(format!("matrix:{path}"));
                Box::new(env)
            }
        })
    }
}

impl TryFrom<String> for EnvSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        EnvSpec::parse(&s)
    }
}

impl From<EnvSpec> for String {
    fn from(spec: EnvSpec) -> String {
        spec.to_string()
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Rps => f.write_str("rps"),
            EnvSpec::Leduc => f.write_str("leduc"),
            EnvSpec::Matrix(p) => write!(f, "matrix:{p}"),
        }
    }
}
