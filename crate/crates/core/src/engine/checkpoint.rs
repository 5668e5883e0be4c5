//! Checkpoint directory layout:
//!
//! ```text
//! state.json            config, counters, per-epoch records
//! game.txt              empirical game (strategy counts and payoff cells)
//! policies/pI_sK.json   one file per strategy id
//! library.json          stored best responses (Mixed-Oracles)
//! env.json              payoff tensor, matrix games only
//! ```
//!
//! Every JSON file carries a `version` field. Random streams are derived from the
//! root seed per epoch and player, so no generator state is stored.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ResponseLibrary, Run, RunRecord};
use crate::env::{EnvSpec, Environment, MatrixGameEnv};
use crate::error::{Error, Result};
use crate::game::EmpiricalGame;
use crate::policy::Policy;

const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct State {
    record: RunRecord,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    policy: Policy,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    library: ResponseLibrary,
}

fn write_json<T: Serialize>(path: &Path, body: T) -> Result<()> {
    let text = serde_json::to_string(&Versioned { version: VERSION, body })
        .map_err(|e| Error::corrupt(path, e))?;
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::corrupt(path, e))?;
    let v: Versioned<T> = serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e))?;
    if v.version != VERSION {
        return Err(Error::corrupt(path, format!("unsupported version {}", v.version)));
    }
    Ok(v.body)
}

pub fn policy_file(dir: &Path, player: usize, index: usize) -> PathBuf {
    dir.join("policies").join(format!("p{player}_s{index}.json"))
}

/// Reads one stored policy.
pub fn load_policy(path: &Path) -> Result<Policy> {
    read_json::<PolicyFile>(path).map(|f| f.policy)
}

/// Reads the empirical game and its policies.
pub fn load_game(dir: &Path) -> Result<EmpiricalGame<Arc<Policy>>> {
    let game_path = dir.join("game.txt");
    let text = fs::read_to_string(&game_path).map_err(|e| Error::corrupt(&game_path, e))?;
    let skeleton = EmpiricalGame::from_text(&text).map_err(|e| Error::corrupt(&game_path, e))?;
    let mut failure = None;
    let game = skeleton.map_handles(|id, ()| match load_policy(&policy_file(dir, id.player, id.index)) {
        Ok(p) => Arc::new(p),
        Err(e) => {
            failure.get_or_insert(e);
            Arc::new(Policy::Stochastic { probabilities: vec![1.0] })
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(game),
    }
}

/// Reads the run record without rebuilding the run.
pub fn load_record(dir: &Path) -> Result<RunRecord> {
    read_json::<State>(&dir.join("state.json")).map(|s| s.record)
}

impl Run {
    /// Writes the full run state to `dir`, creating it if needed.
    pub fn checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("policies"))?;
        fs::write(dir.join("game.txt"), self.game.to_text())?;
        for i in 0..self.game.n_players() {
            for (k, p) in self.game.strategies(i).iter().enumerate() {
                write_json(&policy_file(dir, i, k), PolicyFile { policy: (**p).clone() })?;
            }
        }
        write_json(
            &dir.join("library.json"),
            LibraryFile {
                library: self.library.clone(),
            },
        )?;
        if let Some(m) = self.env.as_matrix() {
            fs::write(dir.join("env.json"), m.to_json())?;
        }
        write_json(
            &dir.join("state.json"),
            State {
                record: self.record.clone(),
            },
        )
    }

    /// Restores a run written by [`Run::checkpoint`]. Continuing it reproduces the
    /// trajectory of an uninterrupted run with the same config.
    pub fn resume(dir: &Path) -> Result<Run> {
        if !dir.is_dir() {
            return Err(Error::corrupt(dir, "checkpoint directory does not exist"));
        }
        let record = load_record(dir)?;
        let config = record.config.clone();
        let env: Arc<dyn Environment> = match &config.env {
            EnvSpec::Matrix(_) | EnvSpec::Rps => {
                let path = dir.join("env.json");
                let text = fs::read_to_string(&path).map_err(|e| Error::corrupt(&path, e))?;
                let mut m = MatrixGameEnv::from_json(&text).map_err(|e| Error::corrupt(&path, e))?;
                m.set_name(config.env.to_string());
                Arc::new(m)
            }
            EnvSpec::Leduc => Arc::from(config.env.build(None)?),
        };
        if env.name() != record.env_name {
            return Err(Error::corrupt(
                dir,
                format!("environment `{}` does not match recorded `{}`", env.name(), record.env_name),
            ));
        }
        let game = load_game(dir)?;
        let library = read_json::<LibraryFile>(&dir.join("library.json"))?.library;
        let last = record.last();
        if game.sizes().iter().any(|&s| s != last.epoch + 1) || game.n_players() != env.n_players() {
            return Err(Error::corrupt(dir, "strategy sets do not match the recorded epoch"));
        }
        Run::assemble(config, env, game, library, Some(record))
    }
}
