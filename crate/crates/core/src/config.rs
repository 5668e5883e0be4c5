//! TOML experiment configs.
//!
//! ```toml
//! [engine]
//! algorithm = "mixed-opponents"   # psro | mixed-oracles | mixed-opponents
//! epochs = 6
//! episodes_per_cell = 30
//! seed = 7
//!
//! [env]
//! name = "rps"                    # rps | leduc | matrix:<file.json>
//!
//! [solver]
//! name = "nash"                   # nash | replicator | uniform | last
//!
//! [oracle]
//! kind = "tabular"                # tabular | exact
//! [oracle.pure]                   # any subset; the rest comes from the env preset
//! total_timesteps = 3000
//! ```
//!
//! Parsing resolves every default, and [`ExperimentConfig::to_toml`] writes the
//! resolved form, so parse, serialize and parse again yields the same config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Algorithm, OracleKind, PayoffEval, RunConfig};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::hparam_search::{HParamGrid, HParamSearchSpec};
use crate::oracle::{OracleHParams, Preset};
use crate::solvers::{SolverKind, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Episodes per matchup when payoffs are simulated.
    pub episodes: u64,
    /// Run directory whose final solution supplies held-out policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_set: Option<PathBuf>,
    pub eval_set_size: usize,
    pub similarity: bool,
    pub similarity_profiles: usize,
    pub similarity_episodes: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            episodes: RunConfig::DEFAULT_EPISODES_PER_CELL,
            eval_set: None,
            eval_set_size: 6,
            similarity: false,
            similarity_profiles: 50,
            similarity_episodes: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub evaluation: EvaluationConfig,
    pub hparam_search: Option<HParamSearchSpec>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    engine: RawEngine,
    env: RawEnv,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    evaluation: RawEvaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hparam_search: Option<RawSearch>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    algorithm: String,
    epochs: Option<usize>,
    episodes_per_cell: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    early_stop: Option<f64>,
    payoff_eval: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    name: String,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    name: Option<String>,
    tolerance: Option<f64>,
    steps: Option<u64>,
    step_size: Option<f64>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    kind: Option<String>,
    pure: Option<toml::Table>,
    mix: Option<toml::Table>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    episodes: Option<u64>,
    eval_set: Option<PathBuf>,
    eval_set_size: Option<usize>,
    similarity: Option<bool>,
    similarity_profiles: Option<usize>,
    similarity_episodes: Option<u64>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    sample_count: Option<usize>,
    opponent_count: Option<usize>,
    seed: Option<u64>,
    eval_episodes: Option<u64>,
    bootstrap_epochs: Option<usize>,
    opponents: Option<PathBuf>,
    batch_size: Option<Vec<u64>>,
    replay_capacity: Option<Vec<u64>>,
    min_replay_size: Option<Vec<u64>>,
    learning_rate: Option<Vec<f64>>,
    exploration_timesteps: Option<Vec<u64>>,
    total_timesteps: Option<Vec<u64>>,
}

fn hparams(field: &str, preset: OracleHParams, overrides: Option<toml::Table>) -> Result<OracleHParams> {
    let Some(overrides) = overrides else { return Ok(preset) };
    let mut table = toml::Table::try_from(&preset).map_err(|e| Error::config(field, e.to_string()))?;
    table.extend(overrides);
    let hp: OracleHParams = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(field, e.message().to_string()))?;
    hp.validate(field)?;
    Ok(hp)
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let EnvSpec::Matrix(p) = &self.run.env {
            if Path::new(p).is_relative() {
                self.run.env = EnvSpec::Matrix(base.join(p).to_string_lossy().into_owned());
            }
        }
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.evaluation.eval_set.as_mut() {
            fix(p);
        }
        if let Some(p) = self.hparam_search.as_mut().and_then(|s| s.opponents.as_mut()) {
            fix(p);
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, e.message().trim().to_string())
        })?;
        let algorithm: Algorithm = raw.engine.algorithm.parse()?;
        let env = EnvSpec::parse(&raw.env.name)?;
        let env_name = env.to_string();
        let mut run = RunConfig::new(algorithm, env);
        let e = raw.engine;
        run.epochs = e.epochs.unwrap_or(run.epochs);
        run.episodes_per_cell = e.episodes_per_cell.unwrap_or(run.episodes_per_cell);
        run.seed = e.seed.unwrap_or(run.seed);
        run.workers = e.workers.unwrap_or(run.workers);
        run.early_stop = e.early_stop;
        run.payoff_eval = match e.payoff_eval.as_deref() {
            None | Some("simulate") => PayoffEval::Simulate,
            Some("analytic") => PayoffEval::Analytic,
            Some(other) => {
                return Err(Error::config(
                    "engine.payoff_eval",
                    format!("unknown mode `{other}` (expected simulate or analytic)"),
                ))
            }
        };

        let s = raw.solver;
        run.solver = match s.name.as_deref().unwrap_or("nash").parse()? {
            SolverKind::Nash { .. } => SolverKind::Nash {
                tolerance: s.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            },
            SolverKind::Replicator { .. } => SolverKind::Replicator {
                steps: s.steps.unwrap_or(SolverKind::DEFAULT_REPLICATOR_STEPS),
                step_size: s.step_size.unwrap_or(SolverKind::DEFAULT_STEP_SIZE),
            },
            other => other,
        };

        let o = raw.oracle;
        run.oracle = match o.kind.as_deref().unwrap_or("tabular") {
            "tabular" => OracleKind::Tabular,
            "exact" => OracleKind::Exact,
            other => {
                return Err(Error::config(
                    "oracle.kind",
                    format!("unknown oracle `{other}` (expected tabular or exact)"),
                ))
            }
        };
        run.pure = hparams("oracle.pure", OracleHParams::preset(&env_name, Preset::Pure), o.pure)?;
        run.mix = hparams("oracle.mix", OracleHParams::preset(&env_name, Preset::Mix), o.mix)?;
        run.validate()?;

        let d = EvaluationConfig::default();
        let v = raw.evaluation;
        let evaluation = EvaluationConfig {
            episodes: v.episodes.unwrap_or(d.episodes),
            eval_set: v.eval_set,
            eval_set_size: v.eval_set_size.unwrap_or(d.eval_set_size),
            similarity: v.similarity.unwrap_or(d.similarity),
            similarity_profiles: v.similarity_profiles.unwrap_or(d.similarity_profiles),
            similarity_episodes: v.similarity_episodes.unwrap_or(d.similarity_episodes),
        };
        if evaluation.episodes == 0 {
            return Err(Error::config("evaluation.episodes", "must be at least 1"));
        }

        let hparam_search = raw
            .hparam_search
            .map(|h| {
                let base = HParamSearchSpec::defaults(&env_name, run.seed);
                let g = base.grid.clone();
                let spec = HParamSearchSpec {
                    grid: HParamGrid {
                        batch_size: h.batch_size.unwrap_or(g.batch_size),
                        replay_capacity: h.replay_capacity.unwrap_or(g.replay_capacity),
                        min_replay_size: h.min_replay_size.unwrap_or(g.min_replay_size),
                        learning_rate: h.learning_rate.unwrap_or(g.learning_rate),
                        exploration_timesteps: h.exploration_timesteps.unwrap_or(g.exploration_timesteps),
                        total_timesteps: h.total_timesteps.unwrap_or(g.total_timesteps),
                    },
                    sample_count: h.sample_count.unwrap_or(base.sample_count),
                    opponent_count: h.opponent_count.unwrap_or(base.opponent_count),
                    seed: h.seed.unwrap_or(base.seed),
                    eval_episodes: h.eval_episodes.unwrap_or(base.eval_episodes),
                    bootstrap_epochs: h.bootstrap_epochs.unwrap_or(base.bootstrap_epochs),
                    opponents: h.opponents,
                };
                spec.validate().map(|_| spec)
            })
            .transpose()?;

        Ok(ExperimentConfig {
            run,
            evaluation,
            hparam_search,
        })
    }

    /// Fully resolved config text.
    pub fn to_toml(&self) -> String {
        let r = &self.run;
        let (tolerance, steps, step_size) = match r.solver {
            SolverKind::Nash { tolerance } => (Some(tolerance), None, None),
            SolverKind::Replicator { steps, step_size } => (None, Some(steps), Some(step_size)),
            _ => (None, None, None),
        };
        let table = |hp: &OracleHParams| toml::Table::try_from(hp).expect("hparams serialize");
        let raw = RawConfig {
            engine: RawEngine {
                algorithm: r.algorithm.to_string(),
                epochs: Some(r.epochs),
                episodes_per_cell: Some(r.episodes_per_cell),
                seed: Some(r.seed),
                workers: Some(r.workers),
                early_stop: r.early_stop,
                payoff_eval: Some(
                    match r.payoff_eval {
                        PayoffEval::Simulate => "simulate",
                        PayoffEval::Analytic => "analytic",
                    }
                    .into(),
                ),
            },
            env: RawEnv { name: r.env.to_string() },
            solver: RawSolver {
                name: Some(r.solver.label().into()),
                tolerance,
                steps,
                step_size,
            },
            oracle: RawOracle {
                kind: Some(
                    match r.oracle {
                        OracleKind::Tabular => "tabular",
                        OracleKind::Exact => "exact",
                    }
                    .into(),
                ),
                pure: Some(table(&r.pure)),
                mix: Some(table(&r.mix)),
            },
            evaluation: RawEvaluation {
                episodes: Some(self.evaluation.episodes),
                eval_set: self.evaluation.eval_set.clone(),
                eval_set_size: Some(self.evaluation.eval_set_size),
                similarity: Some(self.evaluation.similarity),
                similarity_profiles: Some(self.evaluation.similarity_profiles),
                similarity_episodes: Some(self.evaluation.similarity_episodes),
            },
            hparam_search: self.hparam_search.as_ref().map(|s| RawSearch {
                sample_count: Some(s.sample_count),
                opponent_count: Some(s.opponent_count),
                seed: Some(s.seed),
                eval_episodes: Some(s.eval_episodes),
                bootstrap_epochs: Some(s.bootstrap_epochs),
                opponents: s.opponents.clone(),
                batch_size: Some(s.grid.batch_size.clone()),
                replay_capacity: Some(s.grid.replay_capacity.clone()),
                min_replay_size: Some(s.grid.min_replay_size.clone()),
                learning_rate: Some(s.grid.learning_rate.clone()),
                exploration_timesteps: Some(s.grid.exploration_timesteps.clone()),
                total_timesteps: Some(s.grid.total_timesteps.clone()),
            }),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[engine]
algorithm = "mixed-opponents"
epochs = 4
seed = 3

[env]
name = "rps"
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.run.algorithm, Algorithm::MixedOpponents);
        assert_eq!(c.run.episodes_per_cell, 30);
        assert_eq!(c.run.solver, SolverKind::nash());
        assert_eq!(c.run.pure, OracleHParams::preset("rps", Preset::Pure));
        assert!(c.hparam_search.is_none());
    }

    #[test]
    fn leduc_presets_carry_table_values() {
        let c = ExperimentConfig::parse("[engine]\nalgorithm = \"psro\"\n[env]\nname = \"leduc\"\n").unwrap();
        assert_eq!(c.run.pure.learning_rate, 1e-3);
        assert_eq!(c.run.pure.total_timesteps, 3_000);
        assert_eq!(c.run.mix.learning_rate, 1e-4);
        assert_eq!(c.run.mix.total_timesteps, 100_000);
        assert_eq!(c.run.mix.batch_size, 64);
        assert_eq!(c.run.pure.replay_capacity, 10_000);
    }

    #[test]
    fn partial_override() {
        let text = format!("{MINIMAL}\n[oracle.pure]\ntotal_timesteps = 123\nexploration_timesteps = 100\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.run.pure.total_timesteps, 123);
        assert_eq!(c.run.pure.learning_rate, OracleHParams::preset("rps", Preset::Pure).learning_rate);
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}\n[solver]\nname = \"replicator\"\nsteps = 50\n[hparam_search]\nsample_count = 3\n[evaluation]\neval_set = \"/tmp/x\"\n"
        );
        let once = ExperimentConfig::parse(&text).unwrap();
        let twice = ExperimentConfig::parse(&once.to_toml()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.to_toml(), twice.to_toml());
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::parse(text).unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&MINIMAL.replace("mixed-opponents", "alpha-psro")), "engine.algorithm");
        assert_eq!(field_of(&MINIMAL.replace("\"rps\"", "\"chess\"")), "env.name");
        assert_eq!(field_of(&format!("{MINIMAL}[solver]\nname = \"rm\"\n")), "solver.name");
        assert_eq!(field_of(&MINIMAL.replace("epochs = 4", "epochs = 0")), "engine.epochs");
        assert_eq!(
            field_of(&format!("{MINIMAL}[oracle.mix]\nlearning_rate = 2.0\n")),
            "oracle.mix.learning_rate"
        );
        assert_eq!(field_of(&format!("{MINIMAL}[oracle]\nkind = \"dqn\"\n")), "oracle.kind");
        assert!(ExperimentConfig::parse("[engine]\nepochs = 2\n[env]\nname = \"rps\"\n").is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}[bogus]\nx = 1\n")).unwrap_err().is_config_error());
    }

    #[test]
    fn mixed_oracles_three_player_matrix_fails_at_run_time_not_parse_time() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("g.json"),
            r#"{"action_counts":[1,1,1],"payoffs":[[0.0,0.0,0.0]]}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("c.toml"),
            "[engine]\nalgorithm = \"mixed-oracles\"\n[env]\nname = \"matrix:g.json\"\n",
        )
        .unwrap();
        let c = ExperimentConfig::load(&dir.path().join("c.toml")).unwrap();
        assert!(matches!(
            crate::engine::Run::new(c.run),
            Err(Error::PlayerCountUnsupported { .. })
        ));
    }
}
