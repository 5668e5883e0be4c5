//! Experiment orchestration behind the `psro` binary.
//!
//! A run directory holds:
//!
//! ```text
//! config.toml         resolved config
//! record.json         per-epoch run record
//! game.txt            final empirical game
//! regret_curve.tsv    epoch, cumulative_timesteps, regret_p*, sum_regret
//! checkpoint/         resumable run state
//! similarity.tsv      greedy-action agreement (when enabled)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;

use crate::config::ExperimentConfig;
use crate::engine::{load_game, load_record, Algorithm, RunConfig, Run, RunRecord};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::eval::{
    matrix_regret, mixed_profile, proxy_regret, psro_set, similarity_report, sum_regret, LabeledPolicy, PayoffEstimator,
};
use crate::game::{EmpiricalGame, MixedStrategy};
use crate::hparam_search::{hparam_search, HParamSearchSpec, SearchOutcome};
use crate::policy::{Policy, ValuePolicy};
use crate::rng::{self, purpose, SimRng};

/// Environment variable naming the directory that receives run outputs.
pub const OUTPUT_ROOT_ENV: &str = "PSRO_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("psro-runs"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub epoch: usize,
    pub cumulative_timesteps: u64,
    pub regrets: Vec<f64>,
    pub sum_regret: f64,
}

pub fn curve_tsv(rows: &[CurveRow]) -> String {
    let n = rows.first().map_or(0, |r| r.regrets.len());
    let mut out = String::from("epoch\tcumulative_timesteps");
    for i in 0..n {
        out.push_str(&format!("\tregret_p{i}"));
    }
    out.push_str("\tsum_regret\n");
    for r in rows {
        out.push_str(&format!("{}\t{}", r.epoch, r.cumulative_timesteps));
        for x in &r.regrets {
            out.push_str(&format!("\t{x}"));
        }
        out.push_str(&format!("\t{}\n", r.sum_regret));
    }
    out
}

pub fn parse_curve(text: &str) -> Result<Vec<CurveRow>> {
    let bad = |line: usize, reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty regret curve"))?;
    let width = header.split('\t').count();
    if width < 4 {
        return Err(bad(1, "header has too few columns"));
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != width {
                return Err(bad(i + 1, "wrong column count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
            Ok(CurveRow {
                epoch: cols[0].parse().map_err(|_| bad(i + 1, "bad epoch"))?,
                cumulative_timesteps: cols[1].parse().map_err(|_| bad(i + 1, "bad timestep count"))?,
                regrets: cols[2..width - 1].iter().map(|s| num(s)).collect::<Result<_>>()?,
                sum_regret: num(cols[width - 1])?,
            })
        })
        .collect()
}

fn sample_indices(mix: &MixedStrategy, count: usize, rng: &mut SimRng) -> Vec<usize> {
    let w = mix.weights();
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in w.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            w.iter().rposition(|p| *p > 0.0).unwrap_or(0)
        })
        .collect()
}

fn checkpoint_dir(run_dir: &Path) -> PathBuf {
    let nested = run_dir.join("checkpoint");
    if nested.is_dir() {
        nested
    } else {
        run_dir.to_path_buf()
    }
}

fn final_solution(dir: &Path) -> Result<(EmpiricalGame<Arc<Policy>>, RunRecord)> {
    let dir = checkpoint_dir(dir);
    Ok((load_game(&dir)?, load_record(&dir)?))
}

/// Held-out policies drawn from the final solution of another run.
///
/// `size` draws per player are taken with replacement from that player's mixture;
/// repeated draws collapse, so a player may end up with fewer policies.
pub fn build_eval_set(run_dir: &Path, size: usize, seed: u64) -> Result<Vec<Vec<LabeledPolicy>>> {
    let (game, record) = final_solution(run_dir)?;
    let mixtures = &record.last().solution.mixtures;
    (0..game.n_players())
        .map(|i| {
            let mut idx = sample_indices(&mixtures[i], size, &mut rng::stream(seed, &[purpose::EVAL_SET, i as u64]));
            idx.sort_unstable();
            idx.dedup();
            Ok(idx
                .into_iter()
                .map(|k| LabeledPolicy::new(format!("eval_p{i}_s{k}"), game.strategies(i)[k].clone()))
                .collect())
        })
        .collect()
}

/// Regret of every epoch's solution.
///
/// Without an eval set, matrix games use exact regret over pure actions. Otherwise
/// regret is the clipped proxy against the final discovered policies plus the eval
/// set, with simulated matchups of `episodes` episodes.
pub fn regret_curve(
    env: &dyn Environment,
    game: &EmpiricalGame<Arc<Policy>>,
    record: &RunRecord,
    eval_set: Option<&[Vec<LabeledPolicy>]>,
    episodes: u64,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    let est = PayoffEstimator::new(env, episodes, rng::derive_seed(seed, &[purpose::EVAL]));
    let psro = psro_set(game);
    record
        .epochs
        .iter()
        .map(|rec| {
            let sigma = mixed_profile(game, &rec.solution.mixtures);
            let regrets = match (env.as_matrix(), eval_set) {
                (Some(m), None) => matrix_regret(m, &sigma),
                (_, eval) => proxy_regret(&est, &sigma, &psro, eval.unwrap_or(&[]))?,
            };
            Ok(CurveRow {
                epoch: rec.epoch,
                cumulative_timesteps: rec.training_steps,
                sum_regret: sum_regret(&regrets),
                regrets,
            })
        })
        .collect()
}

fn fmt_regrets(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub curve: Vec<CurveRow>,
}

/// Runs the configured experiment and writes its artifacts to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, mut log: impl FnMut(&str)) -> Result<RunOutputs> {
    let eval_set = cfg
        .evaluation
        .eval_set
        .as_deref()
        .map(|d| build_eval_set(d, cfg.evaluation.eval_set_size, cfg.run.seed))
        .transpose()?;
    let mut run = Run::new(cfg.run.clone())?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    log(&format!(
        "{} on {}, {} epochs, seed {}",
        cfg.run.algorithm,
        run.env().name(),
        cfg.run.epochs,
        cfg.run.seed
    ));
    while let Some(rec) = run.step()? {
        let mut line = format!(
            "epoch {:>3}  steps {:>9}  cells {:>3}  enfg_regret {}",
            rec.epoch,
            rec.training_steps,
            rec.cells_simulated,
            fmt_regrets(&rec.enfg_regret)
        );
        if let Some(g) = &rec.game_regret {
            line.push_str(&format!("  game_sum_regret {:.6}", sum_regret(g)));
        }
        log(&line);
    }
    if run.record().stopped_early {
        log(&format!("stopped early after epoch {}", run.epoch()));
    }
    run.checkpoint(&out.join("checkpoint"))?;
    fs::write(out.join("game.txt"), run.game().to_text())?;
    let record = run.record().clone();
    fs::write(
        out.join("record.json"),
        serde_json::to_string_pretty(&record).map_err(|e| Error::InvalidArgument(e.to_string()))?,
    )?;
    let curve = regret_curve(
        run.env(),
        run.game(),
        &record,
        eval_set.as_deref(),
        cfg.evaluation.episodes,
        cfg.run.seed,
    )?;
    fs::write(out.join("regret_curve.tsv"), curve_tsv(&curve))?;
    if let Some(last) = curve.last() {
        log(&format!("final sum_regret {:.6}", last.sum_regret));
    }
    if cfg.evaluation.similarity {
        let labeled: Vec<LabeledPolicy> = psro_set(run.game()).into_iter().flatten().collect();
        let report = similarity_report(
            &labeled,
            run.env(),
            cfg.evaluation.similarity_profiles,
            cfg.evaluation.similarity_episodes,
            cfg.run.seed,
        )?;
        fs::write(out.join("similarity.tsv"), report.to_tsv())?;
        log(&format!(
            "similarity: {} states collected, {} unique",
            report.collected_states, report.unique_states
        ));
    }
    Ok(RunOutputs {
        dir: out.to_path_buf(),
        record,
        curve,
    })
}

/// Regret curve of a finished checkpoint against held-out policies from `eval_run`.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    eval_run: &Path,
    size: usize,
    episodes: u64,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    let run = Run::resume(&checkpoint_dir(checkpoint))?;
    let eval_set = build_eval_set(eval_run, size, seed)?;
    let (_, other) = final_solution(eval_run)?;
    if other.env_name != run.record().env_name {
        return Err(Error::EnvironmentMismatch(run.record().env_name.clone(), other.env_name));
    }
    regret_curve(run.env(), run.game(), run.record(), Some(&eval_set), episodes, seed)
}

/// Long-format table of several runs' curves on the epoch and timestep axes.
pub fn compare(run_dirs: &[PathBuf]) -> Result<String> {
    if run_dirs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "compare needs at least two run directories, got {}",
            run_dirs.len()
        )));
    }
    let mut env: Option<String> = None;
    let mut out = String::from("run\talgorithm\taxis\tx\tsum_regret\n");
    for dir in run_dirs {
        let text = fs::read_to_string(dir.join("record.json")).map_err(|e| Error::corrupt(dir, e))?;
        let record: RunRecord = serde_json::from_str(&text).map_err(|e| Error::corrupt(dir, e))?;
        match &env {
            None => env = Some(record.env_name.clone()),
            Some(e) if *e != record.env_name => {
                return Err(Error::EnvironmentMismatch(e.clone(), record.env_name));
            }
            _ => {}
        }
        let curve_text = fs::read_to_string(dir.join("regret_curve.tsv")).map_err(|e| Error::corrupt(dir, e))?;
        let curve = parse_curve(&curve_text)?;
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        let alg = record.config.algorithm;
        for r in &curve {
            out.push_str(&format!("{name}\t{alg}\tepoch\t{}\t{}\n", r.epoch, r.sum_regret));
        }
        for r in &curve {
            out.push_str(&format!("{name}\t{alg}\ttimesteps\t{}\t{}\n", r.cumulative_timesteps, r.sum_regret));
        }
    }
    Ok(out)
}

/// Opponents for the search: `k` draws from the last player's final mixture in `run_dir`.
fn opponents_from_run(run_dir: &Path, k: usize, seed: u64) -> Result<Vec<Arc<Policy>>> {
    let (game, record) = final_solution(run_dir)?;
    let j = game.n_players() - 1;
    let idx = sample_indices(&record.last().solution.mixtures[j], k, &mut rng::stream(seed, &[purpose::SEARCH, 9]));
    Ok(idx.into_iter().map(|i| game.strategies(j)[i].clone()).collect())
}

/// Runs the search and writes `hparams.toml` and `hparam_scores.tsv` to `out`.
///
/// Without supplied opponents, a first search against a uniform random opponent
/// picks a budget for a short PSRO run whose final solution supplies the opponents.
pub fn run_hparam_search(cfg: &ExperimentConfig, out: &Path, mut log: impl FnMut(&str)) -> Result<SearchOutcome> {
    let spec = cfg
        .hparam_search
        .clone()
        .ok_or_else(|| Error::config("hparam_search", "section is missing"))?;
    let env: Arc<dyn Environment> = Arc::from(cfg.run.env.build(None)?);
    fs::create_dir_all(out)?;
    let opponents = match &spec.opponents {
        Some(dir) => opponents_from_run(dir, spec.opponent_count, spec.seed)?,
        None => {
            let random = Arc::new(Policy::Value(ValuePolicy::uniform_random(env.action_count(1))));
            let phase_one = HParamSearchSpec {
                opponent_count: 1,
                ..spec.clone()
            };
            let first = hparam_search(&phase_one, env.as_ref(), &[random])?;
            fs::write(out.join("hparam_scores_random.tsv"), first.scores_tsv())?;
            log(&format!(
                "random-opponent phase: config {} (score {:.4})",
                first.pure_index, first.scores[first.pure_index].pure_score
            ));
            let boot_dir = out.join("bootstrap");
            let mut boot = RunConfig {
                epochs: spec.bootstrap_epochs.max(1),
                seed: rng::derive_seed(spec.seed, &[purpose::SEARCH, 8]),
                pure: first.pure.clone(),
                mix: first.pure.clone(),
                ..cfg.run.clone()
            };
            boot.algorithm = Algorithm::Psro;
            let mut run = Run::with_env(boot, env.clone())?;
            run.run()?;
            run.checkpoint(&boot_dir)?;
            log(&format!("bootstrap PSRO run: {} epochs", run.epoch()));
            opponents_from_run(&boot_dir, spec.opponent_count, spec.seed)?
        }
    };
    let outcome = hparam_search(&spec, env.as_ref(), &opponents)?;
    fs::write(out.join("hparam_scores.tsv"), outcome.scores_tsv())?;
    fs::write(out.join("hparams.toml"), outcome.to_toml())?;
    log(&format!(
        "pure: config {} (score {:.4}), mix: config {} (score {:.4})",
        outcome.pure_index,
        outcome.scores[outcome.pure_index].pure_score,
        outcome.mix_index,
        outcome.scores[outcome.mix_index].mix_score
    ));
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(alg: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "[engine]\nalgorithm = \"{alg}\"\nepochs = 3\nseed = 5\n[env]\nname = \"rps\"\n\
             [oracle.pure]\ntotal_timesteps = 400\nexploration_timesteps = 200\nlearning_rate = 0.05\n\
             [oracle.mix]\ntotal_timesteps = 400\nexploration_timesteps = 200\nlearning_rate = 0.05\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn curve_round_trip() {
        let rows = vec![
            CurveRow {
                epoch: 0,
                cumulative_timesteps: 0,
                regrets: vec![0.25, 0.5],
                sum_regret: 0.75,
            },
            CurveRow {
                epoch: 1,
                cumulative_timesteps: 800,
                regrets: vec![0.1, 1.0 / 3.0],
                sum_regret: 0.1 + 1.0 / 3.0,
            },
        ];
        assert_eq!(parse_curve(&curve_tsv(&rows)).unwrap(), rows);
        assert!(parse_curve("epoch\tx\n").is_err());
    }

    #[test]
    fn run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config("psro", "[evaluation]\nsimilarity = true\nsimilarity_profiles = 4\n"), dir.path(), |_| {}).unwrap();
        for f in ["config.toml", "record.json", "game.txt", "regret_curve.tsv", "similarity.tsv", "checkpoint/state.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(out.curve.len(), 4);
        for (row, rec) in out.curve.iter().zip(&out.record.epochs) {
            assert_eq!(row.regrets, *rec.game_regret.as_ref().unwrap());
        }
        let reloaded = ExperimentConfig::parse(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
        assert_eq!(reloaded, config("psro", "[evaluation]\nsimilarity = true\nsimilarity_profiles = 4\n"));
    }

    #[test]
    fn eval_set_and_compare() {
        let root = tempfile::tempdir().unwrap();
        let a = root.path().join("a");
        let b = root.path().join("b");
        run_experiment(&config("psro", ""), &a, |_| {}).unwrap();
        run_experiment(&config("mixed-opponents", ""), &b, |_| {}).unwrap();

        let eval = build_eval_set(&a, 6, 1).unwrap();
        assert_eq!(eval.len(), 2);
        assert!(eval.iter().all(|s| !s.is_empty() && s.len() <= 4));
        let curve = evaluate_checkpoint(&b, &a, 6, 30, 0).unwrap();
        assert_eq!(curve.len(), 4);
        assert!(curve.iter().all(|r| r.regrets.iter().all(|x| *x >= 0.0)));

        let table = compare(&[a.clone(), b.clone()]).unwrap();
        assert!(table.contains("\tpsro\tepoch\t"));
        assert!(table.contains("\tmixed-opponents\ttimesteps\t"));
        assert_eq!(table.lines().count(), 1 + 2 * 2 * 4);
        assert!(compare(&[a.clone()]).unwrap_err().is_config_error());

        let mut rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("record.json")).unwrap()).unwrap();
        rec["env_name"] = "leduc".into();
        fs::write(b.join("record.json"), rec.to_string()).unwrap();
        assert!(matches!(compare(&[a, b]), Err(Error::EnvironmentMismatch(..))));
    }

    #[test]
    fn search_bootstraps_opponents() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            "psro",
            "[hparam_search]\nsample_count = 3\nopponent_count = 2\nbootstrap_epochs = 2\n\
             learning_rate = [0.01, 0.1]\ntotal_timesteps = [300]\nexploration_timesteps = [100]\n",
        );
        let out = run_hparam_search(&cfg, dir.path(), |_| {}).unwrap();
        assert_eq!(out.scores.len(), 3);
        for f in ["hparams.toml", "hparam_scores.tsv", "hparam_scores_random.tsv", "bootstrap/state.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let again = tempfile::tempdir().unwrap();
        assert_eq!(run_hparam_search(&cfg, again.path(), |_| {}).unwrap(), out);
        assert!(run_hparam_search(&config("psro", ""), dir.path(), |_| {}).unwrap_err().is_config_error());
    }
}
