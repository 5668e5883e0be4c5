//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed, including on
//! success. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;

use psro::config::ExperimentConfig;
use psro::engine::{expand_enfg, Algorithm, OracleKind, PayoffEval, Run, RunConfig};
use psro::env::{EnvSpec, EpisodeOptions, Environment, LeducEnv, MatrixGameEnv, LEDUC_FEATURES};
use psro::eval::{proxy_regret, regret, similarity_report, sum_regret, LabeledPolicy, PayoffEstimator};
use psro::game::{all_profiles, EmpiricalGame, MixedStrategy, PureProfile};
use psro::harness;
use psro::oracle::{exact_best_response, train_best_response, OpponentMixture, OracleHParams, Preset};
use psro::policy::{Policy, QTable, ValuePolicy};
use psro::qmix::{combine_opponents, MixedQPolicy};
use psro::rng;
use psro::solvers::solve_nash;
use rand::Rng;

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const R: usize = 0;
const P: usize = 1;
const S: usize = 2;
const ALL: [usize; 3] = [R, P, S];

/// Floating-point equality up to `n` units in the last place.
fn ulps_eq(a: f64, b: f64, n: u64) -> bool {
    if a == b {
        return true;
    }
    if a.signum() != b.signum() {
        return false;
    }
    a.to_bits().abs_diff(b.to_bits()) <= n
}

/// Win 1, tie 1/2, lose 0, written out independently of the library.
fn rps_payoff(mine: usize, theirs: usize) -> f64 {
    match (mine, theirs) {
        (a, b) if a == b => 0.5,
        (R, S) | (P, R) | (S, P) => 1.0,
        _ => 0.0,
    }
}

fn stochastic(p: [f64; 3]) -> Arc<Policy> {
    Arc::new(Policy::stochastic(p.to_vec()).unwrap())
}

fn key() -> psro::env::ObsKey {
    MatrixGameEnv::observation().key
}

fn golden_opponents() -> [Arc<Policy>; 2] {
    [stochastic([0.0, 0.3, 0.7]), stochastic([0.4, 0.6, 0.0])]
}

const GOLDEN_Q: [[f64; 3]; 2] = [[0.7, 0.15, 0.65], [0.2, 0.7, 0.6]];

fn criterion_1() -> Verdict {
    let env = MatrixGameEnv::rps();
    let opps = golden_opponents();
    let mut brs = Vec::new();
    for (k, opp) in opps.iter().enumerate() {
        let (br, _) = exact_best_response(&env, 1, &OpponentMixture::fixed(1, vec![opp.clone(), opp.clone()])).unwrap();
        let q = br.q_values(&key());
        for a in ALL {
            ensure!(ulps_eq(q[a], GOLDEN_Q[k][a], 1), "(b) Q{k} = {q:?}, expected {:?}", GOLDEN_Q[k]);
        }
        brs.push(br);
    }
    let greedy: Vec<usize> = brs.iter().map(|b| b.greedy_action(&key(), &ALL)).collect();
    ensure!(greedy == vec![R, P], "(a) best responses {greedy:?}, expected R then P");

    let br_policies: Vec<Arc<Policy>> = brs.iter().cloned().map(|b| Arc::new(Policy::Value(b))).collect();
    let build = || {
        let mut g: EmpiricalGame<Arc<Policy>> = EmpiricalGame::new(2);
        opps.iter().for_each(|p| {
            g.add_policy(0, p.clone());
        });
        br_policies.iter().for_each(|p| {
            g.add_policy(1, p.clone());
        });
        g
    };
    let block = [[0.7, 0.15], [0.2, 0.7]];
    let mut exact = build();
    expand_enfg(&mut exact, &env, 1, 0, PayoffEval::Analytic).unwrap();
    let mut simulated = build();
    expand_enfg(&mut simulated, &env, 10_000, 11, PayoffEval::Simulate).unwrap();
    let mut worst_sim: f64 = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            let p = PureProfile::new(vec![k, l]);
            let a = exact.payoff(&p).unwrap()[1];
            ensure!(ulps_eq(a, block[k][l], 1), "(c) analytic cell ({k},{l}) = {a}");
            let s = simulated.payoff(&p).unwrap()[1];
            worst_sim = worst_sim.max((s - block[k][l]).abs());
        }
    }
    ensure!(worst_sim <= 0.02, "(c) simulated block off by {worst_sim}");

    let sol = solve_nash(&exact, 1e-8).unwrap();
    let y = sol.mixtures[1].weights().to_vec();
    ensure!(
        (y[0] - 0.52).abs() <= 0.01 && (y[1] - 0.48).abs() <= 0.01,
        "(d) player-2 mixture {y:?}"
    );

    let combined = combine_opponents(&br_policies, &sol.mixtures[1]).unwrap();
    let mixed = combined.q_values(&key());
    for a in ALL {
        let by_hand = y[0] * GOLDEN_Q[0][a] + y[1] * GOLDEN_Q[1][a];
        ensure!((mixed[a] - by_hand).abs() < 1e-12, "(e) mixed Q {mixed:?}");
    }
    let aggregate = combined.greedy_action(&key(), &ALL);
    ensure!(aggregate == S, "(e) combined opponent plays {aggregate}, expected S");
    let combined = Arc::new(Policy::Value(combined));
    let (next, _) = exact_best_response(&env, 0, &OpponentMixture::fixed(0, vec![combined.clone(), combined])).unwrap();
    let next = next.greedy_action(&key(), &ALL);
    ensure!(next == R, "(e) next best response {next}, expected R");
    Ok(format!(
        "BRs R,P; Q exact to 1 ulp; sim block err {worst_sim:.4}; sigma2 ({:.4}, {:.4}); combined greedy S; next BR R",
        y[0], y[1]
    ))
}

fn criterion_2() -> Verdict {
    let env = MatrixGameEnv::rps();
    let hp = OracleHParams::new(1e-5, 50_000, 50_000).with_discount(0.0);
    let mut worst: f64 = 0.0;
    for (k, opp) in golden_opponents().iter().enumerate() {
        let mut r = rng::stream(2024, &[k as u64]);
        let resp = train_best_response(&env, 1, &OpponentMixture::fixed(1, vec![opp.clone(), opp.clone()]), &hp, &mut r).unwrap();
        ensure!(resp.steps == 50_000, "spent {} steps", resp.steps);
        let q = resp.policy.q_values(&key());
        for a in ALL {
            worst = worst.max((q[a] - GOLDEN_Q[k][a]).abs());
        }
        let g = resp.policy.greedy_action(&key(), &ALL);
        ensure!(g == [R, P][k], "mixture {k}: greedy {g}");
    }
    ensure!(worst <= 0.02, "max |Q - analytic| = {worst}");
    Ok(format!("max |Q - analytic| = {worst:.4}; greedy R, P"))
}

/// Underlying-game SumRegret of a run's current solution, by brute force over pure actions.
fn brute_force_sum_regret(run: &Run) -> f64 {
    let m = run.env().as_matrix().unwrap();
    let sol = run.solution();
    let dist: Vec<[f64; 3]> = (0..2)
        .map(|i| {
            let mut d = [0.0; 3];
            for (k, w) in sol.mixtures[i].weights().iter().enumerate() {
                for (x, y) in d.iter_mut().zip(m.action_distribution(i, &run.game().strategies(i)[k])) {
                    *x += w * y;
                }
            }
            d
        })
        .collect();
    (0..2)
        .map(|i| {
            let value = |a: usize| ALL.iter().map(|&b| dist[1 - i][b] * rps_payoff(a, b)).sum::<f64>();
            let current: f64 = ALL.iter().map(|&a| dist[i][a] * value(a)).sum();
            ALL.iter().map(|&a| value(a)).fold(f64::NEG_INFINITY, f64::max) - current
        })
        .sum()
}

fn criterion_3() -> Verdict {
    let mut c = RunConfig::new(Algorithm::Psro, EnvSpec::Rps);
    c.oracle = OracleKind::Exact;
    c.payoff_eval = PayoffEval::Analytic;
    c.epochs = 4;
    let mut notes = Vec::new();
    let starts: [(&str, Option<Vec<Arc<Policy>>>); 2] = [
        ("uniform start", None),
        ("rock start", Some(vec![stochastic([1.0, 0.0, 0.0]), stochastic([1.0, 0.0, 0.0])])),
    ];
    for (name, init) in starts {
        let mut run = match init {
            None => Run::new(c.clone()).unwrap(),
            Some(p) => Run::with_initial_policies(c.clone(), Arc::new(MatrixGameEnv::rps()), p).unwrap(),
        };
        let mut reached = (brute_force_sum_regret(&run) < 1e-9).then_some(0);
        while reached.is_none() && run.step().unwrap().is_some() {
            if brute_force_sum_regret(&run) < 1e-9 {
                reached = Some(run.epoch());
            }
        }
        match reached {
            Some(e) => notes.push(format!("{name}: epoch {e}")),
            None => return Err(format!("{name}: SumRegret {} after 4 epochs", brute_force_sum_regret(&run))),
        }
    }
    Ok(format!("SumRegret < 1e-9 reached ({})", notes.join(", ")))
}

fn criterion_4() -> Verdict {
    let env = MatrixGameEnv::rps();
    let mut g: EmpiricalGame<Arc<Policy>> = EmpiricalGame::new(2);
    for a in [R, P] {
        let mut d = [0.0; 3];
        d[a] = 1.0;
        g.add_policy(0, stochastic(d));
        g.add_policy(1, stochastic(d));
    }
    expand_enfg(&mut g, &env, 30, 0, PayoffEval::Simulate).unwrap();
    g.add_policy(0, stochastic([0.0, 0.0, 1.0]));
    g.add_policy(1, stochastic([0.0, 0.0, 1.0]));
    let e = expand_enfg(&mut g, &env, 30, 0, PayoffEval::Simulate).unwrap();
    ensure!(e.cells == 5 && e.episodes == 150, "2x2 -> 3x3 simulated {} cells", e.cells);

    let mut r = rng::stream(4, &[]);
    let mut trials = 0;
    for t in 0..200 {
        let n = r.random_range(2..=4);
        let counts = vec![2; n];
        let payoffs = all_profiles(&counts)
            .map(|_| (0..n).map(|_| r.random::<f64>()).collect())
            .collect();
        let env = MatrixGameEnv::new(counts, payoffs).unwrap();
        let coin = |r: &mut rand_chacha::ChaCha8Rng| {
            let p: f64 = r.random();
            Arc::new(Policy::stochastic(vec![p, 1.0 - p]).unwrap())
        };
        let mut g: EmpiricalGame<Arc<Policy>> = EmpiricalGame::new(n);
        for i in 0..n {
            for _ in 0..r.random_range(1..=3) {
                g.add_policy(i, coin(&mut r));
            }
        }
        let mode = if t % 4 == 0 { PayoffEval::Simulate } else { PayoffEval::Analytic };
        expand_enfg(&mut g, &env, 2, t, mode).unwrap();
        let before: usize = g.sizes().iter().product();
        for i in 0..n {
            for _ in 0..r.random_range(0..=2) {
                g.add_policy(i, coin(&mut r));
            }
        }
        let after: usize = g.sizes().iter().product();
        let e = expand_enfg(&mut g, &env, 2, t, mode).unwrap();
        ensure!(
            e.cells == after - before,
            "sizes {:?}: {} cells, expected {}",
            g.sizes(),
            e.cells,
            after - before
        );
        ensure!(g.is_complete(), "game incomplete after expansion");
        trials += 1;
    }
    Ok(format!("2x2 -> 3x3 = 5 cells; product-difference rule held on {trials} random expansions (2-4 players)"))
}

fn criterion_5() -> Verdict {
    let seeds = 0..5u64;
    let epochs = 6;
    let budget = OracleHParams::preset("rps", Preset::Pure);
    let mut enfg = BTreeMap::new();
    let mut game = BTreeMap::new();
    for alg in Algorithm::ALL {
        let (mut e_sum, mut g_sum) = (0.0, 0.0);
        for seed in seeds.clone() {
            let mut c = RunConfig::new(alg, EnvSpec::Rps);
            c.epochs = epochs;
            c.seed = seed;
            c.pure = budget.clone();
            c.mix = budget.clone();
            let mut run = Run::new(c).unwrap();
            run.run().unwrap();
            let rec = run.record();
            ensure!(rec.epochs.len() == epochs + 1, "{alg} seed {seed}: {} records", rec.epochs.len());
            for r in &rec.epochs[1..] {
                ensure!(
                    r.epoch_training_steps == 2 * budget.total_timesteps,
                    "{alg} seed {seed} epoch {}: {} steps logged",
                    r.epoch,
                    r.epoch_training_steps
                );
            }
            e_sum += sum_regret(&rec.last().enfg_regret);
            g_sum += sum_regret(rec.last().game_regret.as_ref().unwrap());
        }
        enfg.insert(alg.label(), e_sum / 5.0);
        game.insert(alg.label(), g_sum / 5.0);
    }
    let mut notes = Vec::new();
    for alg in [Algorithm::MixedOracles, Algorithm::MixedOpponents] {
        let l = alg.label();
        ensure!(
            enfg[l] <= enfg["psro"] + 0.05,
            "{l} ENFG SumRegret {} vs psro {}",
            enfg[l],
            enfg["psro"]
        );
        ensure!(
            game[l] <= game["psro"] + 0.05,
            "{l} game SumRegret {} vs psro {}",
            game[l],
            game["psro"]
        );
        notes.push(format!("{l} enfg {:.4} game {:.4}", enfg[l], game[l]));
    }
    Ok(format!(
        "per-epoch steps = 2 x {}; 5-seed means: psro enfg {:.4} game {:.4}; {}",
        budget.total_timesteps,
        enfg["psro"],
        game["psro"],
        notes.join("; ")
    ))
}

fn random_table(r: &mut impl Rng, actions: usize, keys: &[String]) -> QTable {
    let mut t = QTable::new(actions, r.random_range(-1.0..1.0));
    for k in keys {
        if r.random_bool(0.6) {
            t.set(psro::env::ObsKey::new(k.clone()), (0..actions).map(|_| r.random_range(-1.0..1.0)).collect())
                .unwrap();
        }
    }
    t
}

fn criterion_6() -> Verdict {
    let mut r = rng::stream(6, &[]);
    let keys: Vec<String> = (0..6).map(|i| format!("k{i}")).collect();
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let actions = r.random_range(2..=4);
        let n = r.random_range(1..=5);
        let tables: Vec<Arc<QTable>> = (0..n).map(|_| Arc::new(random_table(&mut r, actions, &keys))).collect();
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let m = MixedQPolicy::new(tables.clone(), w.clone()).unwrap();
        for k in keys.iter().chain(std::iter::once(&"unseen".to_string())) {
            let key = psro::env::ObsKey::new(k.clone());
            let got = m.mixed_q(&key);
            for a in 0..actions {
                let want: f64 = tables.iter().zip(&w).map(|(t, wk)| wk * t.values(&key)[a]).sum();
                worst = worst.max((got[a] - want).abs());
            }
        }

        let hot = r.random_range(0..n);
        let one_hot: Vec<f64> = (0..n).map(|j| if j == hot { 1.0 } else { 0.0 }).collect();
        let m = MixedQPolicy::new(tables.clone(), one_hot.clone()).unwrap();
        for k in &keys {
            let key = psro::env::ObsKey::new(k.clone());
            ensure!(m.mixed_q(&key) == tables[hot].values(&key), "trial {trial}: weight-1 mixture differs");
        }
        let policies: Vec<Arc<Policy>> = tables
            .iter()
            .map(|t| Arc::new(Policy::Value(ValuePolicy::greedy((**t).clone()))))
            .collect();
        let combined = combine_opponents(&policies, &MixedStrategy::new(1, one_hot).unwrap()).unwrap();
        ensure!(
            Some(&combined) == policies[hot].as_value(),
            "trial {trial}: degenerate combine is not the identity"
        );
    }
    ensure!(worst <= 1e-12, "linearity error {worst:e}");
    Ok(format!("1000 trials; max linearity error {worst:.1e}; weight-1 cases exact"))
}

fn criterion_7() -> Verdict {
    let env = LeducEnv::new();
    let states = LeducEnv::all_information_states();
    let mut by_key = HashMap::new();
    let mut by_features = HashMap::new();
    for s in &states {
        let obs = s.encode();
        if let Some(prev) = by_key.insert(obs.key.clone(), s.clone()) {
            return Err(format!("key collision between {prev:?} and {s:?}"));
        }
        let bits: Vec<u8> = obs.features.iter().map(|&x| x as u8).collect();
        if let Some(prev) = by_features.insert(bits, s.clone()) {
            return Err(format!("feature collision between {prev:?} and {s:?}"));
        }
    }
    let random = Policy::Value(ValuePolicy::uniform_random(3));
    let actors: [&dyn psro::policy::Actor; 2] = [&random, &random];
    let mut observations = 0usize;
    for k in 0..10_000u64 {
        let mut r = rng::stream(7, &[k]);
        let ep = env
            .play(&actors, &EpisodeOptions::new(2).seated((k % 2) as usize).recording_all(), &mut r)
            .unwrap();
        ensure!(ep.returns[0] + ep.returns[1] == 0.0, "episode {k} returns {:?}", ep.returns);
        for t in ep.transitions.iter().flatten() {
            let f = &t.from.observation.features;
            ensure!(f.len() == LEDUC_FEATURES, "observation of length {}", f.len());
            ensure!(f.iter().all(|&x| x == 0.0 || x == 1.0), "non-binary observation {f:?}");
            ensure!(by_key.contains_key(&t.from.observation.key), "visited key missing from enumeration");
            observations += 1;
        }
    }
    Ok(format!(
        "10^4 zero-sum episodes ({observations} observations, all 30-bit binary); {} information states with distinct keys",
        states.len()
    ))
}

fn random_matrix(r: &mut impl Rng) -> MatrixGameEnv {
    let counts = vec![r.random_range(2..=4), r.random_range(2..=4)];
    let payoffs = all_profiles(&counts)
        .map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
        .collect();
    MatrixGameEnv::new(counts, payoffs).unwrap()
}

fn random_policy(r: &mut impl Rng, actions: usize, label: String) -> LabeledPolicy {
    let raw: Vec<f64> = (0..actions).map(|_| r.random::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    LabeledPolicy::new(label, Arc::new(Policy::stochastic(raw.iter().map(|x| x / total).collect()).unwrap()))
}

fn criterion_8() -> Verdict {
    let mut r = rng::stream(8, &[]);
    let mut min_proxy = f64::INFINITY;
    let mut negative_raw = 0;
    for trial in 0..1000 {
        let env = random_matrix(&mut r);
        let est = PayoffEstimator::new(&env, 30, trial);
        let pool = |r: &mut rand_chacha::ChaCha8Rng, i: usize, tag: &str, lo: usize, hi: usize| {
            let c = env.action_counts()[i];
            (0..r.random_range(lo..=hi))
                .map(|k| random_policy(r, c, format!("{tag}{i}_{k}")))
                .collect::<Vec<_>>()
        };
        let sigma: Vec<Vec<(LabeledPolicy, f64)>> = (0..2)
            .map(|i| {
                let ps = pool(&mut r, i, "s", 1, 3);
                let w = 1.0 / ps.len() as f64;
                ps.into_iter().map(|p| (p, w)).collect()
            })
            .collect();
        let psro_set: Vec<Vec<LabeledPolicy>> = (0..2).map(|i| pool(&mut r, i, "d", 1, 3)).collect();
        let eval_set: Vec<Vec<LabeledPolicy>> = (0..2).map(|i| pool(&mut r, i, "e", 0, 2)).collect();

        let proxy = proxy_regret(&est, &sigma, &psro_set, &eval_set).unwrap();
        let union: Vec<Vec<LabeledPolicy>> = (0..2).map(|i| [psro_set[i].clone(), eval_set[i].clone()].concat()).collect();
        let raw = regret(&est, &sigma, &union).unwrap();
        for i in 0..2 {
            ensure!(proxy[i] >= 0.0, "trial {trial}: proxy regret {}", proxy[i]);
            ensure!(proxy[i] == raw[i].max(0.0), "trial {trial}: proxy is not the clipped regret");
            min_proxy = min_proxy.min(proxy[i]);
            negative_raw += (raw[i] < 0.0) as usize;
        }

        let small = regret(&est, &sigma, &psro_set).unwrap();
        let extra: Vec<Vec<LabeledPolicy>> = (0..2).map(|i| pool(&mut r, i, "x", 1, 3)).collect();
        let larger: Vec<Vec<LabeledPolicy>> = (0..2).map(|i| [psro_set[i].clone(), extra[i].clone()].concat()).collect();
        let big = regret(&est, &sigma, &larger).unwrap();
        for i in 0..2 {
            ensure!(small[i] <= big[i], "trial {trial}: regret fell from {} to {}", small[i], big[i]);
        }
    }

    let env = LeducEnv::new();
    let keys: Vec<String> = LeducEnv::all_information_states()
        .iter()
        .map(|s| s.encode().key.as_str().to_string())
        .collect();
    let mut policies: Vec<LabeledPolicy> = (0..3)
        .map(|k| {
            LabeledPolicy::new(
                format!("q{k}"),
                Arc::new(Policy::Value(ValuePolicy::greedy(random_table(&mut r, 3, &keys)))),
            )
        })
        .collect();
    policies.push(LabeledPolicy::new("random", Arc::new(Policy::Value(ValuePolicy::uniform_random(3)))));
    let report = similarity_report(&policies, &env, 12, 30, 8).unwrap();
    let n = report.labels.len();
    for a in 0..n {
        ensure!(report.agreement[a][a] == 1.0, "diagonal entry {a} is {}", report.agreement[a][a]);
        for b in 0..n {
            ensure!(report.agreement[a][b] == report.agreement[b][a], "asymmetric at ({a},{b})");
        }
    }
    ensure!(report.unique_states < report.collected_states, "deduplication removed nothing");
    Ok(format!(
        "1000 proxy instances (min {min_proxy:.3}, {negative_raw} negative raw regrets clipped); 1000 monotonicity instances; similarity {n}x{n} symmetric, unit diagonal ({} -> {} states)",
        report.collected_states, report.unique_states
    ))
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("rps_mopp.toml");
    std::fs::write(
        &cfg_path,
        "[engine]\nalgorithm = \"mixed-opponents\"\nepochs = 4\nseed = 99\n[env]\nname = \"rps\"\n[solver]\nname = \"nash\"\n\
         [oracle.pure]\ntotal_timesteps = 2000\nexploration_timesteps = 1000\n",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_psro");
    let mut curves = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = dir.path().join(tag);
        let status = Command::new(bin)
            .args(["run", cfg_path.to_str().unwrap(), "--workers", workers, "--output", out.to_str().unwrap()])
            .output()
            .unwrap();
        ensure!(status.status.success(), "psro run failed: {}", String::from_utf8_lossy(&status.stderr));
        curves.push(std::fs::read(out.join("regret_curve.tsv")).unwrap());
    }
    ensure!(curves[0] == curves[1], "rerun changed the regret curve");
    ensure!(curves[0] == curves[2], "worker count changed the regret curve");

    let leduc = |workers: usize, eval: Option<&std::path::Path>| {
        let mut cfg = ExperimentConfig::parse(
            "[engine]\nalgorithm = \"psro\"\nepochs = 2\nepisodes_per_cell = 10\nseed = 3\n[env]\nname = \"leduc\"\n\
             [oracle.pure]\ntotal_timesteps = 1000\nexploration_timesteps = 300\nlearning_rate = 0.1\n\
             [oracle.mix]\ntotal_timesteps = 1000\nexploration_timesteps = 300\nlearning_rate = 0.1\n\
             [evaluation]\nepisodes = 20\neval_set_size = 3\n",
        )
        .unwrap();
        cfg.run.workers = workers;
        cfg.evaluation.eval_set = eval.map(|p| p.to_path_buf());
        cfg
    };
    let held_out = dir.path().join("leduc_eval");
    harness::run_experiment(&leduc(1, None), &held_out, |_| {}).unwrap();
    let mut leduc_curves = Vec::new();
    for (tag, workers) in [("l1", 1), ("l3", 3)] {
        let out = dir.path().join(tag);
        harness::run_experiment(&leduc(workers, Some(&held_out)), &out, |_| {}).unwrap();
        leduc_curves.push(std::fs::read(out.join("regret_curve.tsv")).unwrap());
    }
    ensure!(leduc_curves[0] == leduc_curves[1], "Leduc proxy-regret curve depends on worker count");
    Ok("rps CLI runs (workers 1, 1, 4) and Leduc proxy-regret runs (workers 1, 3) byte-identical".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "golden RPS pipeline", criterion_1),
        (2, "tabular oracle Q-values", criterion_2),
        (3, "double-oracle convergence", criterion_3),
        (4, "ExpandENFG cell counts", criterion_4),
        (5, "simulation budget", criterion_5),
        (6, "Q-mixing linearity", criterion_6),
        (7, "Leduc integrity", criterion_7),
        (8, "regret properties", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || f == &n.to_string()) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
