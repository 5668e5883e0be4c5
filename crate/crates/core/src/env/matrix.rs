use serde::{Deserialize, Serialize};

use super::{check_action, DecisionPoint, EpisodeOptions, EpisodeResult, Environment, ObsKey, Observation, Transition};
use crate::error::{Error, Result};
use crate::game::all_profiles;
use crate::policy::{Actor, Policy};
use crate::rng::SimRng;

const MATRIX_KEY: &str = "m";

/// A one-shot n-player game given by a payoff tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameEnv {
    name: String,
    action_counts: Vec<usize>,
    /// Row-major over joint actions, `n_players` payoffs per joint action.
    payoffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    action_counts: Vec<usize>,
    /// One payoff vector per joint action, joint actions in lexicographic order.
    payoffs: Vec<Vec<f64>>,
}

impl MatrixGameEnv {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let n = action_counts.len();
        if n == 0 || action_counts.contains(&0) {
            return Err(Error::InvalidArgument("matrix game needs players and actions".into()));
        }
        let cells: usize = action_counts.iter().product();
        if payoffs.len() != cells || payoffs.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "payoff tensor must have {cells} entries of length {n}"
            )));
        }
        Ok(MatrixGameEnv {
            name: "matrix".into(),
            action_counts,
            payoffs: payoffs.into_iter().flatten().collect(),
        })
    }

    /// Rock-paper-scissors with win 1, tie 0.5, lose 0. Actions: R=0, P=1, S=2.
    pub fn rps() -> Self {
        let outcome = |a: usize, b: usize| -> f64 {
            if a == b {
                0.5
            } else if a == (b + 1) % 3 {
                1.0
            } else {
                0.0
            }
        };
        let payoffs = all_profiles(&[3, 3])
            .map(|p| {
                let (a, b) = (p.indices()[0], p.indices()[1]);
                vec![outcome(a, b), outcome(b, a)]
            })
            .collect();
        let mut env = Self::new(vec![3, 3], payoffs).expect("rps tensor");
        env.name = "rps".into();
        env
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MatrixFile = serde_json::from_str(text)
            .map_err(|e| Error::config("env.name", format!("bad matrix file: {e}")))?;
        Self::new(f.action_counts, f.payoffs)
    }

    pub fn to_json(&self) -> String {
        let n = self.n_players();
        let f = MatrixFile {
            action_counts: self.action_counts.clone(),
            payoffs: self.payoffs.chunks(n).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string_pretty(&f).expect("serializable")
    }

    pub(crate) fn set_name(&mut self, name: String) {
        self.name = name;
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn observation() -> Observation {
        Observation {
            key: ObsKey::new(MATRIX_KEY),
            features: vec![1.0],
        }
    }

    fn offset(&self, joint: &[usize]) -> usize {
        let mut flat = 0;
        for (j, &a) in joint.iter().enumerate() {
            flat = flat * self.action_counts[j] + a;
        }
        flat * self.n_players()
    }

    pub fn payoff(&self, joint: &[usize]) -> &[f64] {
        let o = self.offset(joint);
        &self.payoffs[o..o + self.n_players()]
    }

    /// Expected payoff vector when each player plays an independent action distribution.
    pub fn expected_payoffs(&self, dists: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n_players();
        let mut out = vec![0.0; n];
        for p in all_profiles(&self.action_counts) {
            let prob: f64 = p.indices().iter().enumerate().map(|(j, &a)| dists[j][a]).product();
            if prob == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.payoff(p.indices())) {
                *o += prob * v;
            }
        }
        out
    }

    /// Expected payoff to `learner` of each of its actions; the learner's own
    /// entry in `dists` is ignored.
    pub fn action_values(&self, learner: usize, dists: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.action_counts[learner]];
        for p in all_profiles(&self.action_counts) {
            let prob: f64 = p
                .indices()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != learner)
                .map(|(j, &a)| dists[j][a])
                .product();
            if prob == 0.0 {
                continue;
            }
            out[p.indices()[learner]] += prob * self.payoff(p.indices())[learner];
        }
        out
    }

    /// Action distribution a policy induces for `player` at the single decision point.
    pub fn action_distribution(&self, player: usize, policy: &Policy) -> Vec<f64> {
        let legal: Vec<usize> = (0..self.action_counts[player]).collect();
        policy.action_probabilities(&Self::observation(), &legal)
    }
}

impl Environment for MatrixGameEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_players(&self) -> usize {
        self.action_counts.len()
    }

    fn action_count(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    fn play(
        &self,
        actors: &[&dyn Actor],
        options: &EpisodeOptions,
        rng: &mut SimRng,
    ) -> Result<EpisodeResult> {
        let n = self.n_players();
        if actors.len() != n {
            return Err(Error::InvalidArgument(format!("{} actors for {n} players", actors.len())));
        }
        let obs = Self::observation();
        let mut joint = Vec::with_capacity(n);
        let mut legals = Vec::with_capacity(n);
        for (j, actor) in actors.iter().enumerate() {
            let legal: Vec<usize> = (0..self.action_counts[j]).collect();
            let a = actor.act(&obs, &legal, rng);
            check_action(j, a, &legal)?;
            joint.push(a);
            legals.push(legal);
        }
        let returns = self.payoff(&joint).to_vec();
        let transitions = (0..n)
            .map(|j| {
                if options.record.get(j).copied().unwrap_or(false) {
                    vec![Transition {
                        from: DecisionPoint {
                            observation: obs.clone(),
                            legal: legals[j].clone(),
                        },
                        action: joint[j],
                        reward: returns[j],
                        next: None,
                    }]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(EpisodeResult {
            returns,
            transitions,
            first_player: options.first_player,
        })
    }

    fn default_discount(&self) -> f64 {
        0.0
    }

    fn as_matrix(&self) -> Option<&MatrixGameEnv> {
        Some(self)
    }
}
