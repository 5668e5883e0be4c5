//! Normal-form and empirical-game data structures.
//!
//! An [`EmpiricalGame`] holds per-player strategy sets of opaque policy handles and
//! a partially filled joint payoff table. Strategy sets only grow; ids are dense
//! and never reused.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TEXT_HEADER: &str = "empirical-game v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StrategyId {
    pub player: usize,
    pub index: usize,
}

/// One strategy index per player; entry `j` belongs to player `j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PureProfile(Vec<usize>);

impl PureProfile {
    pub fn new(indices: Vec<usize>) -> Self {
        PureProfile(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn strategy(&self, player: usize) -> StrategyId {
        StrategyId {
            player,
            index: self.0[player],
        }
    }
}

impl fmt::Display for PureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, i) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Iterates every joint profile over sets of the given sizes in lexicographic order.
pub fn all_profiles(sizes: &[usize]) -> impl Iterator<Item = PureProfile> + '_ {
    let total: usize = if sizes.is_empty() {
        0
    } else {
        sizes.iter().product()
    };
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; sizes.len()];
        for j in (0..sizes.len()).rev() {
            idx[j] = flat % sizes[j];
            flat /= sizes[j];
        }
        PureProfile(idx)
    })
}

/// A probability distribution over one player's strategy set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub player: usize,
    weights: Vec<f64>,
}

impl MixedStrategy {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(player: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("mixed strategy has no weights".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mixed strategy weights must be finite and non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "mixed strategy weights sum to {sum}, expected 1"
            )));
        }
        Ok(MixedStrategy { player, weights })
    }

    /// Normalizes non-negative weights; used for solver output cleanup.
    pub fn normalized(player: usize, mut weights: Vec<f64>) -> Result<Self> {
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidArgument("weights have zero mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(MixedStrategy { player, weights })
    }

    pub fn uniform(player: usize, size: usize) -> Self {
        assert!(size > 0, "uniform mixture over an empty set");
        MixedStrategy {
            player,
            weights: vec![1.0 / size as f64; size],
        }
    }

    pub fn pure(player: usize, size: usize, index: usize) -> Self {
        assert!(index < size);
        let mut weights = vec![0.0; size];
        weights[index] = 1.0;
        MixedStrategy { player, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with strictly positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&k| self.weights[k] > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub payoffs: Vec<f64>,
    pub count: u64,
}

/// Mean-return cells keyed by joint profile, with the episode count behind each mean.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PayoffTable {
    cells: BTreeMap<PureProfile, Cell>,
}

impl PayoffTable {
    /// Adds `count` episodes with mean `payoffs`, merging with any existing mean.
    pub fn record(&mut self, profile: PureProfile, payoffs: Vec<f64>, count: u64) {
        assert!(count >= 1, "a payoff cell needs at least one sample");
        match self.cells.get_mut(&profile) {
            Some(cell) => {
                let total = cell.count + count;
                let (old, new) = (cell.count as f64, count as f64);
                for (m, p) in cell.payoffs.iter_mut().zip(&payoffs) {
                    *m = (*m * old + p * new) / total as f64;
                }
                cell.count = total;
            }
            None => {
                self.cells.insert(profile, Cell { payoffs, count });
            }
        }
    }

    pub fn get(&self, profile: &PureProfile) -> Option<&Cell> {
        self.cells.get(profile)
    }

    pub fn contains(&self, profile: &PureProfile) -> bool {
        self.cells.contains_key(profile)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PureProfile, &Cell)> {
        self.cells.iter()
    }
}

/// An empirical game over strategy handles of type `H`.
#[derive(Debug, Clone)]
pub struct EmpiricalGame<H> {
    strategy_sets: Vec<Vec<H>>,
    payoffs: PayoffTable,
    pub epoch: usize,
}

impl<H> EmpiricalGame<H> {
    pub fn new(n_players: usize) -> Self {
        assert!(n_players >= 1);
        EmpiricalGame {
            strategy_sets: (0..n_players).map(|_| Vec::new()).collect(),
            payoffs: PayoffTable::default(),
            epoch: 0,
        }
    }

    pub fn n_players(&self) -> usize {
        self.strategy_sets.len()
    }

    pub fn add_policy(&mut self, player: usize, handle: H) -> StrategyId {
        let set = &mut self.strategy_sets[player];
        set.push(handle);
        StrategyId {
            player,
            index: set.len() - 1,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.strategy_sets.iter().map(Vec::len).collect()
    }

    pub fn strategies(&self, player: usize) -> &[H] {
        &self.strategy_sets[player]
    }

    pub fn handle(&self, id: StrategyId) -> Option<&H> {
        self.strategy_sets.get(id.player)?.get(id.index)
    }

    pub fn payoff_table(&self) -> &PayoffTable {
        &self.payoffs
    }

    /// Joint profiles over the current sets that have no payoff cell, lexicographically.
    pub fn missing_profiles(&self) -> Vec<PureProfile> {
        all_profiles(&self.sizes())
            .filter(|p| !self.payoffs.contains(p))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        all_profiles(&self.sizes()).all(|p| self.payoffs.contains(&p))
    }

    pub fn record(&mut self, profile: PureProfile, payoffs: Vec<f64>, count: u64) -> Result<()> {
        self.check_bounds(&profile)?;
        if payoffs.len() != self.n_players() {
            return Err(Error::InvalidArgument(format!(
                "payoff vector has length {}, expected {}",
                payoffs.len(),
                self.n_players()
            )));
        }
        self.payoffs.record(profile, payoffs, count);
        Ok(())
    }

    fn check_bounds(&self, profile: &PureProfile) -> Result<()> {
        if profile.len() != self.n_players() {
            return Err(Error::InvalidArgument(format!(
                "profile {profile} has {} entries for {} players",
                profile.len(),
                self.n_players()
            )));
        }
        for (player, &index) in profile.indices().iter().enumerate() {
            let size = self.strategy_sets[player].len();
            if index >= size {
                return Err(Error::OutOfBounds {
                    player,
                    index,
                    size,
                });
            }
        }
        Ok(())
    }

    pub fn payoff(&self, profile: &PureProfile) -> Result<&[f64]> {
        self.check_bounds(profile)?;
        self.payoffs
            .get(profile)
            .map(|c| c.payoffs.as_slice())
            .ok_or_else(|| Error::MissingEntry(profile.clone()))
    }

    fn check_mixtures(&self, mixtures: &[MixedStrategy]) -> Result<()> {
        if mixtures.len() != self.n_players() {
            return Err(Error::InvalidArgument(format!(
                "{} mixtures for {} players",
                mixtures.len(),
                self.n_players()
            )));
        }
        for (j, m) in mixtures.iter().enumerate() {
            if m.len() != self.strategy_sets[j].len() {
                return Err(Error::InvalidArgument(format!(
                    "mixture for player {j} has {} weights, set size is {}",
                    m.len(),
                    self.strategy_sets[j].len()
                )));
            }
        }
        Ok(())
    }

    /// Expected payoff vector under independent mixtures. Zero-probability profiles
    /// are skipped, so their cells may be missing.
    pub fn expected_payoff(&self, mixtures: &[MixedStrategy]) -> Result<Vec<f64>> {
        self.check_mixtures(mixtures)?;
        let mut value = vec![0.0; self.n_players()];
        for profile in all_profiles(&self.sizes()) {
            let prob: f64 = profile
                .indices()
                .iter()
                .enumerate()
                .map(|(j, &k)| mixtures[j].weights()[k])
                .product();
            if prob == 0.0 {
                continue;
            }
            let cell = self.payoff(&profile)?;
            for (v, p) in value.iter_mut().zip(cell) {
                *v += prob * p;
            }
        }
        Ok(value)
    }

    /// Payoff to `player` of each of its pure strategies against the others' mixtures.
    /// The entry for `player` in `mixtures` is ignored.
    pub fn deviation_payoffs(&self, player: usize, mixtures: &[MixedStrategy]) -> Result<Vec<f64>> {
        self.check_mixtures(mixtures)?;
        let mut out = vec![0.0; self.strategy_sets[player].len()];
        for profile in all_profiles(&self.sizes()) {
            let prob: f64 = profile
                .indices()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != player)
                .map(|(j, &k)| mixtures[j].weights()[k])
                .product();
            if prob == 0.0 {
                continue;
            }
            out[profile.indices()[player]] += prob * self.payoff(&profile)?[player];
        }
        Ok(out)
    }

    /// Per-player regret of `mixtures` with all pure strategies of the game as deviations.
    pub fn regrets(&self, mixtures: &[MixedStrategy]) -> Result<Vec<f64>> {
        (0..self.n_players())
            .map(|i| {
                let dev = self.deviation_payoffs(i, mixtures)?;
                let value: f64 = dev
                    .iter()
                    .zip(mixtures[i].weights())
                    .map(|(u, w)| u * w)
                    .sum();
                let best = dev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(best - value)
            })
            .collect()
    }

    pub fn map_handles<G>(self, mut f: impl FnMut(StrategyId, H) -> G) -> EmpiricalGame<G> {
        EmpiricalGame {
            strategy_sets: self
                .strategy_sets
                .into_iter()
                .enumerate()
                .map(|(player, set)| {
                    set.into_iter()
                        .enumerate()
                        .map(|(index, h)| f(StrategyId { player, index }, h))
                        .collect()
                })
                .collect(),
            payoffs: self.payoffs,
            epoch: self.epoch,
        }
    }

    /// Human-readable rendering: strategy counts, then one line per cell.
    /// Payoffs use 17 significant digits, which round-trips every `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(TEXT_HEADER);
        out.push('\n');
        out.push_str(&format!("players {}\n", self.n_players()));
        out.push_str(&format!("epoch {}\n", self.epoch));
        let sizes: Vec<String> = self.sizes().iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("strategies {}\n", sizes.join(" ")));
        for (profile, cell) in self.payoffs.iter() {
            let idx: Vec<String> = profile.indices().iter().map(|i| i.to_string()).collect();
            let pay: Vec<String> = cell.payoffs.iter().map(|p| format!("{p:.16e}")).collect();
            out.push_str(&format!(
                "cell {} ; {} ; {}\n",
                idx.join(" "),
                pay.join(" "),
                cell.count
            ));
        }
        out
    }
}

impl EmpiricalGame<()> {
    /// Parses [`EmpiricalGame::to_text`] output. Handles are unit placeholders;
    /// attach real ones with [`EmpiricalGame::map_handles`].
    pub fn from_text(text: &str) -> Result<Self> {
        fn bad(line: usize, reason: impl Into<String>) -> Error {
            Error::Parse {
                line,
                reason: reason.into(),
            }
        }
        fn nums<T: std::str::FromStr>(line: usize, s: &str) -> Result<Vec<T>> {
            s.split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(line, format!("bad number `{t}`"))))
                .collect()
        }

        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, TEXT_HEADER)) => {}
            _ => return Err(bad(1, format!("expected header `{TEXT_HEADER}`"))),
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (ln, l) = lines.next().ok_or_else(|| bad(0, format!("missing `{name}`")))?;
            let rest = l
                .strip_prefix(name)
                .ok_or_else(|| bad(ln, format!("expected `{name}`")))?;
            Ok((ln, rest.trim().to_string()))
        };
        let (ln, players) = field("players")?;
        let n: usize = players.parse().map_err(|_| bad(ln, "bad player count"))?;
        let (ln, epoch) = field("epoch")?;
        let epoch: usize = epoch.parse().map_err(|_| bad(ln, "bad epoch"))?;
        let (ln, sizes) = field("strategies")?;
        let sizes: Vec<usize> = nums(ln, &sizes)?;
        if n == 0 || sizes.len() != n {
            return Err(bad(ln, "strategy counts do not match player count"));
        }
        let mut game = EmpiricalGame::new(n);
        game.epoch = epoch;
        for (player, &size) in sizes.iter().enumerate() {
            for _ in 0..size {
                game.add_policy(player, ());
            }
        }
        for (ln, l) in lines {
            if l.is_empty() {
                continue;
            }
            let body = l.strip_prefix("cell").ok_or_else(|| bad(ln, "expected `cell`"))?;
            let parts: Vec<&str> = body.split(';').collect();
            if parts.len() != 3 {
                return Err(bad(ln, "cell needs `indices ; payoffs ; count`"));
            }
            let idx: Vec<usize> = nums(ln, parts[0])?;
            let pay: Vec<f64> = nums(ln, parts[1])?;
            let count: u64 = parts[2].trim().parse().map_err(|_| bad(ln, "bad count"))?;
            if count == 0 {
                return Err(bad(ln, "sample count must be at least 1"));
            }
            game.record(PureProfile::new(idx), pay, count)
                .map_err(|e| bad(ln, e.to_string()))?;
        }
        Ok(game)
    }
}
