//! Two-player Leduc hold'em.
//!
//! Six cards (ranks J, Q, K in two suits; card `c` has rank `c / 2`). Each player
//! antes 1 and receives one private card. Two betting rounds with raise sizes 2 and
//! 4 and at most two raises per round; the public card is revealed before the
//! second round. At showdown a pair with the public card wins, otherwise the higher
//! rank wins, and equal ranks split the pot.

use rand::seq::index::sample;

use super::{check_action, DecisionPoint, EpisodeOptions, EpisodeResult, Environment, ObsKey, Observation, Transition};
use crate::error::{Error, Result};
use crate::policy::Actor;
use crate::rng::SimRng;

pub const LEDUC_FEATURES: usize = 30;
const DECK: usize = 6;
const ANTE: f64 = 1.0;
const RAISE_AMOUNTS: [f64; 2] = [2.0, 4.0];
const MAX_RAISES: usize = 2;
const SLOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeducAction {
    Fold = 0,
    Call = 1,
    Raise = 2,
}

impl LeducAction {
    pub fn from_index(a: usize) -> Option<Self> {
        match a {
            0 => Some(LeducAction::Fold),
            1 => Some(LeducAction::Call),
            2 => Some(LeducAction::Raise),
            _ => None,
        }
    }

    fn bits(self) -> [u8; 2] {
        match self {
            LeducAction::Call => [0, 1],
            LeducAction::Raise => [1, 0],
            // A fold ends the episode and is never encoded.
            LeducAction::Fold => [1, 1],
        }
    }
}

/// What the acting player knows at a decision point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeducInfoState {
    /// 0 for the player who acts first in each round.
    pub seat: usize,
    pub private: usize,
    pub public: Option<usize>,
    pub rounds: [Vec<LeducAction>; 2],
}

impl LeducInfoState {
    /// Seat one-hot (2), private card (6), public card (6), round-one and round-two
    /// action slots (4 x 2 bits each; call = 01, raise = 10, empty = 00).
    pub fn encode(&self) -> Observation {
        let mut bits = [0u8; LEDUC_FEATURES];
        bits[self.seat] = 1;
        bits[2 + self.private] = 1;
        if let Some(p) = self.public {
            bits[8 + p] = 1;
        }
        for (r, actions) in self.rounds.iter().enumerate() {
            debug_assert!(actions.len() <= SLOTS);
            for (s, a) in actions.iter().enumerate() {
                let at = 14 + r * 2 * SLOTS + 2 * s;
                bits[at..at + 2].copy_from_slice(&a.bits());
            }
        }
        let key: String = bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        Observation {
            key: ObsKey::new(key),
            features: bits.iter().map(|&b| b as f64).collect(),
        }
    }
}

enum Step {
    Continue,
    Fold { folder: usize },
    Showdown,
}

/// Betting state machine, indexed by seat.
#[derive(Debug, Clone)]
struct Betting {
    round: usize,
    history: [Vec<LeducAction>; 2],
    contrib: [f64; 2],
    raises: usize,
    to_act: usize,
}

impl Betting {
    fn new() -> Self {
        Betting {
            round: 0,
            history: [Vec::new(), Vec::new()],
            contrib: [ANTE, ANTE],
            raises: 0,
            to_act: 0,
        }
    }

    fn facing_bet(&self) -> bool {
        self.contrib[self.to_act] < self.contrib[1 - self.to_act]
    }

    fn legal(&self) -> Vec<usize> {
        let mut legal = Vec::with_capacity(3);
        if self.facing_bet() {
            legal.push(LeducAction::Fold as usize);
        }
        legal.push(LeducAction::Call as usize);
        if self.raises < MAX_RAISES {
            legal.push(LeducAction::Raise as usize);
        }
        legal
    }

    fn apply(&mut self, action: LeducAction) -> Step {
        let seat = self.to_act;
        let other = 1 - seat;
        let mut round_over = false;
        match action {
            LeducAction::Fold => return Step::Fold { folder: seat },
            LeducAction::Call => {
                if self.facing_bet() {
                    self.contrib[seat] = self.contrib[other];
                    round_over = true;
                } else if !self.history[self.round].is_empty() {
                    round_over = true;
                }
            }
            LeducAction::Raise => {
                self.contrib[seat] = self.contrib[other] + RAISE_AMOUNTS[self.round];
                self.raises += 1;
            }
        }
        self.history[self.round].push(action);
        if !round_over {
            self.to_act = other;
            Step::Continue
        } else if self.round == 0 {
            self.round = 1;
            self.raises = 0;
            self.to_act = 0;
            Step::Continue
        } else {
            Step::Showdown
        }
    }

    fn info(&self, private: [usize; 2], public: usize) -> LeducInfoState {
        LeducInfoState {
            seat: self.to_act,
            private: private[self.to_act],
            public: (self.round == 1).then_some(public),
            rounds: self.history.clone(),
        }
    }
}

/// Showdown result for seat 0: +1 win, -1 loss, 0 split.
fn showdown(private: [usize; 2], public: usize) -> i32 {
    let rank = |c: usize| c / 2;
    let strength = |c: usize| {
        if rank(c) == rank(public) {
            10 + rank(c) as i32
        } else {
            rank(c) as i32
        }
    };
    (strength(private[0]) - strength(private[1])).signum()
}

#[derive(Debug, Clone, Default)]
pub struct LeducEnv;

impl LeducEnv {
    pub fn new() -> Self {
        LeducEnv
    }

    pub fn encode(state: &LeducInfoState) -> Observation {
        state.encode()
    }

    /// Every information state at which some player must act, over all deals.
    pub fn all_information_states() -> Vec<LeducInfoState> {
        fn walk(b: &Betting, private: [usize; 2], public: usize, out: &mut Vec<LeducInfoState>) {
            out.push(b.info(private, public));
            for a in b.legal() {
                let mut next = b.clone();
                if let Step::Continue = next.apply(LeducAction::from_index(a).expect("legal")) {
                    walk(&next, private, public, out);
                }
            }
        }
        let mut out = Vec::new();
        for c0 in 0..DECK {
            for c1 in (0..DECK).filter(|&c| c != c0) {
                for p in (0..DECK).filter(|&c| c != c0 && c != c1) {
                    walk(&Betting::new(), [c0, c1], p, &mut out);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

impl Environment for LeducEnv {
    fn name(&self) -> &str {
        "leduc"
    }

    fn n_players(&self) -> usize {
        2
    }

    fn action_count(&self, _player: usize) -> usize {
        3
    }

    fn play(
        &self,
        actors: &[&dyn Actor],
        options: &EpisodeOptions,
        rng: &mut SimRng,
    ) -> Result<EpisodeResult> {
        if actors.len() != 2 {
            return Err(Error::InvalidArgument(format!("{} actors for 2 players", actors.len())));
        }
        let first = options.first_player % 2;
        let player_at = |seat: usize| (first + seat) % 2;
        let cards = sample(rng, DECK, 3);
        let private = [cards.index(0), cards.index(1)];
        let public = cards.index(2);

        let mut betting = Betting::new();
        let mut decisions: [Vec<(DecisionPoint, usize)>; 2] = [Vec::new(), Vec::new()];
        let seat_result = loop {
            let seat = betting.to_act;
            let player = player_at(seat);
            let obs = betting.info(private, public).encode();
            let legal = betting.legal();
            let a = actors[player].act(&obs, &legal, rng);
            check_action(player, a, &legal)?;
            if options.record[player] {
                decisions[player].push((DecisionPoint { observation: obs, legal }, a));
            }
            match betting.apply(LeducAction::from_index(a).expect("checked legal")) {
                Step::Continue => {}
                Step::Fold { folder } => break if folder == 0 { -1 } else { 1 },
                Step::Showdown => break showdown(private, public),
            }
        };
        // Loser pays their whole contribution; under a call both contributions match.
        let mut by_seat = [0.0; 2];
        if seat_result > 0 {
            by_seat = [betting.contrib[1], -betting.contrib[1]];
        } else if seat_result < 0 {
            by_seat = [-betting.contrib[0], betting.contrib[0]];
        }
        let mut returns = vec![0.0; 2];
        for seat in 0..2 {
            returns[player_at(seat)] = by_seat[seat];
        }

        let transitions = decisions
            .into_iter()
            .enumerate()
            .map(|(player, ds)| {
                let last = ds.len().saturating_sub(1);
                let nexts: Vec<Option<DecisionPoint>> = ds
                    .iter()
                    .skip(1)
                    .map(|(d, _)| Some(d.clone()))
                    .chain(std::iter::once(None))
                    .collect();
                ds.into_iter()
                    .zip(nexts)
                    .enumerate()
                    .map(|(k, ((from, action), next))| Transition {
                        from,
                        action,
                        reward: if k == last { returns[player] } else { 0.0 },
                        next,
                    })
                    .collect()
            })
            .collect();
        Ok(EpisodeResult {
            returns,
            transitions,
            first_player: first,
        })
    }

    fn default_discount(&self) -> f64 {
        1.0
    }
}
