//! Meta-strategy solvers: maps from a complete empirical game to one mixture per player.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{EmpiricalGame, MixedStrategy, PureProfile};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
const RIDGE: f64 = 1e-12;
const NEGATIVITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionProfile {
    pub mixtures: Vec<MixedStrategy>,
    pub solver_name: String,
    /// Largest pure-deviation gain in the empirical game.
    pub residual: f64,
}

impl SolutionProfile {
    fn measured<H>(game: &EmpiricalGame<H>, mixtures: Vec<MixedStrategy>, name: &str) -> Result<Self> {
        let residual = max_regret(game, &mixtures)?;
        Ok(SolutionProfile {
            mixtures,
            solver_name: name.to_string(),
            residual,
        })
    }
}

fn max_regret<H>(game: &EmpiricalGame<H>, mixtures: &[MixedStrategy]) -> Result<f64> {
    Ok(game.regrets(mixtures)?.into_iter().fold(0.0, f64::max))
}

fn require_complete<H>(game: &EmpiricalGame<H>) -> Result<()> {
    let missing = game.missing_profiles().len();
    if missing > 0 {
        return Err(Error::IncompleteGame { missing });
    }
    if game.sizes().contains(&0) {
        return Err(Error::InvalidArgument("a player has no strategies".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum SolverKind {
    Nash { tolerance: f64 },
    Replicator { steps: u64, step_size: f64 },
    Uniform,
    Last,
}

impl SolverKind {
    pub const DEFAULT_REPLICATOR_STEPS: u64 = 100_000;
    pub const DEFAULT_STEP_SIZE: f64 = 0.1;

    pub fn nash() -> Self {
        SolverKind::Nash {
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn replicator() -> Self {
        SolverKind::Replicator {
            steps: Self::DEFAULT_REPLICATOR_STEPS,
            step_size: Self::DEFAULT_STEP_SIZE,
        }
    }

    pub fn solve<H>(&self, game: &EmpiricalGame<H>) -> Result<SolutionProfile> {
        match *self {
            SolverKind::Nash { tolerance } => solve_nash(game, tolerance),
            SolverKind::Replicator { steps, step_size } => solve_replicator(game, steps, step_size),
            SolverKind::Uniform => Ok(solve_uniform(game)),
            SolverKind::Last => Ok(solve_last(game)),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::Nash { .. } => "nash",
            SolverKind::Replicator { .. } => "replicator",
            SolverKind::Uniform => "uniform",
            SolverKind::Last => "last",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nash" => Ok(Self::nash()),
            "replicator" => Ok(Self::replicator()),
            "uniform" => Ok(SolverKind::Uniform),
            "last" => Ok(SolverKind::Last),
            other => Err(Error::config(
                "solver.name",
                format!("unknown solver `{other}` (expected nash, replicator, uniform or last)"),
            )),
        }
    }
}

/// Nash equilibrium of the empirical game.
///
/// Two-player games are solved exactly by support enumeration. Support pairs are
/// visited by total size, then size imbalance, then player-1 size, then subsets in
/// lexicographic order; the first pair passing the deviation check wins. Games with
/// more players are approximated with the replicator solver and the residual reported.
pub fn solve_nash<H>(game: &EmpiricalGame<H>, tolerance: f64) -> Result<SolutionProfile> {
    require_complete(game)?;
    if game.n_players() != 2 {
        let mut sol = solve_replicator(
            game,
            SolverKind::DEFAULT_REPLICATOR_STEPS,
            SolverKind::DEFAULT_STEP_SIZE,
        )?;
        sol.solver_name = "nash".into();
        return Ok(sol);
    }
    let sizes = game.sizes();
    let (m, n) = (sizes[0], sizes[1]);
    let a = DMatrix::from_fn(m, n, |i, j| game.payoff(&PureProfile::new(vec![i, j])).expect("complete")[0]);
    let b = DMatrix::from_fn(m, n, |i, j| game.payoff(&PureProfile::new(vec![i, j])).expect("complete")[1]);
    let bt = b.transpose();

    let mut size_pairs: Vec<(usize, usize)> = (1..=m).cartesian_product(1..=n).collect();
    size_pairs.sort_by_key(|&(k1, k2)| (k1 + k2, k1.abs_diff(k2), k1));

    let mut best_residual = f64::INFINITY;
    for (k1, k2) in size_pairs {
        for s1 in (0..m).combinations(k1) {
            for s2 in (0..n).combinations(k2) {
                // Player 2's mix makes player 1 indifferent across s1, and vice versa.
                let Some(y) = indifferent_mix(&a, &s1, &s2, n) else { continue };
                let Some(x) = indifferent_mix(&bt, &s2, &s1, m) else { continue };
                let mixtures = vec![MixedStrategy::normalized(0, x)?, MixedStrategy::normalized(1, y)?];
                let residual = max_regret(game, &mixtures)?;
                if residual <= tolerance {
                    return Ok(SolutionProfile {
                        mixtures,
                        solver_name: "nash".into(),
                        residual,
                    });
                }
                best_residual = best_residual.min(residual);
            }
        }
    }
    Err(Error::NoEquilibriumFound {
        tolerance,
        best_residual,
    })
}

/// Mixture over `cols` (of `total` columns) equalizing the row player's payoff over
/// `rows` in `payoff`. `None` when the system has no non-negative solution.
fn indifferent_mix(payoff: &DMatrix<f64>, rows: &[usize], cols: &[usize], total: usize) -> Option<Vec<f64>> {
    let (r, c) = (rows.len(), cols.len());
    // Unknowns: column weights then the common value.
    let mut sys = DMatrix::zeros(r + 1, c + 1);
    let mut rhs = DVector::zeros(r + 1);
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            sys[(ri, ci)] = payoff[(i, j)];
        }
        sys[(ri, c)] = -1.0;
    }
    for ci in 0..c {
        sys[(r, ci)] = 1.0;
    }
    rhs[r] = 1.0;
    let normal = sys.transpose() * &sys + DMatrix::identity(c + 1, c + 1) * RIDGE;
    let z = normal.lu().solve(&(sys.transpose() * &rhs))?;
    let fit = (&sys * &z - &rhs).amax();
    let scale = 1.0 + payoff.amax();
    if !fit.is_finite() || fit > NEGATIVITY_SLACK * scale {
        return None;
    }
    let mut out = vec![0.0; total];
    for (ci, &j) in cols.iter().enumerate() {
        if z[ci] < -NEGATIVITY_SLACK {
            return None;
        }
        out[j] = z[ci].max(0.0);
    }
    Some(out)
}

/// Discrete-time replicator dynamics in exponential form, `x_k ∝ x_k · exp(η · u_k)`,
/// from the uniform profile. The returned profile is the time average of the
/// trajectory, which converges in zero-sum games where the last iterate cycles.
pub fn solve_replicator<H>(game: &EmpiricalGame<H>, steps: u64, step_size: f64) -> Result<SolutionProfile> {
    require_complete(game)?;
    if !(step_size > 0.0) {
        return Err(Error::InvalidArgument("replicator step size must be positive".into()));
    }
    let sizes = game.sizes();
    let n = game.n_players();
    let mut current: Vec<MixedStrategy> = (0..n).map(|i| MixedStrategy::uniform(i, sizes[i])).collect();
    let mut sum: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    for _ in 0..steps {
        for (acc, x) in sum.iter_mut().zip(&current) {
            for (a, w) in acc.iter_mut().zip(x.weights()) {
                *a += w;
            }
        }
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let u = game.deviation_payoffs(i, &current)?;
            let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = current[i]
                .weights()
                .iter()
                .zip(&u)
                .map(|(x, v)| x * (step_size * (v - top)).exp())
                .collect();
            next.push(MixedStrategy::normalized(i, w)?);
        }
        current = next;
    }
    let mixtures = if steps == 0 {
        current
    } else {
        sum.into_iter()
            .enumerate()
            .map(|(i, s)| MixedStrategy::normalized(i, s))
            .collect::<Result<_>>()?
    };
    SolutionProfile::measured(game, mixtures, "replicator")
}

pub fn solve_uniform<H>(game: &EmpiricalGame<H>) -> SolutionProfile {
    let mixtures = game
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(i, s)| MixedStrategy::uniform(i, s))
        .collect();
    unmeasured(game, mixtures, "uniform")
}

pub fn solve_last<H>(game: &EmpiricalGame<H>) -> SolutionProfile {
    let mixtures = game
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(i, s)| MixedStrategy::pure(i, s, s - 1))
        .collect();
    unmeasured(game, mixtures, "last")
}

/// Residual is the measured regret, or 0 while payoff cells are still missing.
fn unmeasured<H>(game: &EmpiricalGame<H>, mixtures: Vec<MixedStrategy>, name: &str) -> SolutionProfile {
    let residual = max_regret(game, &mixtures).unwrap_or(0.0);
    SolutionProfile {
        mixtures,
        solver_name: name.into(),
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MatrixGameEnv;
    use crate::game::all_profiles;

    pub(crate) fn bimatrix(a: &[&[f64]], b: &[&[f64]]) -> EmpiricalGame<()> {
        let (m, n) = (a.len(), a[0].len());
        let mut g = EmpiricalGame::new(2);
        (0..m).for_each(|_| {
            g.add_policy(0, ());
        });
        (0..n).for_each(|_| {
            g.add_policy(1, ());
        });
        for i in 0..m {
            for j in 0..n {
                g.record(PureProfile::new(vec![i, j]), vec![a[i][j], b[i][j]], 1).unwrap();
            }
        }
        g
    }

    fn golden_game() -> EmpiricalGame<()> {
        // Player 2's values from its two Q-tables against player 1's two policies;
        // player 1 receives the complement.
        bimatrix(&[&[0.3, 0.85], &[0.8, 0.3]], &[&[0.7, 0.15], &[0.2, 0.7]])
    }

    fn rps_game() -> EmpiricalGame<()> {
        let env = MatrixGameEnv::rps();
        let mut g = EmpiricalGame::new(2);
        for _ in 0..3 {
            g.add_policy(0, ());
            g.add_policy(1, ());
        }
        for p in all_profiles(&[3, 3]) {
            g.record(p.clone(), env.payoff(p.indices()).to_vec(), 1).unwrap();
        }
        g
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn golden_equilibrium() {
        let s = solve_nash(&golden_game(), DEFAULT_TOLERANCE).unwrap();
        assert!(close(s.mixtures[1].weights(), &[11.0 / 21.0, 10.0 / 21.0], 1e-12));
        assert!(close(s.mixtures[0].weights(), &[10.0 / 21.0, 11.0 / 21.0], 1e-12));
        assert!(close(s.mixtures[1].weights(), &[0.52, 0.48], 0.01));
        assert!(s.residual <= DEFAULT_TOLERANCE);
    }

    #[test]
    fn rps_uniform() {
        let s = solve_nash(&rps_game(), DEFAULT_TOLERANCE).unwrap();
        for m in &s.mixtures {
            assert!(close(m.weights(), &[1.0 / 3.0; 3], 1e-12));
        }
        let r = solve_replicator(&rps_game(), 1000, 0.1).unwrap();
        for m in &r.mixtures {
            assert!(close(m.weights(), &[1.0 / 3.0; 3], 1e-12));
        }
    }

    #[test]
    fn pure_equilibrium_first() {
        // Prisoner's dilemma: defect/defect.
        let g = bimatrix(&[&[3.0, 0.0], &[5.0, 1.0]], &[&[3.0, 5.0], &[0.0, 1.0]]);
        let s = solve_nash(&g, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.mixtures[0].weights(), &[0.0, 1.0]);
        assert_eq!(s.mixtures[1].weights(), &[0.0, 1.0]);
    }

    #[test]
    fn coordination_game_picks_first_in_order() {
        let g = bimatrix(&[&[2.0, 0.0], &[0.0, 1.0]], &[&[1.0, 0.0], &[0.0, 2.0]]);
        let s = solve_nash(&g, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.mixtures[0].weights(), &[1.0, 0.0]);
        assert_eq!(s.mixtures[1].weights(), &[1.0, 0.0]);
    }

    #[test]
    fn degenerate_duplicates() {
        let g = bimatrix(
            &[&[0.5, 0.5, 0.0], &[0.5, 0.5, 0.0]],
            &[&[0.5, 0.5, 1.0], &[0.5, 0.5, 1.0]],
        );
        let s = solve_nash(&g, DEFAULT_TOLERANCE).unwrap();
        assert!(s.residual <= DEFAULT_TOLERANCE);
        assert_eq!(s.mixtures[1].weights(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_by_one() {
        let g = bimatrix(&[&[0.2]], &[&[0.8]]);
        for s in [
            solve_nash(&g, DEFAULT_TOLERANCE).unwrap(),
            solve_replicator(&g, 10, 0.1).unwrap(),
            solve_uniform(&g),
            solve_last(&g),
        ] {
            assert_eq!(s.mixtures[0].weights(), &[1.0]);
            assert_eq!(s.mixtures[1].weights(), &[1.0]);
            assert_eq!(s.residual, 0.0);
        }
    }

    #[test]
    fn replicator_time_average_tracks_nash() {
        let r = solve_replicator(&golden_game(), 100_000, 0.1).unwrap();
        assert!(close(r.mixtures[1].weights(), &[11.0 / 21.0, 10.0 / 21.0], 0.05), "{r:?}");
        assert!(close(r.mixtures[0].weights(), &[10.0 / 21.0, 11.0 / 21.0], 0.05), "{r:?}");
        assert!(r.residual >= 0.0);
    }

    #[test]
    fn uniform_and_last() {
        let mut g = EmpiricalGame::<()>::new(2);
        g.add_policy(0, ());
        g.add_policy(0, ());
        for _ in 0..3 {
            g.add_policy(1, ());
        }
        let u = solve_uniform(&g);
        assert_eq!(u.mixtures[0].weights(), &[0.5, 0.5]);
        assert!(close(u.mixtures[1].weights(), &[1.0 / 3.0; 3], 1e-15));
        let l = solve_last(&g);
        assert_eq!(l.mixtures[1].weights(), &[0.0, 0.0, 1.0]);
        g.add_policy(1, ());
        assert_eq!(solve_last(&g).mixtures[1].weights(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(solve_uniform(&g).mixtures[1].support().len(), 4);
    }

    #[test]
    fn incomplete_game_rejected() {
        let mut g = golden_game();
        g.add_policy(0, ());
        assert!(matches!(
            solve_nash(&g, DEFAULT_TOLERANCE),
            Err(Error::IncompleteGame { missing: 2 })
        ));
        assert!(matches!(solve_replicator(&g, 5, 0.1), Err(Error::IncompleteGame { .. })));
    }

    #[test]
    fn three_players_fall_back() {
        let mut g = EmpiricalGame::<()>::new(3);
        for i in 0..3 {
            g.add_policy(i, ());
            g.add_policy(i, ());
        }
        for p in all_profiles(&[2, 2, 2]) {
            let same = p.indices().iter().all(|&k| k == p.indices()[0]) as u8 as f64;
            g.record(p, vec![same; 3], 1).unwrap();
        }
        let s = solve_nash(&g, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.mixtures.len(), 3);
        assert!(s.residual >= 0.0);
    }

    #[test]
    fn solver_names_parse() {
        for name in ["nash", "replicator", "uniform", "last"] {
            assert_eq!(name.parse::<SolverKind>().unwrap().label(), name);
        }
        assert!("alpharank".parse::<SolverKind>().unwrap_err().is_config_error());
    }
}
