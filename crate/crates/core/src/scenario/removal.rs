use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::convex::{solve_with, ConvexProgram, Solution, SolveOptions, Tolerances};
use crate::{Error, Executor, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalRule {
    /// Re-solve without each active constraint and drop the best one.
    Greedy,
    /// Drop one active constraint chosen uniformly at random.
    Random,
    /// Drop every active constraint at once, never exceeding the target.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemovalSettings {
    pub rule: RemovalRule,
    /// Seed for the random choices of [`RemovalRule::Random`] and
    /// [`RemovalRule::Block`].
    pub seed: u64,
    /// Relative slack under which a constraint counts as active.
    pub tol_active: f64,
    pub solver: Tolerances,
}

impl RemovalSettings {
    pub fn new(rule: RemovalRule, seed: u64) -> Self {
        RemovalSettings { rule, seed, tol_active: 1e-6, solver: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovalOutcome {
    pub solution: Solution,
    /// Indices of the violated constraints, ascending.
    pub removed: Vec<usize>,
    /// Objective of the full problem followed by the objective after each
    /// removal step.
    pub objective_history: Vec<f64>,
}

fn violated_set(sol: &Solution, feas: f64) -> Vec<usize> {
    (0..sol.slack.len()).filter(|&i| sol.is_violated(i, feas)).collect()
}

fn mask(n: usize, removed: &[usize], extra: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in removed.iter().chain(extra) {
        m[i] = true;
    }
    m
}

/// Removes `count` constraints from `program` (Algorithm 1).
///
/// Each step picks among the active constraints of the current solution,
/// re-solves without the chosen ones and then takes the removed set to be the
/// constraints violated by the new solution. Under the greedy rule, a step in
/// which no single removal lowers the objective is reported as
/// [`Error::Stall`] carrying the partial outcome.
pub fn remove_constraints<E: Executor>(
    program: &ConvexProgram,
    count: usize,
    settings: &RemovalSettings,
    exec: &E,
) -> Result<RemovalOutcome> {
    let n = program.scalar.len();
    if count >= n && n > 0 {
        return Err(Error::param("cannot remove every constraint"));
    }
    let tol = &settings.solver;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut sol = solve_with(program, tol, &SolveOptions::default())?;
    let mut removed = violated_set(&sol, tol.feas);
    let mut history = vec![sol.objective];
    let guard = 10 * count + 100;
    let mut steps = 0;

    while removed.len() < count {
        steps += 1;
        let active: Vec<usize> =
            (0..n).filter(|i| removed.binary_search(i).is_err() && sol.is_active(*i, settings.tol_active)).collect();
        let stall = |sol: Solution, removed: Vec<usize>, history: Vec<f64>| Error::Stall {
            removed: removed.len(),
            target: count,
            partial: Box::new(RemovalOutcome { solution: sol, removed, objective_history: history }),
        };
        if active.is_empty() || steps > guard {
            return Err(stall(sol, removed, history));
        }

        let next = match settings.rule {
            RemovalRule::Greedy => {
                let results = exec.map(active.len(), |j| {
                    let m = mask(n, &removed, &[active[j]]);
                    solve_with(program, tol, &SolveOptions { excluded: Some(&m), warm: Some(&sol) })
                });
                let mut best: Option<(usize, Solution)> = None;
                for (j, r) in results.into_iter().enumerate() {
                    let cand = r?;
                    let better = match &best {
                        None => true,
                        Some((_, b)) => {
                            let tie = 1e-12 * b.objective.abs().max(1.0);
                            cand.objective < b.objective - tie
                        }
                    };
                    if better {
                        best = Some((j, cand));
                    }
                }
                let (_, cand) = best.expect("active set is non-empty");
                let min_gain = 1e-12 * sol.objective.abs().max(1.0);
                if !(cand.objective < sol.objective - min_gain) {
                    return Err(stall(sol, removed, history));
                }
                cand
            }
            RemovalRule::Random => {
                let pick = *active.choose(&mut rng).expect("active set is non-empty");
                let m = mask(n, &removed, &[pick]);
                solve_with(program, tol, &SolveOptions { excluded: Some(&m), warm: Some(&sol) })?
            }
            RemovalRule::Block => {
                let room = count - removed.len();
                let mut chosen = active;
                if chosen.len() > room {
                    chosen.shuffle(&mut rng);
                    chosen.truncate(room);
                    chosen.sort_unstable();
                }
                let m = mask(n, &removed, &chosen);
                solve_with(program, tol, &SolveOptions { excluded: Some(&m), warm: Some(&sol) })?
            }
        };
        sol = next;
        removed = violated_set(&sol, tol.feas);
        history.push(sol.objective);
    }
    Ok(RemovalOutcome { solution: sol, removed, objective_history: history })
}
