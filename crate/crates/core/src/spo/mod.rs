//! Single-period cache placement: a 0/1 knapsack with values `v_f` (expected
//! bytes served), weights `w_f` (file sizes) and capacity `M`.
//!
//! Every solver returns the selection in the caller's index order. Values of
//! a selection are always summed in ascending index order so that two solvers
//! agreeing on the set also agree bit-for-bit on the value.

mod bnb;
mod bound;
mod exhaustive;
mod relax;

use std::cmp::Ordering;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use bnb::{solve_bnb, solve_bnb_with_stats, BnbStats, DEFAULT_TIMEOUT};
pub use bound::delta_bound;
pub use exhaustive::{solve_bruteforce, BRUTE_FORCE_MAX_FILES};
pub use relax::{solve_greedy, solve_greedy_skip, solve_lp};

#[derive(Debug, Clone, PartialEq)]
pub struct SpoInstance<T> {
    values: Vec<T>,
    weights: Vec<u32>,
    capacity: u64,
}

impl<T: Scalar> SpoInstance<T> {
    pub fn new(values: Vec<T>, weights: Vec<u32>, capacity: u64) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Instance(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::Instance(format!("value {v} is not a finite nonnegative number")));
        }
        if weights.contains(&0) {
            return Err(Error::Instance("weights must be positive".into()));
        }
        Ok(SpoInstance {
            values,
            weights,
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().map(|&w| w as u64).sum()
    }

    pub fn density(&self, f: usize) -> T {
        self.values[f] / T::of_u64(self.weights[f] as u64)
    }

    /// Indices by descending density, ties by ascending index.
    pub fn density_order(&self) -> Vec<usize> {
        let dens: Vec<T> = (0..self.len()).map(|f| self.density(f)).collect();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| dens[b].partial_cmp(&dens[a]).unwrap_or(Ordering::Equal));
        order
    }

    /// Whether densities are already nonincreasing in index order.
    pub fn is_regular(&self) -> bool {
        (1..self.len()).all(|f| self.density(f - 1) >= self.density(f))
    }

    /// `sum v_f` over selected files, accumulated in index order.
    pub fn value_of(&self, x: &[bool]) -> T {
        let mut acc = T::zero();
        for (f, &on) in x.iter().enumerate() {
            if on {
                acc = acc + self.values[f];
            }
        }
        acc
    }

    pub fn weight_of(&self, x: &[bool]) -> u64 {
        x.iter()
            .zip(&self.weights)
            .filter(|(&on, _)| on)
            .map(|(_, &w)| w as u64)
            .sum()
    }

    pub(crate) fn solution(
        &self,
        x: Vec<bool>,
        status: SolveStatus,
        alpha_guarantee: f64,
        beta_guarantee: f64,
    ) -> SpoSolution<T> {
        let value = self.value_of(&x);
        let weight = self.weight_of(&x);
        debug_assert!(weight <= self.capacity);
        SpoSolution {
            x,
            value,
            weight,
            status,
            alpha_guarantee,
            beta_guarantee,
        }
    }
}

/// Optimum of the LP relaxation, in the caller's index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Index of the single fractional coordinate, if any.
    pub frac_index: Option<usize>,
    /// Its value, strictly inside (0, 1).
    pub beta: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Approximate,
    TimeoutIncumbent,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Approximate => "approximate",
            SolveStatus::TimeoutIncumbent => "timeout-incumbent",
        })
    }
}

/// Binary placement with its guarantee metadata: with probability
/// `beta_guarantee` the value is at least `alpha_guarantee` times optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoSolution<T> {
    pub x: Vec<bool>,
    pub value: T,
    pub weight: u64,
    pub status: SolveStatus,
    pub alpha_guarantee: f64,
    pub beta_guarantee: f64,
}

impl<T> SpoSolution<T> {
    pub fn selected(&self) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter_map(|(f, &on)| on.then_some(f))
            .collect()
    }
}

/// The (alpha, beta)-solver plugged into the policies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    #[default]
    Greedy,
    /// Greedy that keeps scanning past the first overflow. No guarantee claims.
    GreedySkip,
    BranchAndBound { timeout: Duration },
    BruteForce,
}

impl Solver {
    pub fn solve<T: Scalar>(&self, inst: &SpoInstance<T>) -> Result<SpoSolution<T>> {
        match *self {
            Solver::Greedy => Ok(solve_greedy(inst)),
            Solver::GreedySkip => Ok(solve_greedy_skip(inst)),
            Solver::BranchAndBound { timeout } => Ok(solve_bnb(inst, timeout)),
            Solver::BruteForce => solve_bruteforce(inst),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Greedy => "greedy",
            Solver::GreedySkip => "greedy-skip",
            Solver::BranchAndBound { .. } => "bnb",
            Solver::BruteForce => "bruteforce",
        }
    }

    /// Parses `greedy`, `greedy-skip`, `bnb` or `bruteforce`.
    pub fn parse(name: &str, timeout: Duration) -> Result<Self> {
        match name {
            "greedy" => Ok(Solver::Greedy),
            "greedy-skip" | "greedy_skip" => Ok(Solver::GreedySkip),
            "bnb" | "branch-and-bound" => Ok(Solver::BranchAndBound { timeout }),
            "bruteforce" | "brute-force" => Ok(Solver::BruteForce),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_validation() {
        assert!(SpoInstance::new(vec![1.0, 2.0], vec![1], 3).is_err());
        assert!(SpoInstance::new(vec![1.0], vec![0], 3).is_err());
        assert!(SpoInstance::new(vec![-1.0], vec![1], 3).is_err());
        assert!(SpoInstance::new(vec![f64::NAN], vec![1], 3).is_err());
        assert!(SpoInstance::<f64>::new(vec![], vec![], 0).is_ok());
    }

    #[test]
    fn density_order_is_stable() {
        let inst = SpoInstance::new(vec![2.0, 4.0, 1.0, 3.0], vec![2, 4, 1, 1], 3).unwrap();
        // densities 1, 1, 1, 3
        assert_eq!(inst.density_order(), vec![3, 0, 1, 2]);
        assert!(!inst.is_regular());
    }

    #[test]
    fn solver_names_round_trip() {
        let t = Duration::from_secs(3);
        for s in [
            Solver::Greedy,
            Solver::GreedySkip,
            Solver::BranchAndBound { timeout: t },
            Solver::BruteForce,
        ] {
            assert_eq!(Solver::parse(s.name(), t).unwrap(), s);
        }
        assert!(Solver::parse("dp", t).is_err());
    }
}
