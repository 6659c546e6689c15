use std::time::{Duration, Instant};

use super::relax::greedy_prefix;
use super::{solve_lp, SolveStatus, SpoInstance, SpoSolution};
use crate::scalar::Scalar;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(50);

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Out,
    In,
}

/// Depth-first search state. Positions are in density order.
struct Search<T> {
    weights: Vec<u64>,
    values: Vec<T>,
    capacity: u64,
    fix: Vec<Fix>,
    best: T,
    best_set: Vec<bool>,
    slack: T,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl<T: Scalar> Search<T> {
    fn improve(&mut self, value: T, upto: usize) {
        // fixed-in files plus every free file before `upto`
        self.best = value;
        for p in 0..self.fix.len() {
            self.best_set[p] = match self.fix[p] {
                Fix::In => true,
                Fix::Out => false,
                Fix::Free => p < upto,
            };
        }
    }

    fn visit(&mut self, fixed_weight: u64, fixed_value: T) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes & 0xff == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                    return;
                }
            }
        }
        if fixed_weight > self.capacity {
            return;
        }

        // LP relaxation of the restricted problem
        let mut room = self.capacity - fixed_weight;
        let mut value = fixed_value;
        let mut split = None;
        for p in 0..self.fix.len() {
            if self.fix[p] != Fix::Free {
                continue;
            }
            if self.weights[p] <= room {
                room -= self.weights[p];
                value = value + self.values[p];
            } else {
                split = Some(p);
                break;
            }
        }

        let Some(n) = split else {
            // integral relaxation: closed
            if value > self.best {
                self.improve(value, self.fix.len());
            }
            return;
        };
        if value > self.best {
            self.improve(value, n);
        }
        let bound = value + T::of_u64(room) / T::of_u64(self.weights[n]) * self.values[n];
        if bound <= self.best + self.slack {
            return;
        }

        self.fix[n] = Fix::In;
        self.visit(fixed_weight + self.weights[n], fixed_value + self.values[n]);
        self.fix[n] = Fix::Out;
        self.visit(fixed_weight, fixed_value);
        self.fix[n] = Fix::Free;
    }
}

/// Search effort of one branch-and-bound run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BnbStats {
    pub nodes: u64,
}

/// Depth-first branch-and-bound seeded with the greedy incumbent. Each node
/// is bounded by its LP relaxation and split on the fractional file,
/// include-branch first. On timeout the incumbent is returned.
pub fn solve_bnb<T: Scalar>(inst: &SpoInstance<T>, timeout: Duration) -> SpoSolution<T> {
    solve_bnb_with_stats(inst, timeout).0
}

pub fn solve_bnb_with_stats<T: Scalar>(
    inst: &SpoInstance<T>,
    timeout: Duration,
) -> (SpoSolution<T>, BnbStats) {
    let order = inst.density_order();
    let greedy = greedy_prefix(inst);
    let incumbent = inst.value_of(&greedy);
    let mut search = Search {
        weights: order.iter().map(|&f| inst.weights()[f] as u64).collect(),
        values: order.iter().map(|&f| inst.values()[f]).collect(),
        capacity: inst.capacity(),
        fix: vec![Fix::Free; inst.len()],
        best: incumbent,
        best_set: order.iter().map(|&f| greedy[f]).collect(),
        slack: T::zero(),
        nodes: 0,
        deadline: Instant::now().checked_add(timeout),
        timed_out: false,
    };
    // absorb summation-order rounding when comparing bounds to the incumbent
    let scale: T = search.values.iter().copied().sum();
    search.slack = scale * T::epsilon() * T::of_u64(4 * inst.len().max(1) as u64);
    search.visit(0, T::zero());

    let mut x = vec![false; inst.len()];
    for (p, &f) in order.iter().enumerate() {
        x[f] = search.best_set[p];
    }
    let stats = BnbStats {
        nodes: search.nodes,
    };
    let sol = if search.timed_out {
        let lp = solve_lp(inst).value;
        let value = inst.value_of(&x);
        let alpha = if lp > T::zero() {
            (value / lp).as_f64().min(1.0)
        } else {
            1.0
        };
        inst.solution(x, SolveStatus::TimeoutIncumbent, alpha, 1.0)
    } else {
        inst.solution(x, SolveStatus::Optimal, 1.0, 1.0)
    };
    (sol, stats)
}
