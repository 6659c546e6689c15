use super::{SolveStatus, SpoInstance, SpoSolution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BRUTE_FORCE_MAX_FILES: usize = 25;

struct Enumeration<'a, T> {
    values: &'a [T],
    weights: &'a [u32],
    capacity: u64,
    current: Vec<bool>,
    best: T,
    best_x: Vec<bool>,
}

impl<T: Scalar> Enumeration<'_, T> {
    // running sums follow index order, matching `SpoInstance::value_of`
    fn walk(&mut self, f: usize, weight: u64, value: T) {
        if f == self.values.len() {
            if value > self.best {
                self.best = value;
                self.best_x.copy_from_slice(&self.current);
            }
            return;
        }
        let w = self.weights[f] as u64;
        if weight + w <= self.capacity {
            self.current[f] = true;
            self.walk(f + 1, weight + w, value + self.values[f]);
            self.current[f] = false;
        }
        self.walk(f + 1, weight, value);
    }
}

/// Exact optimum by enumerating every feasible subset.
pub fn solve_bruteforce<T: Scalar>(inst: &SpoInstance<T>) -> Result<SpoSolution<T>> {
    if inst.len() > BRUTE_FORCE_MAX_FILES {
        return Err(Error::TooManyFiles {
            got: inst.len(),
            max: BRUTE_FORCE_MAX_FILES,
        });
    }
    let mut e = Enumeration {
        values: inst.values(),
        weights: inst.weights(),
        capacity: inst.capacity(),
        current: vec![false; inst.len()],
        best: T::zero(),
        best_x: vec![false; inst.len()],
    };
    e.walk(0, 0, T::zero());
    let x = e.best_x;
    Ok(inst.solution(x, SolveStatus::Optimal, 1.0, 1.0))
}
