use super::{FractionalSolution, SolveStatus, SpoInstance, SpoSolution};
use crate::scalar::Scalar;

/// LP relaxation. Files are taken in density order until the first one that
/// does not fit, which receives the leftover fraction of the capacity; all
/// later files are zero.
pub fn solve_lp<T: Scalar>(inst: &SpoInstance<T>) -> FractionalSolution<T> {
    let mut x = vec![T::zero(); inst.len()];
    let mut frac_index = None;
    let mut beta = None;
    let mut room = inst.capacity();
    for f in inst.density_order() {
        let w = inst.weights()[f] as u64;
        if w <= room {
            x[f] = T::one();
            room -= w;
        } else {
            if room > 0 {
                let b = T::of_u64(room) / T::of_u64(w);
                x[f] = b;
                frac_index = Some(f);
                beta = Some(b);
            }
            break;
        }
    }
    let value = x
        .iter()
        .zip(inst.values())
        .fold(T::zero(), |acc, (&xf, &v)| acc + xf * v);
    FractionalSolution {
        x,
        value,
        frac_index,
        beta,
    }
}

/// Density-ordered prefix up to (excluding) the first file that does not fit.
pub(crate) fn greedy_prefix<T: Scalar>(inst: &SpoInstance<T>) -> Vec<bool> {
    prefix_and_bound(inst).0
}

/// The greedy prefix together with the LP value, from a single sort.
fn prefix_and_bound<T: Scalar>(inst: &SpoInstance<T>) -> (Vec<bool>, T) {
    let mut x = vec![false; inst.len()];
    let mut room = inst.capacity();
    let mut split = None;
    for f in inst.density_order() {
        let w = inst.weights()[f] as u64;
        if w > room {
            split = Some((f, room));
            break;
        }
        x[f] = true;
        room -= w;
    }
    let mut lp = inst.value_of(&x);
    if let Some((f, room)) = split {
        lp = lp + T::of_u64(room) / T::of_u64(inst.weights()[f] as u64) * inst.values()[f];
    }
    (x, lp)
}

fn certificate<T: Scalar>(value: T, lp_value: T) -> f64 {
    if lp_value <= T::zero() {
        1.0
    } else {
        (value / lp_value).as_f64().min(1.0)
    }
}

/// Greedy approximation `floor(x_LP)`.
///
/// On regular instances the nominal guarantee is alpha = 0.5, beta = 1. It is
/// capped by the per-instance certificate `value / lp_value`, which always
/// holds because the LP value bounds the optimum.
pub fn solve_greedy<T: Scalar>(inst: &SpoInstance<T>) -> SpoSolution<T> {
    let (x, lp) = prefix_and_bound(inst);
    let value = inst.value_of(&x);
    let cert = certificate(value, lp);
    let alpha = if inst.is_regular() { cert.min(0.5) } else { cert };
    inst.solution(x, SolveStatus::Approximate, alpha, 1.0)
}

/// Greedy that skips files that do not fit and keeps scanning.
pub fn solve_greedy_skip<T: Scalar>(inst: &SpoInstance<T>) -> SpoSolution<T> {
    let mut x = vec![false; inst.len()];
    let mut room = inst.capacity();
    for f in inst.density_order() {
        let w = inst.weights()[f] as u64;
        if w <= room {
            x[f] = true;
            room -= w;
        }
    }
    let value = inst.value_of(&x);
    let cert = certificate(value, solve_lp(inst).value);
    inst.solution(x, SolveStatus::Approximate, cert, 1.0)
}
