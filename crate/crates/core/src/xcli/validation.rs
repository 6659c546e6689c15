//! Random knapsack placements from Zipf profiles, solved by greedy and by
//! branch-and-bound.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{zipf_profile, Catalog};
use crate::error::Result;
use crate::spo::{delta_bound, solve_bnb, solve_greedy, SolveStatus, SpoInstance};

use super::presets::default_catalog;

/// Cache shares of the total content size that instances draw from.
pub const CACHE_SHARES: [f64; 5] = [0.01, 0.025, 0.05, 0.10, 0.20];
pub const MAX_GAMMA: f64 = 2.4;
pub const USERS: u32 = 100;

#[derive(Debug, Clone)]
pub struct SpoCase {
    pub catalog: Catalog,
    pub gamma: f64,
    pub instance: SpoInstance<f64>,
}

/// Instance `index` of the family seeded by `seed`. `files` fixes F,
/// otherwise it is drawn from 50, 100, ..., 1000.
pub fn spo_case(seed: u64, index: u64, files: Option<usize>) -> Result<SpoCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let files = files.unwrap_or_else(|| 50 * rng.gen_range(1..=20usize));
    let gamma = rng.gen_range(0.0..MAX_GAMMA);
    let share = CACHE_SHARES[rng.gen_range(0..CACHE_SHARES.len())];
    let catalog = default_catalog(files).build()?;
    let capacity =
        ((share * catalog.total_size() as f64).round() as u64).max(catalog.largest_size() as u64);
    let profile = zipf_profile::<f64>(files, gamma, USERS)?;
    let values = profile
        .theta
        .iter()
        .zip(catalog.sizes())
        .map(|(&t, &s)| t * s as f64)
        .collect();
    let instance = SpoInstance::new(values, catalog.sizes().to_vec(), capacity)?;
    Ok(SpoCase {
        catalog,
        gamma,
        instance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpoComparison {
    pub files: usize,
    pub gamma: f64,
    pub capacity: u64,
    pub greedy_value: f64,
    pub bnb_value: f64,
    pub bnb_status: SolveStatus,
    pub greedy_time: Duration,
    pub bnb_time: Duration,
    pub delta_bound: f64,
}

impl SpoComparison {
    pub fn ratio(&self) -> f64 {
        if self.bnb_value > 0.0 {
            self.greedy_value / self.bnb_value
        } else {
            1.0
        }
    }

    /// Whether `bnb / greedy` exceeds the delta bound by more than `tol`.
    pub fn violates_bound(&self, tol: f64) -> bool {
        self.bnb_value > (self.delta_bound + tol) * self.greedy_value
    }
}

pub fn compare(case: &SpoCase, timeout: Duration) -> Result<SpoComparison> {
    let t0 = Instant::now();
    let g = solve_greedy(&case.instance);
    let greedy_time = t0.elapsed();
    let t0 = Instant::now();
    let b = solve_bnb(&case.instance, timeout);
    let bnb_time = t0.elapsed();
    Ok(SpoComparison {
        files: case.instance.len(),
        gamma: case.gamma,
        capacity: case.instance.capacity(),
        greedy_value: g.value,
        bnb_value: b.value,
        bnb_status: b.status,
        greedy_time,
        bnb_time,
        delta_bound: delta_bound(&case.catalog, case.instance.capacity(), case.gamma)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub instances: usize,
    pub mean_ratio: f64,
    pub min_ratio: f64,
    pub optimal: usize,
    pub median_greedy: Duration,
    pub median_bnb: Duration,
    pub bound_violations: usize,
}

impl ValidationSummary {
    pub fn from_comparisons(runs: &[SpoComparison]) -> Self {
        let n = runs.len();
        let ratios: Vec<f64> = runs.iter().map(SpoComparison::ratio).collect();
        let median = |mut v: Vec<Duration>| {
            v.sort();
            v.get(n / 2).copied().unwrap_or_default()
        };
        ValidationSummary {
            instances: n,
            mean_ratio: ratios.iter().sum::<f64>() / n.max(1) as f64,
            min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            optimal: runs.iter().filter(|r| r.bnb_status == SolveStatus::Optimal).count(),
            median_greedy: median(runs.iter().map(|r| r.greedy_time).collect()),
            median_bnb: median(runs.iter().map(|r| r.bnb_time).collect()),
            bound_violations: runs.iter().filter(|r| r.violates_bound(1e-9)).count(),
        }
    }

    /// Median branch-and-bound time over median greedy time.
    pub fn speedup(&self) -> f64 {
        self.median_bnb.as_secs_f64() / self.median_greedy.as_secs_f64().max(1e-12)
    }
}

impl fmt::Display for ValidationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances: {}", self.instances)?;
        writeln!(f, "greedy/bnb mean ratio: {:.6}", self.mean_ratio)?;
        writeln!(f, "greedy/bnb min ratio: {:.6}", self.min_ratio)?;
        writeln!(f, "bnb proved optimal: {}/{}", self.optimal, self.instances)?;
        writeln!(f, "median greedy time: {:?}", self.median_greedy)?;
        writeln!(f, "median bnb time: {:?}", self.median_bnb)?;
        writeln!(f, "median speedup: {:.2}x", self.speedup())?;
        write!(f, "delta bound violations: {}", self.bound_violations)
    }
}

/// Solves `instances` random cases with both solvers.
pub fn validate_spo(
    instances: usize,
    timeout: Duration,
    seed: u64,
) -> Result<(Vec<SpoComparison>, ValidationSummary)> {
    let runs = (0..instances as u64)
        .map(|i| compare(&spo_case(seed, i, None)?, timeout))
        .collect::<Result<Vec<_>>>()?;
    let summary = ValidationSummary::from_comparisons(&runs);
    Ok((runs, summary))
}
