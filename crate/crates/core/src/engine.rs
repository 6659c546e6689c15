//! Period loop, reward accounting, regret and hit-rate, and seeded
//! replications.
//!
//! Seed scheme: replication `r` of master seed `s` draws user demands from
//! ChaCha8 stream `2r` and policy randomness from stream `2r + 1` of the
//! generator seeded with `s`. Demands are therefore shared across policies
//! that run with the same master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, DemandVector, PopularityProfile};
use crate::error::{Error, Result};
use crate::policies::{Policy, PolicyKind};
use crate::scalar::Scalar;
use crate::spo::{solve_bnb, solve_greedy, SolveStatus, Solver, SpoInstance, DEFAULT_TIMEOUT};

/// Periods excluded from hit-rate measurements by default.
pub const DEFAULT_BURN_IN: u64 = 2000;

/// Replications folded per parallel batch.
const BATCH: usize = 64;

/// A cache of fixed size serving a fixed population with known ground truth.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub catalog: Catalog,
    pub profile: PopularityProfile<T>,
    pub capacity: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(catalog: Catalog, profile: PopularityProfile<T>, capacity: u64) -> Result<Self> {
        if catalog.len() != profile.len() {
            return Err(Error::Config(format!(
                "catalog has {} files but the profile has {}",
                catalog.len(),
                profile.len()
            )));
        }
        Ok(Scenario {
            catalog,
            profile,
            capacity,
        })
    }

    /// Knapsack instance on the true expected rewards.
    pub fn true_instance(&self) -> SpoInstance<T> {
        let values = self
            .profile
            .theta
            .iter()
            .zip(self.catalog.sizes())
            .map(|(&t, &s)| t * T::of_u64(s as u64))
            .collect();
        SpoInstance::new(values, self.catalog.sizes().to_vec(), self.capacity)
            .expect("profile values are finite and nonnegative")
    }
}

/// Policy kind plus its single-period solver and optional prior estimates.
#[derive(Debug, Clone)]
pub struct PolicySpec<T> {
    pub kind: PolicyKind<T>,
    pub solver: Solver,
    pub prior: Option<Vec<T>>,
}

impl<T: Scalar> PolicySpec<T> {
    pub fn new(kind: PolicyKind<T>, solver: Solver) -> Self {
        PolicySpec {
            kind,
            solver,
            prior: None,
        }
    }

    pub fn build(&self, scenario: &Scenario<T>) -> Result<Policy<T>> {
        let policy = Policy::new(
            self.kind.clone(),
            self.solver,
            &scenario.catalog,
            scenario.profile.users,
            scenario.capacity,
        )?;
        match &self.prior {
            Some(prior) => policy.with_prior(prior.clone()),
            None => Ok(policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord<T> {
    pub cache: Vec<usize>,
    /// Bytes served from the cache, `sum_{f in cache} d_f S_f`.
    pub realized: u64,
    /// Expected reward of the cache under the true profile.
    pub expected: T,
    /// All requested bytes, `sum_f d_f S_f`.
    pub demanded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<T> {
    pub records: Vec<PeriodRecord<T>>,
    /// Accumulated expected reward after each period.
    pub acc_expected: Vec<T>,
}

impl<T: Scalar> EpisodeTrace<T> {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }
}

/// Regret after each period, from expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries<T> {
    pub values: Vec<T>,
}

/// Best available placement on the true profile.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReference<T> {
    pub cache: Vec<usize>,
    pub value: T,
    pub status: SolveStatus,
}

/// Reference reward per period: branch-and-bound, falling back to greedy if
/// that is better than a timed-out incumbent.
pub fn oracle_reference<T: Scalar>(
    scenario: &Scenario<T>,
    timeout: std::time::Duration,
) -> OracleReference<T> {
    let inst = scenario.true_instance();
    let mut sol = solve_bnb(&inst, timeout);
    if sol.status == SolveStatus::TimeoutIncumbent {
        let g = solve_greedy(&inst);
        if g.value > sol.value {
            sol = g;
        }
    }
    OracleReference {
        cache: sol.selected(),
        value: sol.value,
        status: sol.status,
    }
}

/// Demand and policy random streams of one replication.
pub fn episode_rngs(master_seed: u64, replication: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut demand = ChaCha8Rng::seed_from_u64(master_seed);
    demand.set_stream(2 * replication);
    let mut policy = ChaCha8Rng::seed_from_u64(master_seed);
    policy.set_stream(2 * replication + 1);
    (demand, policy)
}

fn check_feasible(scenario_catalog: &Catalog, cache: &[usize], capacity: u64) -> Result<()> {
    let w = scenario_catalog.weight_of(cache);
    if w > capacity {
        return Err(Error::Policy(format!("cache of size {w} exceeds capacity {capacity}")));
    }
    Ok(())
}

fn run_with_rngs<T: Scalar>(
    spec: &PolicySpec<T>,
    scenario: &Scenario<T>,
    horizon: u64,
    demand_rng: &mut ChaCha8Rng,
    policy_rng: &mut ChaCha8Rng,
) -> Result<EpisodeTrace<T>> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least one period".into()));
    }
    let catalog = &scenario.catalog;
    let mut policy = spec.build(scenario)?;
    let sampler = scenario.profile.sampler();
    let mut demands = DemandVector {
        counts: vec![0; catalog.len()],
    };
    let mut records = Vec::with_capacity(horizon as usize);
    let mut acc_expected = Vec::with_capacity(horizon as usize);
    let mut acc = T::zero();
    for _ in 0..horizon {
        // cache replacement decided before the request phase it serves
        let cache = policy.next_cache(catalog, policy_rng)?;
        check_feasible(catalog, &cache, scenario.capacity)?;
        sampler.sample_into(demand_rng, &mut demands.counts);
        let realized = demands.served_bytes(catalog, &cache);
        let demanded = demands.demanded_bytes(catalog);
        let expected = scenario.profile.expected_reward(catalog, &cache);
        policy.observe(&cache, &demands, catalog);
        acc = acc + expected;
        acc_expected.push(acc);
        records.push(PeriodRecord {
            cache,
            realized,
            expected,
            demanded,
        });
    }
    Ok(EpisodeTrace {
        records,
        acc_expected,
    })
}

/// One episode of `horizon` periods; replication 0 of `seed`.
pub fn run_episode<T: Scalar>(
    spec: &PolicySpec<T>,
    scenario: &Scenario<T>,
    horizon: u64,
    seed: u64,
) -> Result<EpisodeTrace<T>> {
    let (mut d, mut p) = episode_rngs(seed, 0);
    run_with_rngs(spec, scenario, horizon, &mut d, &mut p)
}

/// `R(t) = t * oracle - r_acc(t)`, accumulated as per-period shortfalls.
pub fn regret_of<T: Scalar>(trace: &EpisodeTrace<T>, oracle_per_period: T) -> RegretSeries<T> {
    let mut acc = T::zero();
    let values = trace
        .records
        .iter()
        .map(|r| {
            acc = acc + (oracle_per_period - r.expected);
            acc
        })
        .collect();
    RegretSeries { values }
}

/// Percentage of requested bytes served from the cache after `burn_in`.
pub fn hit_rate<T: Scalar>(trace: &EpisodeTrace<T>, burn_in: u64) -> Result<f64> {
    if burn_in as usize >= trace.horizon() {
        return Err(Error::Metric(format!(
            "burn-in {burn_in} leaves no periods out of {}",
            trace.horizon()
        )));
    }
    let (served, asked) = trace.records[burn_in as usize..]
        .iter()
        .fold((0u64, 0u64), |(s, a), r| (s + r.realized, a + r.demanded));
    if asked == 0 {
        return Err(Error::Metric("no demand after burn-in".into()));
    }
    Ok(100.0 * served as f64 / asked as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Welford accumulator, fed in replication order.
#[derive(Debug, Clone, Default)]
struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn finish(&self) -> MeanStderr {
        let stderr = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        MeanStderr {
            mean: self.mean,
            stderr,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationConfig<T> {
    pub scenario: Scenario<T>,
    pub policy: PolicySpec<T>,
    pub horizon: u64,
    pub burn_in: u64,
    pub master_seed: u64,
    /// Periods (1-based) at which regret and accumulated reward are reported.
    pub checkpoints: Vec<u64>,
    pub oracle_per_period: T,
}

impl<T: Scalar> ReplicationConfig<T> {
    /// Builds a configuration whose oracle is the branch-and-bound reference.
    pub fn new(scenario: Scenario<T>, policy: PolicySpec<T>, horizon: u64, master_seed: u64) -> Self {
        let oracle = oracle_reference(&scenario, DEFAULT_TIMEOUT).value;
        ReplicationConfig {
            scenario,
            policy,
            horizon,
            burn_in: DEFAULT_BURN_IN.min(horizon.saturating_sub(1)),
            master_seed,
            checkpoints: vec![horizon],
            oracle_per_period: oracle,
        }
    }

    /// SHA-256 over a canonical description of everything that affects results.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let sc = &self.scenario;
        h.update(format!("sizes={:?};ids=", sc.catalog.sizes()));
        for f in 0..sc.catalog.len() {
            h.update(sc.catalog.file_id(f).to_le_bytes());
        }
        h.update(format!(
            ";gamma={};users={};capacity={};policy={:?};solver={:?};prior={:?};horizon={};burn_in={};seed={};checkpoints={:?};oracle={}",
            sc.profile.gamma,
            sc.profile.users,
            sc.capacity,
            self.policy.kind,
            self.policy.solver,
            self.policy.prior,
            self.horizon,
            self.burn_in,
            self.master_seed,
            self.checkpoints,
            self.oracle_per_period
        ));
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub policy: String,
    pub replications: usize,
    pub master_seed: u64,
    pub fingerprint: String,
    pub oracle_per_period: f64,
    pub hit_rate: MeanStderr,
    pub checkpoints: Vec<u64>,
    pub regret: Vec<MeanStderr>,
    pub acc_expected: Vec<MeanStderr>,
    pub acc_realized: Vec<MeanStderr>,
    /// Per-period means across replications.
    pub mean_expected: Vec<f64>,
    pub mean_realized: Vec<f64>,
    pub mean_demanded: Vec<f64>,
    pub mean_regret: Vec<f64>,
}

impl AggregateResult {
    /// Mean per-period expected reward over periods `from..=to` (1-based).
    pub fn window_expected(&self, from: u64, to: u64) -> f64 {
        let s = &self.mean_expected[(from - 1) as usize..to as usize];
        s.iter().sum::<f64>() / s.len() as f64
    }
}

struct EpisodeSummary {
    hit_rate: f64,
    regret: Vec<f64>,
    acc_expected: Vec<f64>,
    acc_realized: Vec<f64>,
    expected: Vec<f64>,
    realized: Vec<f64>,
    demanded: Vec<f64>,
    regret_path: Vec<f64>,
}

fn summarize<T: Scalar>(cfg: &ReplicationConfig<T>, replication: u64) -> Result<EpisodeSummary> {
    let (mut d, mut p) = episode_rngs(cfg.master_seed, replication);
    let trace = run_with_rngs(&cfg.policy, &cfg.scenario, cfg.horizon, &mut d, &mut p)?;
    let regret = regret_of(&trace, cfg.oracle_per_period);
    let mut realized_acc = Vec::with_capacity(trace.horizon());
    let mut acc = 0u64;
    for r in &trace.records {
        acc += r.realized;
        realized_acc.push(acc as f64);
    }
    let at = |series: &dyn Fn(usize) -> f64| -> Vec<f64> {
        cfg.checkpoints.iter().map(|&c| series(c as usize - 1)).collect()
    };
    Ok(EpisodeSummary {
        hit_rate: hit_rate(&trace, cfg.burn_in)?,
        regret: at(&|i| regret.values[i].as_f64()),
        acc_expected: at(&|i| trace.acc_expected[i].as_f64()),
        acc_realized: at(&|i| realized_acc[i]),
        expected: trace.records.iter().map(|r| r.expected.as_f64()).collect(),
        realized: trace.records.iter().map(|r| r.realized as f64).collect(),
        demanded: trace.records.iter().map(|r| r.demanded as f64).collect(),
        regret_path: regret.values.iter().map(|v| v.as_f64()).collect(),
    })
}

/// Runs `replications` independent episodes and aggregates them. Results do
/// not depend on `parallelism` (0 means one thread per core).
pub fn run_replications<T: Scalar>(
    cfg: &ReplicationConfig<T>,
    replications: usize,
    parallelism: usize,
) -> Result<AggregateResult> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if cfg.burn_in >= cfg.horizon {
        return Err(Error::Config(format!(
            "burn-in {} must be shorter than the horizon {}",
            cfg.burn_in, cfg.horizon
        )));
    }
    if let Some(&c) = cfg.checkpoints.iter().find(|&&c| c == 0 || c > cfg.horizon) {
        return Err(Error::Config(format!("checkpoint {c} outside 1..={}", cfg.horizon)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let n = cfg.horizon as usize;
    let k = cfg.checkpoints.len();
    let mut hit = Running::default();
    let mut regret = vec![Running::default(); k];
    let mut acc_e = vec![Running::default(); k];
    let mut acc_r = vec![Running::default(); k];
    let mut sums = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    let mut start = 0;
    while start < replications {
        let end = (start + BATCH).min(replications);
        let batch: Vec<Result<EpisodeSummary>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|r| summarize(cfg, r as u64))
                .collect()
        });
        for s in batch {
            let s = s?;
            hit.push(s.hit_rate);
            for j in 0..k {
                regret[j].push(s.regret[j]);
                acc_e[j].push(s.acc_expected[j]);
                acc_r[j].push(s.acc_realized[j]);
            }
            for (acc, series) in sums
                .iter_mut()
                .zip([&s.expected, &s.realized, &s.demanded, &s.regret_path])
            {
                for (a, x) in acc.iter_mut().zip(series) {
                    *a += x;
                }
            }
        }
        start = end;
    }
    let r = replications as f64;
    let [mean_expected, mean_realized, mean_demanded, mean_regret] =
        sums.map(|v| v.into_iter().map(|x| x / r).collect::<Vec<f64>>());
    Ok(AggregateResult {
        policy: cfg.policy.kind.name().to_string(),
        replications,
        master_seed: cfg.master_seed,
        fingerprint: cfg.fingerprint(),
        oracle_per_period: cfg.oracle_per_period.as_f64(),
        hit_rate: hit.finish(),
        checkpoints: cfg.checkpoints.clone(),
        regret: regret.iter().map(Running::finish).collect(),
        acc_expected: acc_e.iter().map(Running::finish).collect(),
        acc_realized: acc_r.iter().map(Running::finish).collect(),
        mean_expected,
        mean_realized,
        mean_demanded,
        mean_regret,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog, zipf_profile};
    use crate::policies::PolicyKind;

    fn toy() -> Scenario<f64> {
        // theta*S = (3, 6, 5): theta = (3, 2, 1), sizes (1, 3, 5)
        let catalog = Catalog::from_sizes(vec![1, 3, 5]).unwrap();
        let mut profile = zipf_profile::<f64>(3, 1.0, 6).unwrap();
        profile.theta = vec![3.0, 2.0, 1.0];
        profile.probs = vec![0.5, 1.0 / 3.0, 1.0 / 6.0];
        Scenario::new(catalog, profile, 5).unwrap()
    }

    fn reference_scenario(gamma: f64) -> Scenario<f64> {
        let catalog = build_catalog(&[(1, 200), (3, 200), (5, 200), (7, 200), (9, 200)]).unwrap();
        let profile = zipf_profile(1000, gamma, 100).unwrap();
        Scenario::new(catalog, profile, 256).unwrap()
    }

    fn iub(sc: &Scenario<f64>) -> PolicySpec<f64> {
        PolicySpec::new(
            PolicyKind::Iub {
                theta: sc.profile.theta.clone(),
            },
            Solver::Greedy,
        )
    }

    #[test]
    fn iub_toy_accumulates_optimum() {
        let sc = toy();
        let trace = run_episode(&iub(&sc), &sc, 10, 4).unwrap();
        assert_eq!(trace.horizon(), 10);
        assert!((trace.acc_expected[9] - 90.0).abs() < 1e-9);
        let oracle = oracle_reference(&sc, DEFAULT_TIMEOUT);
        assert_eq!(oracle.value, 9.0);
        assert_eq!(oracle.status, SolveStatus::Optimal);
        let regret = regret_of(&trace, oracle.value);
        assert!(regret.values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn random_with_everything_cached_hits_all() {
        let mut sc = reference_scenario(0.56);
        sc.capacity = sc.catalog.total_size();
        let trace = run_episode(&PolicySpec::new(PolicyKind::Random, Solver::Greedy), &sc, 50, 1).unwrap();
        assert_eq!(hit_rate(&trace, 0).unwrap(), 100.0);
    }

    #[test]
    fn empty_cache_hits_nothing() {
        let mut sc = reference_scenario(0.56);
        sc.capacity = 0;
        let trace = run_episode(&PolicySpec::new(PolicyKind::Random, Solver::Greedy), &sc, 20, 1).unwrap();
        assert_eq!(hit_rate(&trace, 5).unwrap(), 0.0);
        assert!(hit_rate(&trace, 20).is_err());
    }

    #[test]
    fn episodes_are_deterministic() {
        let sc = reference_scenario(0.8);
        let spec = PolicySpec::new(PolicyKind::EpsGreedy { epsilon: 0.07 }, Solver::Greedy);
        let a = run_episode(&spec, &sc, 60, 99).unwrap();
        let b = run_episode(&spec, &sc, 60, 99).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&spec, &sc, 60, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reward_accounting_per_period() {
        let sc = reference_scenario(0.56);
        let spec = PolicySpec::new(PolicyKind::Myopic, Solver::Greedy);
        let trace = run_episode(&spec, &sc, 100, 3).unwrap();
        for r in &trace.records {
            assert!(r.realized <= r.demanded);
            assert!(sc.catalog.weight_of(&r.cache) <= sc.capacity);
        }
        assert!(trace.acc_expected.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn regret_is_nondecreasing_against_true_optimum() {
        let sc = reference_scenario(0.9);
        let oracle = oracle_reference(&sc, DEFAULT_TIMEOUT);
        assert_eq!(oracle.status, SolveStatus::Optimal);
        for seed in 0..100 {
            let kind = match seed % 3 {
                0 => PolicyKind::Mcucb {
                    gamma_hat: crate::policies::GammaHat::Fixed(0.9),
                },
                1 => PolicyKind::EpsGreedy { epsilon: 0.07 },
                _ => PolicyKind::Random,
            };
            let trace = run_episode(&PolicySpec::new(kind, Solver::Greedy), &sc, 40, seed).unwrap();
            let regret = regret_of(&trace, oracle.value);
            assert!(regret.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn learning_policies_need_room_for_largest_file() {
        let mut sc = reference_scenario(0.5);
        sc.capacity = 8;
        let spec = PolicySpec::new(PolicyKind::Cucb, Solver::Greedy);
        assert!(matches!(
            run_episode(&spec, &sc, 10, 0),
            Err(Error::CapacityBelowLargestFile { .. })
        ));
    }

    #[test]
    fn single_replication_matches_episode() {
        let sc = reference_scenario(0.56);
        let spec = PolicySpec::new(PolicyKind::Random, Solver::Greedy);
        let mut cfg = ReplicationConfig::new(sc.clone(), spec.clone(), 30, 17);
        cfg.burn_in = 10;
        cfg.checkpoints = vec![10, 30];
        let agg = run_replications(&cfg, 1, 1).unwrap();
        let trace = run_episode(&spec, &sc, 30, 17).unwrap();
        assert_eq!(agg.hit_rate.mean, hit_rate(&trace, 10).unwrap());
        assert_eq!(agg.hit_rate.stderr, 0.0);
        assert_eq!(agg.acc_expected[1].mean, trace.acc_expected[29]);
    }

    #[test]
    fn replications_ignore_parallelism() {
        let sc = reference_scenario(0.56);
        let spec = PolicySpec::new(PolicyKind::Mcucb { gamma_hat: crate::policies::GammaHat::Fixed(0.56) }, Solver::Greedy);
        let mut cfg = ReplicationConfig::new(sc, spec, 40, 5);
        cfg.burn_in = 20;
        cfg.checkpoints = vec![20, 40];
        let a = run_replications(&cfg, 70, 1).unwrap();
        let b = run_replications(&cfg, 70, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replication_config_errors() {
        let sc = reference_scenario(0.56);
        let spec = PolicySpec::new(PolicyKind::Random, Solver::Greedy);
        let mut cfg = ReplicationConfig::new(sc, spec, 30, 1);
        assert!(run_replications(&cfg, 0, 1).is_err());
        cfg.burn_in = 30;
        assert!(run_replications(&cfg, 1, 1).is_err());
        cfg.burn_in = 0;
        cfg.checkpoints = vec![31];
        assert!(run_replications(&cfg, 1, 1).is_err());
    }
}
