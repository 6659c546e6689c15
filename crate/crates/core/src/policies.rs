//! Cache-placement policies.
//!
//! The learning policies (CUCB, MCUCB, epsilon-greedy) keep per-file sample
//! means of the observed reward `d_f * S_f` and hand perturbed or raw
//! estimates to the single-period solver. Baselines: IUB knows the true
//! popularity, Myopic keeps whatever was requested last period, Random fills
//! the cache at random.

use std::collections::VecDeque;

use rand::Rng;

use crate::catalog::{Catalog, DemandVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spo::{Solver, SpoInstance};

/// Exponent used by MCUCB to shrink its exploration bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaHat<T> {
    Fixed(T),
    /// Least-squares fit of log-estimate against log-rank after warm-up.
    Fitted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind<T> {
    Cucb,
    Mcucb { gamma_hat: GammaHat<T> },
    EpsGreedy { epsilon: T },
    /// Informed upper bound; carries the true expected demand per file.
    Iub { theta: Vec<T> },
    Myopic,
    Random,
}

impl<T> PolicyKind<T> {
    pub fn is_learning(&self) -> bool {
        matches!(
            self,
            PolicyKind::Cucb | PolicyKind::Mcucb { .. } | PolicyKind::EpsGreedy { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Cucb => "cucb",
            PolicyKind::Mcucb { .. } => "mcucb",
            PolicyKind::EpsGreedy { .. } => "eps-greedy",
            PolicyKind::Iub { .. } => "iub",
            PolicyKind::Myopic => "myopic",
            PolicyKind::Random => "random",
        }
    }
}

/// What a policy has learned so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState<T> {
    /// Sample mean of the observed reward `d_f * S_f`.
    pub reward_mean: Vec<T>,
    /// Number of periods each file has been cached (and observed).
    pub placements: Vec<u64>,
    /// Number of observed periods.
    pub period: u64,
    pub last_cache: Vec<usize>,
    /// Demand of each file in `last_cache`, same order.
    pub last_demands: Vec<u32>,
}

impl<T: Scalar> PolicyState<T> {
    pub fn new(files: usize) -> Self {
        PolicyState {
            reward_mean: vec![T::zero(); files],
            placements: vec![0; files],
            period: 0,
            last_cache: Vec::new(),
            last_demands: Vec::new(),
        }
    }

    /// Records one user-request phase. Only cached files are observed.
    pub fn observe(&mut self, cache: &[usize], demands: &DemandVector, catalog: &Catalog) {
        self.last_demands.clear();
        for &f in cache {
            let d = demands.counts[f];
            let reward = T::of_u64(d as u64 * catalog.size(f) as u64);
            let n = T::of_u64(self.placements[f]);
            self.reward_mean[f] = (self.reward_mean[f] * n + reward) / (n + T::one());
            self.placements[f] += 1;
            self.last_demands.push(d);
        }
        self.last_cache.clear();
        self.last_cache.extend_from_slice(cache);
        self.period += 1;
    }
}

/// CUCB upper-confidence index `mu + U*S*sqrt(3 ln t / (2 T))`.
pub fn cucb_index<T: Scalar>(mu_hat: T, placements: u64, t: u64, users: u32, size: u32) -> T {
    if placements == 0 {
        return T::infinity();
    }
    let pad = (T::of(3.0) * T::of_u64(t.max(1)).ln() / (T::of(2.0) * T::of_u64(placements))).sqrt();
    mu_hat + T::of_u64(users as u64 * size as u64) * pad
}

/// MCUCB index `mu + (U*S / F^g) * sqrt(3 ln(U t) / (2 U T))`.
pub fn mcucb_index<T: Scalar>(
    mu_hat: T,
    placements: u64,
    t: u64,
    users: u32,
    size: u32,
    gamma_hat: T,
    files: usize,
) -> T {
    if placements == 0 {
        return T::infinity();
    }
    let u = T::of_u64(users as u64);
    let scale = u * T::of_u64(size as u64) / T::of_u64(files as u64).powf(gamma_hat);
    let pad = (T::of(3.0) * (u * T::of_u64(t.max(1))).ln()
        / (T::of(2.0) * u * T::of_u64(placements)))
    .sqrt();
    mu_hat + scale * pad
}

/// Warm-up caches covering every file at least once: first-fit over files
/// sorted by descending size.
pub fn init_cucb(catalog: &Catalog, capacity: u64) -> Result<Vec<Vec<usize>>> {
    let largest = catalog.largest_size();
    if capacity < largest as u64 {
        return Err(Error::CapacityBelowLargestFile { capacity, largest });
    }
    let mut pending: Vec<usize> = (0..catalog.len()).collect();
    pending.sort_by_key(|&f| std::cmp::Reverse(catalog.size(f)));
    let mut caches = Vec::new();
    while !pending.is_empty() {
        let mut room = capacity;
        let mut cache = Vec::new();
        pending.retain(|&f| {
            let s = catalog.size(f) as u64;
            if s <= room {
                room -= s;
                cache.push(f);
                false
            } else {
                true
            }
        });
        cache.sort_unstable();
        caches.push(cache);
    }
    Ok(caches)
}

/// Uniformly permutes the candidates and keeps each one that still fits.
/// `keep` is placed first and always retained.
pub fn random_feasible<R: Rng + ?Sized>(
    catalog: &Catalog,
    capacity: u64,
    keep: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let mut taken = vec![false; catalog.len()];
    let mut cache = Vec::with_capacity(keep.len() + 16);
    let mut room = capacity;
    for &f in keep {
        taken[f] = true;
        cache.push(f);
        room = room.saturating_sub(catalog.size(f) as u64);
    }
    let mut pool: Vec<usize> = (0..catalog.len()).filter(|&f| !taken[f]).collect();
    let smallest = catalog.smallest_size() as u64;
    let n = pool.len();
    for i in 0..n {
        if room < smallest {
            break;
        }
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
        let f = pool[i];
        let s = catalog.size(f) as u64;
        if s <= room {
            room -= s;
            cache.push(f);
        }
    }
    cache.sort_unstable();
    cache
}

/// Solves the placement problem for per-file values, presenting files to the
/// solver in file-id order so that index-based tie-breaking cannot follow
/// popularity rank. Infinite values outrank every finite one.
pub fn solve_placement<T: Scalar>(
    values: &[T],
    catalog: &Catalog,
    capacity: u64,
    solver: &Solver,
) -> Result<Vec<usize>> {
    let order = catalog.id_order();
    let finite_top = values
        .iter()
        .zip(catalog.sizes())
        .filter(|(v, _)| v.is_finite())
        .map(|(&v, &s)| v / T::of_u64(s as u64))
        .fold(T::zero(), T::max);
    let boost = (finite_top + T::one()) * T::of(2.0);
    let vals = order
        .iter()
        .map(|&f| {
            let v = values[f];
            if v.is_finite() {
                v
            } else {
                boost * T::of_u64(catalog.size(f) as u64)
            }
        })
        .collect();
    let weights = order.iter().map(|&f| catalog.size(f)).collect();
    let inst = SpoInstance::new(vals, weights, capacity)?;
    let sol = solver.solve(&inst)?;
    let mut cache: Vec<usize> = sol.selected().into_iter().map(|p| order[p]).collect();
    cache.sort_unstable();
    Ok(cache)
}

/// Fits a Zipf exponent to per-file reward estimates by least squares of
/// `ln(mu_f / S_f)` on `ln(rank)`; files with a zero estimate are skipped.
pub fn fit_zipf_gamma<T: Scalar>(reward_mean: &[T], catalog: &Catalog) -> Option<T> {
    let mut pop: Vec<f64> = reward_mean
        .iter()
        .zip(catalog.sizes())
        .map(|(m, &s)| m.as_f64() / s as f64)
        .filter(|&p| p > 0.0)
        .collect();
    if pop.len() < 2 {
        return None;
    }
    pop.sort_by(|a, b| b.total_cmp(a));
    let xs: Vec<f64> = (1..=pop.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = pop.iter().map(|p| p.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(T::of((-sxy / sxx).max(0.0)))
}

/// One period's placement decision for any policy kind.
pub fn select_cache<T: Scalar, R: Rng + ?Sized>(
    kind: &PolicyKind<T>,
    solver: &Solver,
    state: &PolicyState<T>,
    catalog: &Catalog,
    users: u32,
    capacity: u64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let t = state.period;
    match kind {
        PolicyKind::Cucb => {
            let idx: Vec<T> = (0..catalog.len())
                .map(|f| {
                    cucb_index(state.reward_mean[f], state.placements[f], t, users, catalog.size(f))
                })
                .collect();
            solve_placement(&idx, catalog, capacity, solver)
        }
        PolicyKind::Mcucb { gamma_hat } => {
            let g = match gamma_hat {
                GammaHat::Fixed(g) => *g,
                GammaHat::Fitted => fit_zipf_gamma(&state.reward_mean, catalog).unwrap_or(T::zero()),
            };
            let idx: Vec<T> = (0..catalog.len())
                .map(|f| {
                    mcucb_index(
                        state.reward_mean[f],
                        state.placements[f],
                        t,
                        users,
                        catalog.size(f),
                        g,
                        catalog.len(),
                    )
                })
                .collect();
            solve_placement(&idx, catalog, capacity, solver)
        }
        PolicyKind::EpsGreedy { epsilon } => {
            if rng.gen::<f64>() < epsilon.as_f64() {
                Ok(random_feasible(catalog, capacity, &[], rng))
            } else {
                solve_placement(&state.reward_mean, catalog, capacity, solver)
            }
        }
        PolicyKind::Iub { theta } => {
            let v: Vec<T> = theta
                .iter()
                .zip(catalog.sizes())
                .map(|(&th, &s)| th * T::of_u64(s as u64))
                .collect();
            solve_placement(&v, catalog, capacity, solver)
        }
        PolicyKind::Myopic => {
            let keep: Vec<usize> = state
                .last_cache
                .iter()
                .zip(&state.last_demands)
                .filter(|(_, &d)| d >= 1)
                .map(|(&f, _)| f)
                .collect();
            Ok(random_feasible(catalog, capacity, &keep, rng))
        }
        PolicyKind::Random => Ok(random_feasible(catalog, capacity, &[], rng)),
    }
}

/// A policy bound to one catalog and cache size, with its learning state.
#[derive(Debug, Clone)]
pub struct Policy<T> {
    kind: PolicyKind<T>,
    solver: Solver,
    capacity: u64,
    users: u32,
    state: PolicyState<T>,
    warmup: VecDeque<Vec<usize>>,
    fixed: Option<Vec<usize>>,
    gamma_fitted: Option<T>,
    explored: u64,
}

impl<T: Scalar> Policy<T> {
    pub fn new(
        kind: PolicyKind<T>,
        solver: Solver,
        catalog: &Catalog,
        users: u32,
        capacity: u64,
    ) -> Result<Self> {
        if let PolicyKind::EpsGreedy { epsilon } = &kind {
            if !(*epsilon >= T::zero() && *epsilon <= T::one()) {
                return Err(Error::Policy(format!("epsilon {epsilon} outside [0, 1]")));
            }
        }
        if let PolicyKind::Iub { theta } = &kind {
            if theta.len() != catalog.len() {
                return Err(Error::Policy("IUB profile does not match the catalog".into()));
            }
        }
        let warmup = if kind.is_learning() {
            init_cucb(catalog, capacity)?.into()
        } else {
            VecDeque::new()
        };
        Ok(Policy {
            kind,
            solver,
            capacity,
            users,
            state: PolicyState::new(catalog.len()),
            warmup,
            fixed: None,
            gamma_fitted: None,
            explored: 0,
        })
    }

    /// Starts from prior reward estimates instead of the warm-up sweep.
    pub fn with_prior(mut self, reward_mean: Vec<T>) -> Result<Self> {
        if reward_mean.len() != self.state.reward_mean.len() {
            return Err(Error::Policy("prior length does not match the catalog".into()));
        }
        self.state.reward_mean = reward_mean;
        self.state.placements.fill(1);
        self.warmup.clear();
        Ok(self)
    }

    pub fn kind(&self) -> &PolicyKind<T> {
        &self.kind
    }

    pub fn state(&self) -> &PolicyState<T> {
        &self.state
    }

    /// Periods in which epsilon-greedy cached a random set.
    pub fn explored(&self) -> u64 {
        self.explored
    }

    pub fn warmup_remaining(&self) -> usize {
        self.warmup.len()
    }

    pub fn next_cache<R: Rng + ?Sized>(&mut self, catalog: &Catalog, rng: &mut R) -> Result<Vec<usize>> {
        if let Some(cache) = self.warmup.pop_front() {
            return Ok(cache);
        }
        match &self.kind {
            PolicyKind::Iub { .. } => {
                if self.fixed.is_none() {
                    self.fixed = Some(select_cache(
                        &self.kind,
                        &self.solver,
                        &self.state,
                        catalog,
                        self.users,
                        self.capacity,
                        rng,
                    )?);
                }
                Ok(self.fixed.clone().expect("set above"))
            }
            PolicyKind::EpsGreedy { epsilon } => {
                if rng.gen::<f64>() < epsilon.as_f64() {
                    self.explored += 1;
                    Ok(random_feasible(catalog, self.capacity, &[], rng))
                } else {
                    solve_placement(&self.state.reward_mean, catalog, self.capacity, &self.solver)
                }
            }
            PolicyKind::Mcucb {
                gamma_hat: GammaHat::Fitted,
            } => {
                // fit once, on the warm-up observations
                let g = *self.gamma_fitted.get_or_insert_with(|| {
                    fit_zipf_gamma(&self.state.reward_mean, catalog).unwrap_or(T::zero())
                });
                let kind = PolicyKind::Mcucb {
                    gamma_hat: GammaHat::Fixed(g),
                };
                select_cache(&kind, &self.solver, &self.state, catalog, self.users, self.capacity, rng)
            }
            kind => select_cache(kind, &self.solver, &self.state, catalog, self.users, self.capacity, rng),
        }
    }

    pub fn observe(&mut self, cache: &[usize], demands: &DemandVector, catalog: &Catalog) {
        self.state.observe(cache, demands, catalog);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog, zipf_profile};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_catalog() -> Catalog {
        build_catalog(&[(1, 200), (3, 200), (5, 200), (7, 200), (9, 200)]).unwrap()
    }

    #[test]
    fn cucb_index_examples() {
        // frozen from an independent evaluation of the closed form
        assert_relative_eq!(cucb_index(50.0, 4, 100, 100, 5), 707.065_221_219_616_5, max_relative = 1e-12);
        assert_eq!(cucb_index(50.0, 4, 1, 100, 5), 50.0);
        assert_eq!(cucb_index(1.0f64, 0, 10, 5, 5), f64::INFINITY);
        let mut prev = f64::INFINITY;
        for n in 1..50 {
            let v = cucb_index(50.0, n, 100, 100, 5);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn mcucb_index_examples() {
        assert_relative_eq!(
            mcucb_index(50.0, 4, 100, 100, 5, 0.56, 1000),
            51.941_437_786_962_375,
            max_relative = 1e-12
        );
        for (t, n) in [(1u64, 1u64), (10, 3), (1000, 17)] {
            assert_relative_eq!(
                mcucb_index(3.0, n, t, 1, 7, 0.0, 42),
                cucb_index(3.0, n, t, 1, 7),
                max_relative = 1e-12
            );
        }
        let pad_m = mcucb_index(0.0, 4, 100, 100, 5, 0.56, 1000);
        let pad_c = cucb_index(0.0, 4, 100, 100, 5);
        assert!(pad_m < pad_c);
    }

    #[test]
    fn padding_monotone_in_t_and_placements() {
        for n in 1..20u64 {
            for t in 1..200u64 {
                let base = cucb_index(2.0, n, t, 10, 3);
                assert!(base >= 2.0);
                assert!(cucb_index(2.0, n + 1, t, 10, 3) <= base);
                assert!(cucb_index(2.0, n, t + 1, 10, 3) >= base);
            }
        }
    }

    #[test]
    fn observe_updates_only_cached_files() {
        let catalog = Catalog::from_sizes(vec![2, 3, 4]).unwrap();
        let mut st = PolicyState::<f64>::new(3);
        let d = DemandVector { counts: vec![5, 1, 7] };
        st.observe(&[0], &d, &catalog);
        assert_eq!(st.reward_mean, vec![10.0, 0.0, 0.0]);
        assert_eq!(st.placements, vec![1, 0, 0]);
        assert_eq!(st.period, 1);
        st.observe(&[0, 2], &d, &catalog);
        assert_eq!(st.reward_mean, vec![10.0, 0.0, 28.0]);
        assert_eq!(st.placements, vec![2, 0, 1]);
        assert_eq!(st.last_cache, vec![0, 2]);
        assert_eq!(st.last_demands, vec![5, 7]);
        assert_eq!(st.period, 2);
    }

    #[test]
    fn warmup_small_cases() {
        let c = Catalog::from_sizes(vec![1, 1, 1]).unwrap();
        assert_eq!(init_cucb(&c, 3).unwrap(), vec![vec![0, 1, 2]]);
        assert!(init_cucb(&c, 0).is_err());

        let c = Catalog::from_sizes(vec![4, 4, 2, 4]).unwrap();
        let seq = init_cucb(&c, 4).unwrap();
        assert!(seq.len() <= c.len());
        for cache in &seq {
            assert!(c.weight_of(cache) <= 4);
        }
    }

    #[test]
    fn warmup_default_catalog_covers_everything() {
        let c = reference_catalog();
        let seq = init_cucb(&c, 256).unwrap();
        let mut seen = vec![false; c.len()];
        for cache in &seq {
            assert!(c.weight_of(cache) <= 256);
            for &f in cache {
                assert!(!seen[f]);
                seen[f] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(seq.len() <= 20 + 1);
    }

    #[test]
    fn iub_on_toy_instance() {
        // values theta*S = (3, 6, 5) with S = (1, 3, 5)
        let c = Catalog::from_sizes(vec![1, 3, 5]).unwrap();
        let kind = PolicyKind::Iub {
            theta: vec![3.0, 2.0, 1.0],
        };
        let mut p = Policy::new(kind, Solver::Greedy, &c, 10, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            assert_eq!(p.next_cache(&c, &mut rng).unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn eps_zero_is_pure_exploitation() {
        let c = reference_catalog();
        let mut st = PolicyState::<f64>::new(c.len());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (f, m) in st.reward_mean.iter_mut().enumerate() {
            *m = rng.gen::<f64>() * c.size(f) as f64;
        }
        let kind = PolicyKind::EpsGreedy { epsilon: 0.0 };
        let a = select_cache(&kind, &Solver::Greedy, &st, &c, 100, 256, &mut rng).unwrap();
        let b = solve_placement(&st.reward_mean, &c, 256, &Solver::Greedy).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_with_huge_cache_takes_everything() {
        let c = reference_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cache = select_cache(
            &PolicyKind::<f64>::Random,
            &Solver::Greedy,
            &PolicyState::new(c.len()),
            &c,
            100,
            c.total_size(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(cache.len(), c.len());
    }

    #[test]
    fn myopic_keeps_requested_files() {
        let c = reference_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut st = PolicyState::<f64>::new(c.len());
        let prev = random_feasible(&c, 256, &[], &mut rng);
        let mut d = DemandVector { counts: vec![0; c.len()] };
        for &f in prev.iter().step_by(2) {
            d.counts[f] = 1;
        }
        st.observe(&prev, &d, &c);
        let next = select_cache(&PolicyKind::Myopic, &Solver::Greedy, &st, &c, 100, 256, &mut rng).unwrap();
        for &f in prev.iter().step_by(2) {
            assert!(next.contains(&f));
        }
        assert!(c.weight_of(&next) <= 256);
    }

    #[test]
    fn epsilon_mixture_frequency() {
        let c = Catalog::from_sizes(vec![1, 2, 3, 4, 5, 6]).unwrap();
        let kind = PolicyKind::EpsGreedy { epsilon: 0.07 };
        let mut p = Policy::new(kind, Solver::Greedy, &c, 10, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let prof = zipf_profile::<f64>(6, 0.8, 10).unwrap();
        let sampler = prof.sampler();
        while p.warmup_remaining() > 0 {
            let cache = p.next_cache(&c, &mut rng).unwrap();
            p.observe(&cache, &sampler.sample(&mut rng), &c);
        }
        for _ in 0..10_000 {
            let cache = p.next_cache(&c, &mut rng).unwrap();
            p.observe(&cache, &sampler.sample(&mut rng), &c);
        }
        let frac = p.explored() as f64 / 10_000.0;
        assert!((frac - 0.07).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn infinite_index_outranks_finite() {
        let c = Catalog::from_sizes(vec![5, 5, 5]).unwrap();
        let cache = solve_placement(&[100.0, f64::INFINITY, 50.0], &c, 5, &Solver::Greedy).unwrap();
        assert_eq!(cache, vec![1]);
    }

    #[test]
    fn gamma_fit_recovers_exact_zipf() {
        let c = Catalog::from_sizes(vec![2; 200]).unwrap();
        let prof = zipf_profile::<f64>(200, 0.9, 100).unwrap();
        let mu: Vec<f64> = prof.theta.iter().map(|t| t * 2.0).collect();
        assert_relative_eq!(fit_zipf_gamma(&mu, &c).unwrap(), 0.9, max_relative = 1e-9);
        assert!(fit_zipf_gamma(&[0.0, 0.0], &Catalog::from_sizes(vec![1, 1]).unwrap()).is_none());
    }

    #[test]
    fn prior_skips_warmup() {
        let c = reference_catalog();
        let p = Policy::new(PolicyKind::<f64>::Cucb, Solver::Greedy, &c, 100, 256)
            .unwrap()
            .with_prior(vec![1.0; c.len()])
            .unwrap();
        assert_eq!(p.warmup_remaining(), 0);
        assert!(p.state().placements.iter().all(|&n| n == 1));
    }

    #[test]
    fn invalid_policies_rejected() {
        let c = reference_catalog();
        assert!(Policy::new(PolicyKind::EpsGreedy { epsilon: 1.5 }, Solver::Greedy, &c, 100, 256).is_err());
        assert!(Policy::new(PolicyKind::Iub { theta: vec![1.0] }, Solver::Greedy, &c, 100, 256).is_err());
        assert!(Policy::<f64>::new(PolicyKind::Cucb, Solver::Greedy, &c, 100, 8).is_err());
        assert!(Policy::<f64>::new(PolicyKind::Random, Solver::Greedy, &c, 100, 8).is_ok());
    }
}
