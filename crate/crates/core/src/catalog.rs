//! File universe, Zipf popularity profile and per-period demand generation.
//!
//! Files are indexed by popularity rank: index 0 is the most popular file.
//! Each file also carries an opaque file-id drawn from a seeded permutation;
//! learning policies break ties by file-id so that the rank order cannot leak
//! into their decisions.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seed of the default rank-to-id permutation.
pub const DEFAULT_ID_SEED: u64 = 0x5eed_1d5;

/// How sizes are distributed over popularity ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SizeAssignment {
    /// Cycle through the size classes (largest first) rank by rank, skipping
    /// classes whose count is exhausted.
    #[default]
    RoundRobin,
    /// Uniformly random assignment of the size multiset to ranks.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    sizes: Vec<u32>,
    size_classes: Vec<u32>,
    ids: Vec<u64>,
    by_id: Vec<usize>,
}

/// Builds the catalog with round-robin size assignment and the default id
/// permutation.
pub fn build_catalog(classes: &[(u32, usize)]) -> Result<Catalog> {
    Catalog::new(classes, SizeAssignment::RoundRobin, DEFAULT_ID_SEED)
}

impl Catalog {
    pub fn new(classes: &[(u32, usize)], assignment: SizeAssignment, id_seed: u64) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Catalog("empty size-class list".into()));
        }
        let mut sorted: Vec<(u32, usize)> = classes.to_vec();
        sorted.sort_by(|a, b| b.0.cmp(&a.0));
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Catalog(format!("size {} listed twice", pair[0].0)));
            }
        }
        if let Some(&(s, c)) = sorted.iter().find(|&&(s, c)| s == 0 || c == 0) {
            return Err(Error::Catalog(format!(
                "size class ({s}, {c}) needs a positive size and count"
            )));
        }

        let total: usize = sorted.iter().map(|&(_, c)| c).sum();
        let mut sizes = Vec::with_capacity(total);
        match assignment {
            SizeAssignment::RoundRobin => {
                let mut left: Vec<usize> = sorted.iter().map(|&(_, c)| c).collect();
                while sizes.len() < total {
                    for (k, &(s, _)) in sorted.iter().enumerate() {
                        if left[k] > 0 {
                            left[k] -= 1;
                            sizes.push(s);
                        }
                    }
                }
            }
            SizeAssignment::Shuffled { seed } => {
                for &(s, c) in &sorted {
                    sizes.extend(std::iter::repeat(s).take(c));
                }
                sizes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            }
        }
        let size_classes = sorted.iter().map(|&(s, _)| s).collect();
        Ok(Self::assemble(sizes, size_classes, id_seed))
    }

    /// Catalog with explicit per-rank sizes.
    pub fn from_sizes(sizes: Vec<u32>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Catalog("no files".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Catalog("file sizes must be positive".into()));
        }
        let mut classes = sizes.clone();
        classes.sort_unstable_by(|a, b| b.cmp(a));
        classes.dedup();
        Ok(Self::assemble(sizes, classes, DEFAULT_ID_SEED))
    }

    fn assemble(sizes: Vec<u32>, size_classes: Vec<u32>, id_seed: u64) -> Self {
        let mut ids: Vec<u64> = (0..sizes.len() as u64).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(id_seed));
        let mut by_id: Vec<usize> = (0..sizes.len()).collect();
        by_id.sort_unstable_by_key(|&f| ids[f]);
        Catalog {
            sizes,
            size_classes,
            ids,
            by_id,
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn size(&self, f: usize) -> u32 {
        self.sizes[f]
    }

    /// Distinct sizes, strictly decreasing.
    pub fn size_classes(&self) -> &[u32] {
        &self.size_classes
    }

    pub fn largest_size(&self) -> u32 {
        self.size_classes[0]
    }

    pub fn smallest_size(&self) -> u32 {
        *self.size_classes.last().expect("nonempty")
    }

    pub fn total_size(&self) -> u64 {
        self.sizes.iter().map(|&s| s as u64).sum()
    }

    pub fn file_id(&self, f: usize) -> u64 {
        self.ids[f]
    }

    /// File indices in ascending file-id order.
    pub fn id_order(&self) -> &[usize] {
        &self.by_id
    }

    /// Total size of a set of file indices.
    pub fn weight_of(&self, files: &[usize]) -> u64 {
        files.iter().map(|&f| self.sizes[f] as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile<T> {
    pub gamma: T,
    pub users: u32,
    /// Expected requests per period, indexed by popularity rank.
    pub theta: Vec<T>,
    /// Request probability of a single user, `theta / users`.
    pub probs: Vec<T>,
}

/// Zipf profile `theta_f = U / (f^gamma * sum_i i^-gamma)` over `files` ranks.
pub fn zipf_profile<T: Scalar>(files: usize, gamma: T, users: u32) -> Result<PopularityProfile<T>> {
    if files == 0 {
        return Err(Error::Profile("at least one file is required".into()));
    }
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::Profile(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if users == 0 {
        return Err(Error::Profile("at least one user is required".into()));
    }
    let weights: Vec<T> = (1..=files)
        .map(|i| T::of_u64(i as u64).powf(gamma).recip())
        .collect();
    let norm: T = weights.iter().copied().sum();
    let u = T::of_u64(users as u64);
    let theta: Vec<T> = (1..=files)
        .map(|i| u / (T::of_u64(i as u64).powf(gamma) * norm))
        .collect();
    let probs = theta.iter().map(|&t| t / u).collect();
    Ok(PopularityProfile {
        gamma,
        users,
        theta,
        probs,
    })
}

impl<T: Scalar> PopularityProfile<T> {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Expected reward `sum_{f in cache} theta_f * S_f`.
    pub fn expected_reward(&self, catalog: &Catalog, cache: &[usize]) -> T {
        cache
            .iter()
            .map(|&f| self.theta[f] * T::of_u64(catalog.size(f) as u64))
            .sum()
    }

    pub fn sampler(&self) -> DemandSampler {
        DemandSampler::new(self)
    }
}

/// Realized request counts of one period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandVector {
    pub counts: Vec<u32>,
}

impl DemandVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&d| d as u64).sum()
    }

    /// Requested bytes `sum_f d_f * S_f`.
    pub fn demanded_bytes(&self, catalog: &Catalog) -> u64 {
        self.counts
            .iter()
            .zip(catalog.sizes())
            .map(|(&d, &s)| d as u64 * s as u64)
            .sum()
    }

    /// Bytes served from `cache`.
    pub fn served_bytes(&self, catalog: &Catalog, cache: &[usize]) -> u64 {
        cache
            .iter()
            .map(|&f| self.counts[f] as u64 * catalog.size(f) as u64)
            .sum()
    }
}

/// Multinomial demand generator: each of the `U` users requests exactly one
/// file drawn from the profile's request probabilities.
#[derive(Debug, Clone)]
pub struct DemandSampler {
    users: u32,
    pick: WeightedIndex<f64>,
    files: usize,
}

impl DemandSampler {
    pub fn new<T: Scalar>(profile: &PopularityProfile<T>) -> Self {
        let weights: Vec<f64> = profile.probs.iter().map(|p| p.as_f64()).collect();
        DemandSampler {
            users: profile.users,
            pick: WeightedIndex::new(&weights).expect("zipf weights are positive"),
            files: weights.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DemandVector {
        let mut counts = vec![0; self.files];
        self.sample_into(rng, &mut counts);
        DemandVector { counts }
    }

    /// Overwrites `counts` with a fresh draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, counts: &mut [u32]) {
        counts.fill(0);
        for _ in 0..self.users {
            counts[self.pick.sample(rng)] += 1;
        }
    }
}

pub fn sample_demands<T: Scalar, R: Rng + ?Sized>(
    profile: &PopularityProfile<T>,
    rng: &mut R,
) -> DemandVector {
    DemandSampler::new(profile).sample(rng)
}
