//! Named experiment setups.

use std::path::Path;

use crate::catalog::SizeAssignment;
use crate::engine::DEFAULT_BURN_IN;
use crate::error::{Error, Result};

use super::config::{
    CatalogSpec, ExperimentConfig, OutputSpec, PolicyConfig, RewardBasis, SweepAxis, SweepSpec,
};

pub const PRESETS: [&str; 7] = [
    "fig1_convergence",
    "fig2_cucb_small",
    "fig3_gamma",
    "fig4_cache",
    "fig5_users",
    "fig6_files",
    "spo_validation",
];

/// Replications at scale 1.
pub const FULL_REPLICATIONS: f64 = 2e4;
pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_EPSILON: f64 = 0.07;
pub const SIZE_CLASSES: [u32; 5] = [1, 3, 5, 7, 9];

/// Horizon of the hit-rate sweeps: the learning stage plus 1000 measured
/// periods.
pub const SWEEP_HORIZON: u64 = DEFAULT_BURN_IN + 1000;

pub fn replications_for(scale: f64) -> Result<usize> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!("scale {scale} must be positive")));
    }
    Ok(((FULL_REPLICATIONS * scale).round() as usize).max(1))
}

/// `files` spread evenly over the five default size classes.
pub fn default_catalog(files: usize) -> CatalogSpec {
    CatalogSpec {
        classes: SIZE_CLASSES.iter().map(|&s| (s, files / SIZE_CLASSES.len())).collect(),
        assignment: SizeAssignment::RoundRobin,
        id_seed: crate::catalog::DEFAULT_ID_SEED,
    }
}

/// The default scenario: 1000 files, 100 users, gamma 0.56, M = 256.
pub fn base_config(name: &str, replications: usize, seed: u64, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        gamma: 0.56,
        users: 100,
        cache_size: 256,
        horizon: SWEEP_HORIZON,
        burn_in: DEFAULT_BURN_IN,
        replications,
        master_seed: seed,
        parallelism: 0,
        checkpoint_every: 0,
        reward_basis: RewardBasis::Expected,
        oracle_timeout_secs: crate::spo::DEFAULT_TIMEOUT.as_secs_f64(),
        catalog: default_catalog(1000),
        sweep: SweepSpec {
            axis: SweepAxis::None,
            values: Vec::new(),
        },
        policies: Vec::new(),
        output: OutputSpec {
            dir: out.to_path_buf(),
            trace: false,
            plot: true,
        },
    }
}

fn sweep_policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::new("iub"),
        PolicyConfig::new("mcucb"),
        PolicyConfig::new("eps_greedy").with_epsilon(DEFAULT_EPSILON),
        PolicyConfig::new("myopic"),
        PolicyConfig::new("random"),
    ]
}

fn sweep(axis: SweepAxis, values: Vec<f64>) -> SweepSpec {
    SweepSpec { axis, values }
}

/// Resolved configuration for a named preset. `scale` multiplies the
/// replication count only.
pub fn preset(name: &str, scale: f64, seed: Option<u64>, out: &Path) -> Result<ExperimentConfig> {
    let mut cfg = base_config(name, replications_for(scale)?, seed.unwrap_or(DEFAULT_SEED), out);
    match name {
        "fig1_convergence" => {
            cfg.horizon = 5000;
            cfg.checkpoint_every = 100;
            cfg.output.trace = true;
            cfg.policies = vec![
                PolicyConfig::new("mcucb"),
                PolicyConfig::new("eps_greedy").with_epsilon(DEFAULT_EPSILON),
                PolicyConfig::new("iub").labelled("iub-greedy"),
                PolicyConfig::new("iub").labelled("iub-bnb").with_solver("bnb"),
            ];
        }
        "fig2_cucb_small" => {
            cfg.horizon = 5000;
            cfg.checkpoint_every = 100;
            cfg.output.trace = true;
            cfg.cache_size = 125;
            cfg.catalog = default_catalog(100);
            cfg.policies = vec![
                PolicyConfig::new("cucb"),
                PolicyConfig::new("mcucb"),
                PolicyConfig::new("eps_greedy").with_epsilon(DEFAULT_EPSILON),
                PolicyConfig::new("iub"),
            ];
        }
        "fig3_gamma" => {
            cfg.sweep = sweep(SweepAxis::Gamma, (0..=12).map(|k| k as f64 / 5.0).collect());
            cfg.policies = sweep_policies();
        }
        "fig4_cache" => {
            cfg.sweep = sweep(SweepAxis::CacheSize, vec![1.0, 2.5, 5.0, 10.0, 20.0]);
            cfg.policies = sweep_policies();
        }
        "fig5_users" => {
            cfg.sweep = sweep(
                SweepAxis::Users,
                vec![1.0, 2.0, 5.0, 10.0, 13.0, 20.0, 50.0, 100.0, 200.0],
            );
            cfg.policies = sweep_policies();
        }
        "fig6_files" => {
            cfg.sweep = sweep(
                SweepAxis::Files,
                vec![100.0, 250.0, 500.0, 1000.0, 1500.0, 2000.0],
            );
            cfg.policies = sweep_policies();
        }
        "spo_validation" => {
            // One instance per replication; gamma and the cache share are
            // drawn per instance.
            cfg.sweep = sweep(SweepAxis::Files, (1..=20).map(|k| 50.0 * k as f64).collect());
            cfg.policies = vec![
                PolicyConfig::new("iub").labelled("greedy"),
                PolicyConfig::new("iub").labelled("bnb").with_solver("bnb"),
            ];
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_scenario() {
        let cfg = preset("fig1_convergence", 1.0, None, Path::new("o")).unwrap();
        let cat = cfg.catalog.build().unwrap();
        assert_eq!(cat.len(), 1000);
        assert_eq!(cat.total_size(), 5000);
        assert_eq!((cfg.users, cfg.cache_size, cfg.gamma), (100, 256, 0.56));
        assert_eq!(cfg.replications, 20_000);
        assert_eq!(cfg.horizon, 5000);
    }

    #[test]
    fn small_setup() {
        let cfg = preset("fig2_cucb_small", 0.01, None, Path::new("o")).unwrap();
        assert_eq!(cfg.cache_size, 125);
        assert_eq!(cfg.catalog.files(), 100);
        let kinds: Vec<&str> = cfg.policies.iter().map(|p| p.kind.as_str()).collect();
        assert_eq!(kinds, ["cucb", "mcucb", "eps_greedy", "iub"]);
        cfg.validate().unwrap();
    }

    #[test]
    fn gamma_grid() {
        let cfg = preset("fig3_gamma", 0.01, None, Path::new("o")).unwrap();
        let v = &cfg.sweep.values;
        assert_eq!(v.len(), 13);
        assert_eq!((v[0], v[3], v[12]), (0.0, 0.6, 2.4));
        assert_eq!(cfg.cache_size, 256);
    }

    #[test]
    fn scale_changes_replications_only() {
        let a = preset("fig4_cache", 0.01, Some(5), Path::new("o")).unwrap();
        let b = preset("fig4_cache", 0.5, Some(5), Path::new("o")).unwrap();
        assert_eq!((a.replications, b.replications), (200, 10_000));
        assert_eq!(a.horizon, b.horizon);
        assert_eq!(preset("fig4_cache", 1e-9, None, Path::new("o")).unwrap().replications, 1);
        assert!(preset("fig4_cache", 0.0, None, Path::new("o")).is_err());
    }

    #[test]
    fn all_presets_validate() {
        for name in PRESETS {
            preset(name, 0.01, None, Path::new("o")).unwrap().validate().unwrap();
        }
        assert!(preset("fig7", 1.0, None, Path::new("o")).is_err());
    }
}
