//! Runs a resolved configuration and writes its artifacts.
//!
//! Everything is computed before the output directory is touched, so a
//! failing configuration leaves no files behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::zipf_profile;
use crate::engine::{
    oracle_reference, run_replications, AggregateResult, MeanStderr, PolicySpec, ReplicationConfig,
    Scenario,
};
use crate::error::{Error, Result};
use crate::spo::SolveStatus;

use super::config::{ExperimentConfig, RewardBasis, SweepAxis, SweepPoint};
use super::plot::{line_chart, Series};
use super::validation::{compare, spo_case, SpoComparison, ValidationSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HitRatePct,
    Regret,
    AccReward,
    /// Greedy over branch-and-bound value (SPO validation only).
    ValueRatio,
    /// Share of instances solved to proven optimality (SPO validation only).
    OptimalPct,
}

/// One line of `results.csv`. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Empty when the experiment has no sweep axis.
    pub sweep_value: Option<f64>,
    pub policy: String,
    pub metric: Metric,
    pub checkpoint: u64,
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
    pub seed: u64,
}

pub const RESULT_COLUMNS: [&str; 8] = [
    "sweep_value",
    "policy",
    "metric",
    "checkpoint",
    "mean",
    "stderr",
    "replications",
    "seed",
];

#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: SweepPoint,
    pub oracle_per_period: f64,
    pub oracle_status: SolveStatus,
    pub aggregates: Vec<AggregateResult>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Episodes(Vec<PointResult>),
    Spo(Vec<(f64, Vec<SpoComparison>)>),
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub outcome: Outcome,
}

/// Runs the experiment without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    if config.name == "spo_validation" {
        return execute_spo(config);
    }
    let checkpoints = config.checkpoints();
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for point in config.points()? {
        let catalog = point.catalog.build()?;
        let profile = zipf_profile::<f64>(catalog.len(), point.gamma, point.users)?;
        let scenario = Scenario::new(catalog, profile, point.cache_size)?;
        let oracle = oracle_reference(&scenario, config.oracle_timeout());
        let mut aggregates = Vec::new();
        for p in &config.policies {
            let spec = PolicySpec {
                kind: p.kind(point.gamma, &scenario.profile.theta)?,
                solver: p.solver()?,
                prior: match &p.prior_csv {
                    Some(path) => Some(read_prior(path, scenario.catalog.len())?),
                    None => None,
                },
            };
            let rc = ReplicationConfig {
                scenario: scenario.clone(),
                policy: spec,
                horizon: config.horizon,
                burn_in: config.burn_in,
                master_seed: config.master_seed,
                checkpoints: checkpoints.clone(),
                oracle_per_period: oracle.value,
            };
            let mut agg = run_replications(&rc, config.replications, config.parallelism)?;
            agg.policy = p.label();
            rows.extend(aggregate_rows(config, point.value, &agg));
            aggregates.push(agg);
        }
        points.push(PointResult {
            point,
            oracle_per_period: oracle.value,
            oracle_status: oracle.status,
            aggregates,
        });
    }
    Ok(Experiment {
        config: config.clone(),
        rows,
        outcome: Outcome::Episodes(points),
    })
}

fn aggregate_rows(cfg: &ExperimentConfig, sweep_value: Option<f64>, agg: &AggregateResult) -> Vec<ResultRow> {
    let row = |metric, checkpoint, m: &MeanStderr| ResultRow {
        sweep_value,
        policy: agg.policy.clone(),
        metric,
        checkpoint,
        mean: m.mean,
        stderr: m.stderr,
        replications: agg.replications,
        seed: agg.master_seed,
    };
    let acc = match cfg.reward_basis {
        RewardBasis::Expected => &agg.acc_expected,
        RewardBasis::Realized => &agg.acc_realized,
    };
    let mut rows = vec![row(Metric::HitRatePct, cfg.horizon, &agg.hit_rate)];
    for (j, &c) in agg.checkpoints.iter().enumerate() {
        rows.push(row(Metric::Regret, c, &agg.regret[j]));
        rows.push(row(Metric::AccReward, c, &acc[j]));
    }
    rows
}

fn execute_spo(config: &ExperimentConfig) -> Result<Experiment> {
    if config.policies.len() != 2 {
        return Err(Error::Config("SPO validation compares exactly two solvers".into()));
    }
    let timeout = std::time::Duration::from_secs_f64(config.policies[1].timeout_secs);
    let points = config.points()?;
    let per_point = (config.replications / points.len()).max(1);
    let mut rows = Vec::new();
    let mut out = Vec::new();
    let mut index = 0u64;
    for point in &points {
        let files = point.catalog.files();
        let mut runs = Vec::with_capacity(per_point);
        for _ in 0..per_point {
            runs.push(compare(&spo_case(config.master_seed, index, Some(files))?, timeout)?);
            index += 1;
        }
        let ratios: Vec<f64> = runs.iter().map(SpoComparison::ratio).collect();
        let optimal: Vec<f64> = runs
            .iter()
            .map(|r| if r.bnb_status == SolveStatus::Optimal { 100.0 } else { 0.0 })
            .collect();
        for (label, metric, xs) in [
            (config.policies[0].label(), Metric::ValueRatio, &ratios),
            (config.policies[1].label(), Metric::OptimalPct, &optimal),
        ] {
            let m = mean_stderr(xs);
            rows.push(ResultRow {
                sweep_value: point.value,
                policy: label,
                metric,
                checkpoint: 0,
                mean: m.mean,
                stderr: m.stderr,
                replications: per_point,
                seed: config.master_seed,
            });
        }
        out.push((point.value.unwrap_or(files as f64), runs));
    }
    Ok(Experiment {
        config: config.clone(),
        rows,
        outcome: Outcome::Spo(out),
    })
}

fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let stderr = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    MeanStderr { mean, stderr }
}

/// One prior reward estimate per line, in file-index order.
pub fn read_prior(path: &Path, files: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: f64 = rec[0]
            .parse()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        out.push(v);
    }
    if out.len() != files {
        return Err(Error::Config(format!(
            "{}: {} prior values for {files} files",
            path.display(),
            out.len()
        )));
    }
    Ok(out)
}

pub fn write_rows<W: std::io::Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(RESULT_COLUMNS)?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(Error::Config(format!("unexpected results header {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn point_suffix(axis: SweepAxis, value: Option<f64>) -> String {
    match value {
        Some(v) => format!("_{}-{v}", axis.name()),
        None => String::new(),
    }
}

fn write_trace(path: &Path, agg: &AggregateResult) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["period", "expected", "realized", "demanded", "regret"])?;
    for t in 0..agg.mean_expected.len() {
        wtr.write_record([
            (t + 1).to_string(),
            agg.mean_expected[t].to_string(),
            agg.mean_realized[t].to_string(),
            agg.mean_demanded[t].to_string(),
            agg.mean_regret[t].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes every artifact of `exp` under its output directory and returns
/// the paths written.
pub fn write_outputs(exp: &Experiment) -> Result<Vec<PathBuf>> {
    let cfg = &exp.config;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let results = dir.join("results.csv");
    write_rows(&exp.rows, fs::File::create(&results)?)?;
    written.push(results);

    let echo = dir.join("config.echo");
    fs::write(&echo, cfg.to_toml())?;
    written.push(echo);

    match &exp.outcome {
        Outcome::Episodes(points) => {
            let oracle = dir.join("oracle.csv");
            let mut wtr = csv::Writer::from_path(&oracle)?;
            wtr.write_record(["sweep_value", "oracle_per_period", "status"])?;
            for p in points {
                wtr.write_record([
                    p.point.value.map(|v| v.to_string()).unwrap_or_default(),
                    p.oracle_per_period.to_string(),
                    p.oracle_status.to_string(),
                ])?;
            }
            wtr.flush()?;
            written.push(oracle);

            if cfg.output.trace {
                for p in points {
                    for agg in &p.aggregates {
                        let name = format!(
                            "trace_{}{}.csv",
                            agg.policy,
                            point_suffix(cfg.sweep.axis, p.point.value)
                        );
                        let path = dir.join(name);
                        write_trace(&path, agg)?;
                        written.push(path);
                    }
                }
            }
            if cfg.output.plot {
                let path = dir.join(format!("plot_{}.svg", cfg.name));
                plot_episodes(cfg, points, &path)?;
                written.push(path);
            }
        }
        Outcome::Spo(points) => {
            let timings = dir.join("timings.csv");
            let mut wtr = csv::Writer::from_path(&timings)?;
            wtr.write_record(["files", "instances", "median_greedy_us", "median_bnb_us", "speedup"])?;
            for (files, runs) in points {
                let s = ValidationSummary::from_comparisons(runs);
                wtr.write_record([
                    files.to_string(),
                    runs.len().to_string(),
                    (s.median_greedy.as_secs_f64() * 1e6).to_string(),
                    (s.median_bnb.as_secs_f64() * 1e6).to_string(),
                    s.speedup().to_string(),
                ])?;
            }
            wtr.flush()?;
            written.push(timings);
            if cfg.output.plot {
                let path = dir.join(format!("plot_{}.svg", cfg.name));
                let series = vec![Series {
                    name: "greedy / bnb".into(),
                    points: points
                        .iter()
                        .map(|(f, runs)| (*f, ValidationSummary::from_comparisons(runs).mean_ratio))
                        .collect(),
                }];
                line_chart(&path, &cfg.name, "files", "value ratio", &series)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn plot_episodes(cfg: &ExperimentConfig, points: &[PointResult], path: &Path) -> Result<()> {
    let labels: Vec<String> = cfg.policies.iter().map(|p| p.label()).collect();
    let series: Vec<Series> = if cfg.sweep.axis == SweepAxis::None {
        let p = &points[0];
        p.aggregates
            .iter()
            .map(|agg| {
                let acc = match cfg.reward_basis {
                    RewardBasis::Expected => &agg.acc_expected,
                    RewardBasis::Realized => &agg.acc_realized,
                };
                Series {
                    name: agg.policy.clone(),
                    points: agg
                        .checkpoints
                        .iter()
                        .zip(acc)
                        .map(|(&c, m)| (c as f64, m.mean))
                        .collect(),
                }
            })
            .collect()
    } else {
        labels
            .iter()
            .enumerate()
            .map(|(i, name)| Series {
                name: name.clone(),
                points: points
                    .iter()
                    .map(|p| (p.point.value.unwrap_or(0.0), p.aggregates[i].hit_rate.mean))
                    .collect(),
            })
            .collect()
    };
    let (x, y) = match cfg.sweep.axis {
        SweepAxis::None => ("period", "accumulated reward"),
        SweepAxis::CacheSize => ("cache size (% of content)", "hit rate (%)"),
        axis => (axis.name(), "hit rate (%)"),
    };
    line_chart(path, &cfg.name, x, y, &series)
}

/// Executes `config` and writes its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<(Experiment, Vec<PathBuf>)> {
    let exp = execute(config)?;
    let written = write_outputs(&exp)?;
    Ok((exp, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_rows(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sweep_value,policy,metric,checkpoint,mean,stderr,replications,seed\n"
        );
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            ResultRow {
                sweep_value: None,
                policy: "mcucb".into(),
                metric: Metric::AccReward,
                checkpoint: 100,
                mean: 1234.5,
                stderr: 0.25,
                replications: 3,
                seed: 9,
            },
            ResultRow {
                sweep_value: Some(0.6),
                policy: "iub".into(),
                metric: Metric::HitRatePct,
                checkpoint: 3000,
                mean: 37.0,
                stderr: 0.0,
                replications: 3,
                seed: 9,
            },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "sweep_value,policy,metric,checkpoint,mean,stderr,replications,seed\n\
             ,mcucb,acc_reward,100,1234.5,0.25,3,9\n\
             0.6,iub,hit_rate_pct,3000,37.0,0.0,3,9\n"
        );
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
        assert!(read_rows("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn mean_stderr_small() {
        let m = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.stderr - 1.0).abs() < 1e-12);
        assert_eq!(mean_stderr(&[4.0]).stderr, 0.0);
    }
}
