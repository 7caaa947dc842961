use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pinned_config, run_id, run_scenario, HarnessError, ScenarioConfig};
use crate::costing::round_f64_half_even;
use crate::metrics::MetricsReport;
use crate::output::write_run_dir;

pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    FleetSize,
    UserCount,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::FleetSize => "fleet_size",
            SweepParameter::UserCount => "user_count",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: ScenarioConfig,
    pub parameter: SweepParameter,
    pub values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(HarnessError::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("sweep needs at least one seed".into()));
        }
        Ok(())
    }

    pub fn config_for(&self, value: usize) -> ScenarioConfig {
        let mut c = self.base.clone();
        match self.parameter {
            SweepParameter::FleetSize => c.fleet_size = value,
            SweepParameter::UserCount => c.user_count = value,
        }
        c
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub value: usize,
    pub seed: u64,
    pub run_id: String,
    pub report: MetricsReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    fn of(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Seed aggregate for one sweep value, over the runs that completed.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub value: usize,
    pub runs: usize,
    pub completed: usize,
    /// Some run hit the tick budget.
    pub flagged: bool,
    pub served_pct: Option<Aggregate>,
    pub late_pct: Option<Aggregate>,
    pub avg_late_minutes: Option<Aggregate>,
    pub avg_waiting_minutes: Option<Aggregate>,
    pub avg_lifts: Option<Aggregate>,
    pub avg_travel_cost: Option<Aggregate>,
    pub total_gain: Option<Aggregate>,
    pub avg_km_per_shuttle: Option<Aggregate>,
    /// Pooled per-user costs: min, 25th, median, 75th percentile, max.
    pub cost_quantiles: Option<[f64; 5]>,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub parameter: SweepParameter,
    pub points: Vec<PointSummary>,
    /// Point-major, then seeds in the order listed.
    pub runs: Vec<RunRecord>,
}

impl SuiteResult {
    pub fn any_incomplete(&self) -> bool {
        self.points.iter().any(|p| p.flagged)
    }

    pub fn runs_at(&self, value: usize) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.value == value)
    }
}

/// Nearest-rank quantiles of an ascending sample.
fn quantiles(sorted: &[f64]) -> Option<[f64; 5]> {
    if sorted.is_empty() {
        return None;
    }
    let at = |q: f64| {
        let rank = (q * sorted.len() as f64).ceil() as usize;
        sorted[rank.clamp(1, sorted.len()) - 1]
    };
    Some([sorted[0], at(0.25), at(0.5), at(0.75), sorted[sorted.len() - 1]])
}

fn summarize_point(value: usize, runs: &[&RunRecord]) -> PointSummary {
    let done: Vec<&MetricsReport> = runs
        .iter()
        .map(|r| &r.report)
        .filter(|r| !r.incomplete)
        .collect();
    let agg = |f: &dyn Fn(&MetricsReport) -> Option<f64>| Aggregate::of(done.iter().map(|r| f(r)));
    let mut pooled: Vec<f64> = done
        .iter()
        .flat_map(|r| r.cost_distribution.iter())
        .map(|c| num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN))
        .collect();
    pooled.sort_by(f64::total_cmp);
    PointSummary {
        value,
        runs: runs.len(),
        completed: done.len(),
        flagged: done.len() < runs.len(),
        served_pct: agg(&|r| r.served_pct()),
        late_pct: agg(&|r| r.late_pct()),
        avg_late_minutes: agg(&|r| r.avg_late_minutes),
        avg_waiting_minutes: agg(&|r| r.avg_waiting_minutes),
        avg_lifts: agg(&|r| r.lift_stats.as_ref().map(|l| l.avg)),
        avg_travel_cost: agg(&|r| r.avg_travel_cost_f64()),
        total_gain: agg(&|r| num_traits::ToPrimitive::to_f64(&r.total_gain)),
        avg_km_per_shuttle: agg(&|r| r.avg_km_per_shuttle),
        cost_quantiles: quantiles(&pooled),
    }
}

/// Runs every (value, seed) pair on at most `jobs` threads. Each run's
/// artifacts go to `out/runs/<run id>` and the summary to `out/summary.csv`
/// when `out` is given.
pub fn run_experiment_suite(
    spec: &SweepSpec,
    jobs: usize,
    out: Option<&Path>,
    trace: bool,
) -> Result<SuiteResult, HarnessError> {
    spec.validate()?;
    let tasks: Vec<(usize, u64)> = spec
        .values
        .iter()
        .flat_map(|v| spec.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<Result<RunRecord, HarnessError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(value, seed)| {
                let config = spec.config_for(value);
                let id = run_id(&config, seed);
                let output = run_scenario(&config, seed, trace)?;
                if let Some(dir) = out {
                    let dir = dir.join("runs").join(&id);
                    let pinned = pinned_config(&config, seed).to_json_pretty();
                    write_run_dir(&dir, &pinned, &output).map_err(|source| HarnessError::Io {
                        path: dir.display().to_string(),
                        source,
                    })?;
                }
                Ok(RunRecord {
                    value,
                    seed,
                    run_id: id,
                    report: output.report,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let points = spec
        .values
        .iter()
        .map(|v| {
            let at: Vec<&RunRecord> = runs.iter().filter(|r| r.value == *v).collect();
            summarize_point(*v, &at)
        })
        .collect();
    let result = SuiteResult {
        parameter: spec.parameter,
        points,
        runs,
    };
    if let Some(dir) = out {
        let path = dir.join(SUMMARY_CSV);
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(&path, summary_csv(&result)))
            .map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
    }
    Ok(result)
}

pub fn summary_csv(result: &SuiteResult) -> String {
    type Fmt = fn(f64) -> String;
    let raw: Fmt = |v| v.to_string();
    let two: Fmt = |v| round_f64_half_even(v, 2);
    let metrics: [(&str, Fmt, fn(&PointSummary) -> Option<Aggregate>); 8] = [
        ("served_pct", raw, |p| p.served_pct),
        ("late_pct", raw, |p| p.late_pct),
        ("avg_late_minutes", two, |p| p.avg_late_minutes),
        ("avg_waiting_minutes", two, |p| p.avg_waiting_minutes),
        ("avg_lifts", raw, |p| p.avg_lifts),
        ("avg_travel_cost", two, |p| p.avg_travel_cost),
        ("total_gain", two, |p| p.total_gain),
        ("avg_km_per_shuttle", raw, |p| p.avg_km_per_shuttle),
    ];
    let mut header = vec![
        result.parameter.name().to_string(),
        "runs".into(),
        "completed".into(),
        "incomplete".into(),
    ];
    for (name, _, _) in &metrics {
        for stat in ["mean", "min", "max"] {
            header.push(format!("{name}_{stat}"));
        }
    }
    for q in ["min", "q25", "median", "q75", "max"] {
        header.push(format!("cost_{q}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for p in &result.points {
        let mut row = vec![
            p.value.to_string(),
            p.runs.to_string(),
            p.completed.to_string(),
            p.flagged.to_string(),
        ];
        for (_, fmt, get) in &metrics {
            match get(p) {
                Some(a) => row.extend([fmt(a.mean), fmt(a.min), fmt(a.max)]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        match p.cost_quantiles {
            Some(q) => row.extend(q.iter().map(|v| two(*v))),
            None => row.extend((0..5).map(|_| String::new())),
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
