//! Files written for a run: report, series, ledgers and traces.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::costing::{round_f64_half_even, round_half_even};
use crate::engine::RunOutput;
use crate::metrics::{MetricsReport, SampledSeries};
use crate::{Ledger, Money, ShuttleId};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const SERIES_CSV: &str = "series.csv";
pub const LEDGER: &str = "ledger.jsonl";
pub const CHARGES: &str = "charges.jsonl";
pub const CONFIG: &str = "config.json";
pub const EVENTS: &str = "events.jsonl";
pub const DECISIONS: &str = "decisions.jsonl";

fn money(m: &Money) -> String {
    round_half_even(m, 2)
}

fn minutes(v: Option<f64>) -> String {
    v.map(|m| round_f64_half_even(m, 2)).unwrap_or_default()
}

fn raw(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Scalar report fields in column order, formatted for output; absent values
/// are empty.
pub fn report_fields(r: &MetricsReport) -> Vec<(&'static str, String)> {
    let lifts = r.lift_stats.as_ref();
    vec![
        ("users_total", r.users_total.to_string()),
        ("users_served", r.users_served.to_string()),
        ("served_pct", raw(r.served_pct())),
        ("served_late_count", r.served_late_count.to_string()),
        ("late_pct", raw(r.late_pct())),
        ("avg_late_minutes", minutes(r.avg_late_minutes)),
        (
            "avg_travel_cost",
            r.avg_travel_cost.as_ref().map(money).unwrap_or_default(),
        ),
        ("avg_waiting_minutes", minutes(r.avg_waiting_minutes)),
        ("avg_lifts", raw(lifts.map(|l| l.avg))),
        ("min_lifts", lifts.map(|l| l.min.to_string()).unwrap_or_default()),
        ("max_lifts", lifts.map(|l| l.max.to_string()).unwrap_or_default()),
        ("total_gain", money(&r.total_gain)),
        ("avg_km_per_shuttle", raw(r.avg_km_per_shuttle)),
        ("end_time", r.end_time.to_string()),
        ("ticks", r.ticks.to_string()),
        ("incomplete", r.incomplete.to_string()),
    ]
}

pub fn report_csv(r: &MetricsReport) -> String {
    let fields = report_fields(r);
    let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
    let values: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

fn opt_f64(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

fn opt_text(s: String) -> Value {
    if s.is_empty() {
        Value::Null
    } else {
        Value::String(s)
    }
}

/// Report as JSON; keys come out sorted.
pub fn report_json(r: &MetricsReport) -> Value {
    let lifts = r.lift_stats.as_ref();
    let mut m = Map::new();
    m.insert("users_total".into(), json!(r.users_total));
    m.insert("users_served".into(), json!(r.users_served));
    m.insert("users_boarded".into(), json!(r.users_boarded));
    m.insert("served_pct".into(), opt_f64(r.served_pct()));
    m.insert("served_late_count".into(), json!(r.served_late_count));
    m.insert("late_pct".into(), opt_f64(r.late_pct()));
    m.insert("avg_late_minutes".into(), opt_text(minutes(r.avg_late_minutes)));
    m.insert(
        "avg_travel_cost".into(),
        opt_text(r.avg_travel_cost.as_ref().map(money).unwrap_or_default()),
    );
    m.insert(
        "cost_distribution".into(),
        json!(r.cost_distribution.iter().map(money).collect::<Vec<_>>()),
    );
    m.insert("avg_waiting_minutes".into(), opt_text(minutes(r.avg_waiting_minutes)));
    m.insert("waiting_seconds".into(), json!(r.waiting_seconds));
    m.insert("lifts".into(), json!(r.lifts));
    m.insert("avg_lifts".into(), opt_f64(lifts.map(|l| l.avg)));
    m.insert("min_lifts".into(), json!(lifts.map(|l| l.min)));
    m.insert("max_lifts".into(), json!(lifts.map(|l| l.max)));
    m.insert("total_gain".into(), json!(money(&r.total_gain)));
    m.insert("total_gain_exact".into(), json!(r.total_gain.to_string()));
    m.insert("total_charged_exact".into(), json!(r.total_charged.to_string()));
    m.insert("km_per_shuttle".into(), json!(r.km_per_shuttle));
    m.insert("avg_km_per_shuttle".into(), opt_f64(r.avg_km_per_shuttle));
    m.insert("end_time".into(), json!(r.end_time));
    m.insert("ticks".into(), json!(r.ticks));
    m.insert("incomplete".into(), json!(r.incomplete));
    Value::Object(m)
}

pub fn series_csv(s: &SampledSeries) -> String {
    let mut out = String::from("series,time,value\n");
    for (name, time, value) in s.long_rows() {
        out.push_str(&format!("{name},{time},{value}\n"));
    }
    out
}

/// One line per leg with exact lengths and costs.
pub fn ledger_jsonl(ledgers: &[(ShuttleId, Ledger)]) -> String {
    let mut out = String::new();
    for (s, l) in ledgers {
        for leg in l.legs() {
            let line = json!({
                "shuttle": s,
                "cost_per_km": l.cost_per_km().to_string(),
                "index": leg.index,
                "from": leg.from.0,
                "to": leg.to.0,
                "length": leg.length.to_string(),
                "passengers": leg.passengers,
                "cost": leg.cost.to_string(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

/// One line per (shuttle, passenger) with the exact total charged.
pub fn charges_jsonl(ledgers: &[(ShuttleId, Ledger)]) -> String {
    let mut out = String::new();
    for (s, l) in ledgers {
        for (p, c) in l.charges() {
            let line = json!({"shuttle": s, "person": p, "charge": c.to_string()});
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for i in items {
        out.push_str(&serde_json::to_string(i).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn write(dir: &Path, name: &str, body: &str) -> io::Result<()> {
    fs::write(dir.join(name), body)
}

/// Writes every artifact of `out` into `dir`, creating it if needed. Trace
/// files are written only when tracing was on.
pub fn write_run_dir(dir: &Path, config_json: &str, out: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut report = serde_json::to_string_pretty(&report_json(&out.report))?;
    report.push('\n');
    write(dir, REPORT_JSON, &report)?;
    write(dir, REPORT_CSV, &report_csv(&out.report))?;
    write(dir, SERIES_CSV, &series_csv(&out.report.series))?;
    write(dir, LEDGER, &ledger_jsonl(&out.ledgers))?;
    write(dir, CHARGES, &charges_jsonl(&out.ledgers))?;
    write(dir, CONFIG, config_json)?;
    if out.trace.enabled {
        write(dir, EVENTS, &jsonl(&out.trace.events))?;
        write(dir, DECISIONS, &jsonl(&out.trace.decisions))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{summarize, Sample};

    fn empty_report() -> MetricsReport {
        let series = SampledSeries {
            interval: 60,
            samples: vec![Sample {
                time: 0,
                served_users: 0,
                shuttles_in_use: 0,
                late_users: 0,
            }],
        };
        summarize(&[], &[], series, 0, 0, false)
    }

    #[test]
    fn absent_averages_are_empty_cells() {
        let csv = report_csv(&empty_report());
        let lines: Vec<&str> = csv.lines().collect();
        let header: Vec<&str> = lines[0].split(',').collect();
        let values: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(header.len(), values.len());
        let cell = |k: &str| values[header.iter().position(|h| *h == k).unwrap()];
        assert_eq!(cell("avg_waiting_minutes"), "");
        assert_eq!(cell("avg_travel_cost"), "");
        assert_eq!(cell("users_served"), "0");
        assert_eq!(cell("total_gain"), "0.00");
        let j = report_json(&empty_report());
        assert_eq!(j["avg_waiting_minutes"], Value::Null);
    }

    #[test]
    fn series_rows() {
        let csv = series_csv(&empty_report().series);
        assert_eq!(
            csv,
            "series,time,value\nserved_users,0,0\nshuttles_in_use,0,0\nlate_users,0,0\n"
        );
    }

    #[test]
    fn writes_are_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let out = RunOutput {
            report: empty_report(),
            trace: crate::engine::trace::Trace::new(false),
            ledgers: vec![],
        };
        write_run_dir(dir.path(), "{}", &out).unwrap();
        let first = fs::read(dir.path().join(REPORT_JSON)).unwrap();
        write_run_dir(dir.path(), "{}", &out).unwrap();
        assert_eq!(first, fs::read(dir.path().join(REPORT_JSON)).unwrap());
        assert!(!dir.path().join(EVENTS).exists());
    }
}
