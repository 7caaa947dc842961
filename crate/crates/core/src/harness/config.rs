use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::HarnessError;
use crate::agents::AgentParams;
use crate::engine::{EngineConfig, DAY, DEFAULT_ALPHA};
use crate::metrics::SAMPLE_INTERVAL;
use crate::Money;

/// Seed used when neither the command line, the config nor the environment
/// gives one.
pub const DEFAULT_SEED: u64 = 1;

/// Environment variable consulted last for the run seed.
pub const SEED_ENV: &str = "SHUTTLESWARM_SEED";

/// Time of day written as `HH:MM` or `HH:MM:SS`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimeOfDay(pub u64);

impl TimeOfDay {
    pub fn hm(h: u64, m: u64) -> Self {
        Self(h * 3600 + m * 60)
    }

    pub fn seconds(self) -> u64 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, m, s) = (self.0 / 3600, self.0 / 60 % 60, self.0 % 60);
        if s == 0 {
            write!(f, "{h:02}:{m:02}")
        } else {
            write!(f, "{h:02}:{m:02}:{s:02}")
        }
    }
}

impl std::str::FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("expected HH:MM, got {s:?}"));
        }
        let mut v = [0u64; 3];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p.parse().map_err(|_| format!("bad time {s:?}"))?;
        }
        if v[0] > 24 || v[1] > 59 || v[2] > 59 {
            return Err(format!("time out of range: {s:?}"));
        }
        Ok(Self(v[0] * 3600 + v[1] * 60 + v[2]))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CitySource {
    Grid {
        rows: usize,
        cols: usize,
        block_m: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkplaceMode {
    /// Every user draws a workplace of their own.
    Diversified,
    /// Users split between two workplaces.
    Two,
    /// Everybody works at the same place.
    One,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkWindow {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub city: CitySource,
    pub fleet_size: usize,
    pub user_count: usize,
    /// Background cars; a quarter of the users when absent.
    pub common_car_count: Option<usize>,
    pub workplace_mode: WorkplaceMode,
    pub cost_per_km: f64,
    pub work_window: WorkWindow,
    pub work_hours: f64,
    pub wait_timeout: u64,
    pub lift_patience: u64,
    pub pickup_radius: f64,
    pub angle_threshold_deg: f64,
    pub lookahead: u64,
    pub step_seconds: u64,
    pub seed: Option<u64>,
    pub max_ticks: Option<u64>,
    pub congestion_alpha: f64,
    pub dwell: u64,
    pub shuttle_speed_kmh: f64,
    pub car_speed_kmh: f64,
    pub solo_speed_kmh: f64,
    pub day_start: TimeOfDay,
    pub sample_interval: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            city: CitySource::Grid {
                rows: 8,
                cols: 8,
                block_m: 150.0,
                seed: 1,
            },
            fleet_size: 10,
            user_count: 100,
            common_car_count: None,
            workplace_mode: WorkplaceMode::Diversified,
            cost_per_km: 1.0,
            work_window: WorkWindow {
                start: TimeOfDay::hm(8, 0),
                end: TimeOfDay::hm(10, 0),
            },
            work_hours: 8.0,
            wait_timeout: 600,
            lift_patience: 1800,
            pickup_radius: 300.0,
            angle_threshold_deg: 20.0,
            lookahead: 1800,
            step_seconds: 1,
            seed: None,
            max_ticks: None,
            congestion_alpha: DEFAULT_ALPHA,
            dwell: 10,
            shuttle_speed_kmh: 50.0,
            car_speed_kmh: 50.0,
            solo_speed_kmh: 30.0,
            day_start: TimeOfDay::hm(7, 0),
            sample_interval: SAMPLE_INTERVAL,
        }
    }
}

fn positive(v: f64, what: &str) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{what} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let c: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.work_window.start >= self.work_window.end {
            return bad("work window start must precede its end".into());
        }
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg < 180.0) {
            return bad(format!(
                "angle threshold must lie in (0, 180), got {}",
                self.angle_threshold_deg
            ));
        }
        if self.step_seconds == 0 {
            return bad("step_seconds must be positive".into());
        }
        if self.day_start.seconds() % self.step_seconds != 0 {
            return bad("day_start must be a whole number of steps".into());
        }
        if self.day_start > self.work_window.start {
            return bad("day_start must not come after the work window".into());
        }
        if self.work_window.end.seconds() > DAY {
            return bad("work window must end within the day".into());
        }
        if !(self.cost_per_km >= 0.0 && self.cost_per_km.is_finite()) {
            return bad("cost_per_km must be non-negative".into());
        }
        if self.sample_interval == 0 {
            return bad("sample_interval must be positive".into());
        }
        if !(self.congestion_alpha >= 0.0 && self.congestion_alpha.is_finite()) {
            return bad("congestion_alpha must be non-negative".into());
        }
        positive(self.work_hours, "work_hours")?;
        positive(self.pickup_radius, "pickup_radius")?;
        positive(self.shuttle_speed_kmh, "shuttle_speed_kmh")?;
        positive(self.car_speed_kmh, "car_speed_kmh")?;
        positive(self.solo_speed_kmh, "solo_speed_kmh")?;
        if let CitySource::Grid { rows, cols, block_m, .. } = &self.city {
            if *rows < 2 || *cols < 2 {
                return bad(format!("grid needs at least 2x2 intersections, got {rows}x{cols}"));
            }
            positive(*block_m, "block_m")?;
        }
        Ok(())
    }

    pub fn car_count(&self) -> usize {
        self.common_car_count.unwrap_or(self.user_count / 4)
    }

    pub fn work_seconds(&self) -> u64 {
        (self.work_hours * 3600.0).round() as u64
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            step_seconds: self.step_seconds,
            lookahead: self.lookahead,
            wait_timeout: self.wait_timeout,
            lift_patience: self.lift_patience,
            pickup_radius: self.pickup_radius,
            angle_threshold: self.angle_threshold_deg,
            dwell: self.dwell,
            shuttle_speed: self.shuttle_speed_kmh / 3.6,
            car_speed: self.car_speed_kmh / 3.6,
            solo_speed: self.solo_speed_kmh / 3.6,
        }
    }

    pub fn engine_config(&self, trace: bool) -> Result<EngineConfig, HarnessError> {
        let cost_per_km = Money::from_float(self.cost_per_km)
            .ok_or_else(|| HarnessError::Config("cost_per_km must be finite".into()))?;
        Ok(EngineConfig {
            params: self.agent_params(),
            alpha: self.congestion_alpha,
            day_start: self.day_start.seconds(),
            max_ticks: self
                .max_ticks
                .unwrap_or(DAY / self.step_seconds),
            sample_interval: self.sample_interval,
            cost_per_km,
            trace,
        })
    }
}

/// Command line first, then the config file, then the environment.
pub fn resolve_seed(
    flag: Option<u64>,
    config: &ScenarioConfig,
    env: Option<&str>,
) -> Result<u64, HarnessError> {
    if let Some(s) = flag.or(config.seed) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("{SEED_ENV}={v:?} is not a seed"))),
        None => Ok(DEFAULT_SEED),
    }
}
