//! Shared domain types: modalities, observations, patient-days and the
//! clinical threshold configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A monitored signal. Declaration order is the canonical modality order
/// used for sorting, serialization and report layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    HeartRate,
    SystolicBp,
    DiastolicBp,
    BodyTemperature,
    Activity,
    Sleep,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::HeartRate,
        Modality::SystolicBp,
        Modality::DiastolicBp,
        Modality::BodyTemperature,
        Modality::Activity,
        Modality::Sleep,
    ];

    pub const VITALS: [Modality; 4] = [
        Modality::HeartRate,
        Modality::SystolicBp,
        Modality::DiastolicBp,
        Modality::BodyTemperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::HeartRate => "heart_rate",
            Modality::SystolicBp => "systolic_bp",
            Modality::DiastolicBp => "diastolic_bp",
            Modality::BodyTemperature => "body_temperature",
            Modality::Activity => "activity",
            Modality::Sleep => "sleep",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Modality::HeartRate => "bpm",
            Modality::SystolicBp | Modality::DiastolicBp => "mmHg",
            Modality::BodyTemperature => "°C",
            Modality::Activity => "event-count",
            Modality::Sleep => "stage-label",
        }
    }

    /// Human-facing name used in prompts, plots and template sentences.
    pub fn display_name(self) -> &'static str {
        match self {
            Modality::HeartRate => "Heart Rate",
            Modality::SystolicBp => "Systolic BP",
            Modality::DiastolicBp => "Diastolic BP",
            Modality::BodyTemperature => "Body Temperature",
            Modality::Activity => "Activity",
            Modality::Sleep => "Sleep Patterns",
        }
    }

    pub fn is_vital(self) -> bool {
        matches!(
            self,
            Modality::HeartRate
                | Modality::SystolicBp
                | Modality::DiastolicBp
                | Modality::BodyTemperature
        )
    }

    pub fn is_blood_pressure(self) -> bool {
        matches!(self, Modality::SystolicBp | Modality::DiastolicBp)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown modality `{0}`")]
pub struct UnknownModality(pub String);

impl FromStr for Modality {
    type Err = UnknownModality;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownModality(s.to_string()))
    }
}

/// Sleep stage labels accepted for the sleep stream.
pub const SLEEP_STAGES: [&str; 4] = ["awake", "light", "deep", "rem"];

/// True when `label` is acceptable as a categorical value for `modality`.
///
/// Sleep values must be one of [`SLEEP_STAGES`]. Activity values are room or
/// sensor names: any non-empty label made of ASCII letters, digits, spaces,
/// `_` or `-`. Vitals never take labels.
pub fn is_valid_label(modality: Modality, label: &str) -> bool {
    match modality {
        Modality::Sleep => SLEEP_STAGES.contains(&label),
        Modality::Activity => {
            !label.trim().is_empty()
                && label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, ' ' | '_' | '-'))
        }
        _ => false,
    }
}

/// A reading: numeric for vitals and activity counts, a label for sleep
/// stages and activity locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Numeric(f64),
    Label(String),
}

impl Value {
    /// Numeric text becomes [`Value::Numeric`]; anything else is a label.
    pub fn parse(raw: &str) -> Value {
        let raw = raw.trim();
        match raw.parse::<f64>() {
            Ok(v) => Value::Numeric(v),
            Err(_) => Value::Label(raw.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Numeric(v) => Some(*v),
            Value::Label(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Numeric(v) => write!(f, "{v}"),
            Value::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Local wall-clock time, minute resolution.
    pub timestamp: NaiveDateTime,
    pub modality: Modality,
    pub value: Value,
}

impl Observation {
    pub fn new(timestamp: NaiveDateTime, modality: Modality, value: Value) -> Self {
        Self {
            timestamp: truncate_to_minute(timestamp),
            modality,
            value,
        }
    }

    pub fn numeric(timestamp: NaiveDateTime, modality: Modality, value: f64) -> Self {
        Self::new(timestamp, modality, Value::Numeric(value))
    }
}

pub fn truncate_to_minute(ts: NaiveDateTime) -> NaiveDateTime {
    ts.with_second(0)
        .and_then(|t| t.with_nanosecond(0))
        .unwrap_or(ts)
}

/// All observations for one patient on one calendar date.
///
/// After [`validate_patient_day`] the observations are grouped by modality in
/// canonical order and sorted by timestamp within each modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientDay {
    pub patient_id: String,
    pub date: NaiveDate,
    pub observations: Vec<Observation>,
}

impl PatientDay {
    pub fn new(patient_id: impl Into<String>, date: NaiveDate, observations: Vec<Observation>) -> Self {
        Self {
            patient_id: patient_id.into(),
            date,
            observations,
        }
    }

    pub fn observations_of(&self, modality: Modality) -> impl Iterator<Item = &Observation> + '_ {
        self.observations.iter().filter(move |o| o.modality == modality)
    }

    /// `(timestamp, value)` pairs for a numeric stream, in stored order.
    pub fn numeric_series(&self, modality: Modality) -> Vec<(NaiveDateTime, f64)> {
        self.observations_of(modality)
            .filter_map(|o| o.value.as_f64().map(|v| (o.timestamp, v)))
            .collect()
    }

    pub fn observed_modalities(&self) -> BTreeSet<Modality> {
        self.observations.iter().map(|o| o.modality).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("patient-day has no observations")]
    EmptyDay,
    #[error("observation {index} at {timestamp} is outside {date}")]
    TimestampOutOfDate {
        index: usize,
        timestamp: NaiveDateTime,
        date: NaiveDate,
    },
    #[error("observation {index} ({modality}) has non-finite value")]
    NonFiniteValue { index: usize, modality: Modality },
    #[error("observation {index} ({modality}) has {found} value where {expected} is required")]
    WrongValueKind {
        index: usize,
        modality: Modality,
        expected: &'static str,
        found: &'static str,
    },
    #[error("observation {index} ({modality}) has unknown label `{label}`")]
    UnknownLabel {
        index: usize,
        modality: Modality,
        label: String,
    },
}

/// Rejection diagnostic listing every violation found in a patient-day.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid patient-day {patient_id} {date}: {}", format_violations(.violations))]
pub struct ValidationError {
    pub patient_id: String,
    pub date: NaiveDate,
    pub violations: Vec<Violation>,
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Violations of the observation-level invariants for one reading.
pub fn observation_violations(index: usize, obs: &Observation, date: NaiveDate) -> Vec<Violation> {
    let mut out = Vec::new();
    if obs.timestamp.date() != date {
        out.push(Violation::TimestampOutOfDate {
            index,
            timestamp: obs.timestamp,
            date,
        });
    }
    match (&obs.value, obs.modality) {
        (Value::Numeric(v), m) if !v.is_finite() => {
            out.push(Violation::NonFiniteValue { index, modality: m })
        }
        (Value::Numeric(_), Modality::Sleep) => out.push(Violation::WrongValueKind {
            index,
            modality: Modality::Sleep,
            expected: "stage label",
            found: "numeric",
        }),
        (Value::Label(_), m) if m.is_vital() => out.push(Violation::WrongValueKind {
            index,
            modality: m,
            expected: "numeric",
            found: "label",
        }),
        (Value::Label(l), m) if !is_valid_label(m, l) => out.push(Violation::UnknownLabel {
            index,
            modality: m,
            label: l.clone(),
        }),
        _ => {}
    }
    out
}

/// Checks the patient-day invariants and returns the day with observations
/// grouped by modality and sorted by time. Idempotent.
pub fn validate_patient_day(mut day: PatientDay) -> Result<PatientDay, ValidationError> {
    let mut violations = Vec::new();
    if day.observations.is_empty() {
        violations.push(Violation::EmptyDay);
    }
    for (index, obs) in day.observations.iter_mut().enumerate() {
        obs.timestamp = truncate_to_minute(obs.timestamp);
        violations.extend(observation_violations(index, obs, day.date));
    }
    if !violations.is_empty() {
        return Err(ValidationError {
            patient_id: day.patient_id,
            date: day.date,
            violations,
        });
    }
    // stable: equal timestamps keep their input order, so re-validation is a no-op
    day.observations
        .sort_by(|a, b| (a.modality, a.timestamp).cmp(&(b.modality, b.timestamp)));
    Ok(day)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    High,
    Low,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::High => "high",
            Direction::Low => "low",
        }
    }
}

/// Closed normal range for one vital. Values strictly outside are abnormal;
/// a value equal to a bound is normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn classify(&self, value: f64) -> Option<Direction> {
        if value > self.upper {
            Some(Direction::High)
        } else if value < self.lower {
            Some(Direction::Low)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("{vital}: lower bound {lower} must be below upper bound {upper}")]
    InvertedBounds { vital: Modality, lower: f64, upper: f64 },
    #[error("`{0}` must be a positive integer")]
    NonPositive(&'static str),
    #[error("cannot read config: {0}")]
    Io(String),
}

/// Per-vital reference ranges and the sustained-episode policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub heart_rate: Bounds,
    pub systolic_bp: Bounds,
    pub diastolic_bp: Bounds,
    pub body_temperature: Bounds,
    /// Minimum wall-clock span of a sustained episode.
    pub persistence_minutes: u32,
    /// Largest gap allowed between consecutive readings of one episode.
    pub max_gap_minutes: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            heart_rate: Bounds::new(50.0, 90.0),
            systolic_bp: Bounds::new(90.0, 140.0),
            diastolic_bp: Bounds::new(60.0, 90.0),
            body_temperature: Bounds::new(35.0, 37.5),
            persistence_minutes: 30,
            max_gap_minutes: 15,
        }
    }
}

impl ThresholdConfig {
    /// Bounds for a vital; `None` for activity and sleep.
    pub fn bounds(&self, modality: Modality) -> Option<Bounds> {
        match modality {
            Modality::HeartRate => Some(self.heart_rate),
            Modality::SystolicBp => Some(self.systolic_bp),
            Modality::DiastolicBp => Some(self.diastolic_bp),
            Modality::BodyTemperature => Some(self.body_temperature),
            Modality::Activity | Modality::Sleep => None,
        }
    }

    fn bounds_mut(&mut self, modality: Modality) -> Option<&mut Bounds> {
        match modality {
            Modality::HeartRate => Some(&mut self.heart_rate),
            Modality::SystolicBp => Some(&mut self.systolic_bp),
            Modality::DiastolicBp => Some(&mut self.diastolic_bp),
            Modality::BodyTemperature => Some(&mut self.body_temperature),
            Modality::Activity | Modality::Sleep => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for vital in Modality::VITALS {
            let b = self.bounds(vital).expect("vital has bounds");
            if !(b.lower < b.upper) || !b.lower.is_finite() || !b.upper.is_finite() {
                return Err(ConfigError::InvertedBounds {
                    vital,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        if self.persistence_minutes == 0 {
            return Err(ConfigError::NonPositive("persistence_minutes"));
        }
        if self.max_gap_minutes == 0 {
            return Err(ConfigError::NonPositive("max_gap_minutes"));
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ThresholdConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or(ConfigError::Syntax { line: line_no })?;
            let (key, value) = (key.trim(), value.trim());
            let invalid = || ConfigError::InvalidValue {
                line: line_no,
                key: key.to_string(),
                value: value.to_string(),
            };
            match key {
                "persistence_minutes" => cfg.persistence_minutes = value.parse().map_err(|_| invalid())?,
                "max_gap_minutes" => cfg.max_gap_minutes = value.parse().map_err(|_| invalid())?,
                _ => {
                    let (vital, side) = key
                        .rsplit_once('.')
                        .and_then(|(v, s)| Some((v.parse::<Modality>().ok()?, s)))
                        .filter(|(v, s)| v.is_vital() && matches!(*s, "lower" | "upper"))
                        .ok_or_else(|| ConfigError::UnknownKey {
                            line: line_no,
                            key: key.to_string(),
                        })?;
                    let v: f64 = value.parse().map_err(|_| invalid())?;
                    if !v.is_finite() {
                        return Err(invalid());
                    }
                    let bounds = cfg.bounds_mut(vital).expect("vital has bounds");
                    if side == "lower" {
                        bounds.lower = v;
                    } else {
                        bounds.upper = v;
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    /// Canonical key-value rendering; parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for vital in Modality::VITALS {
            let b = self.bounds(vital).expect("vital has bounds");
            out.push_str(&format!("{}.lower = {}\n", vital.name(), b.lower));
            out.push_str(&format!("{}.upper = {}\n", vital.name(), b.upper));
        }
        out.push_str(&format!("persistence_minutes = {}\n", self.persistence_minutes));
        out.push_str(&format!("max_gap_minutes = {}\n", self.max_gap_minutes));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(date: NaiveDate, h: u32, m: u32) -> NaiveDateTime {
        date.and_hms_opt(h, m, 0).unwrap()
    }

    fn d() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 6, 11).unwrap()
    }

    #[test]
    fn defaults_match_published_ranges() {
        let cfg = ThresholdConfig::default();
        assert_eq!(cfg.heart_rate, Bounds::new(50.0, 90.0));
        assert_eq!(cfg.systolic_bp, Bounds::new(90.0, 140.0));
        assert_eq!(cfg.diastolic_bp, Bounds::new(60.0, 90.0));
        assert_eq!(cfg.body_temperature, Bounds::new(35.0, 37.5));
        assert_eq!(cfg.persistence_minutes, 30);
        assert_eq!(cfg.max_gap_minutes, 15);
    }

    #[test]
    fn bound_values_are_normal() {
        let b = Bounds::new(50.0, 90.0);
        assert_eq!(b.classify(50.0), None);
        assert_eq!(b.classify(90.0), None);
        assert_eq!(b.classify(90.0001), Some(Direction::High));
        assert_eq!(b.classify(49.9), Some(Direction::Low));
    }

    #[test]
    fn sorts_readings_within_modality() {
        let day = PatientDay::new(
            "A",
            d(),
            vec![
                Observation::numeric(ts(d(), 9, 0), Modality::HeartRate, 72.0),
                Observation::numeric(ts(d(), 8, 0), Modality::HeartRate, 70.0),
            ],
        );
        let v = validate_patient_day(day).unwrap();
        let times: Vec<_> = v.observations.iter().map(|o| o.timestamp).collect();
        assert_eq!(times, vec![ts(d(), 8, 0), ts(d(), 9, 0)]);
    }

    #[test]
    fn rejects_empty_day() {
        let err = validate_patient_day(PatientDay::new("A", d(), vec![])).unwrap_err();
        assert_eq!(err.violations, vec![Violation::EmptyDay]);
    }

    #[test]
    fn rejects_nan_temperature() {
        let day = PatientDay::new(
            "A",
            d(),
            vec![Observation::numeric(ts(d(), 8, 0), Modality::BodyTemperature, f64::NAN)],
        );
        let err = validate_patient_day(day).unwrap_err();
        assert!(matches!(err.violations[0], Violation::NonFiniteValue { .. }));
    }

    #[test]
    fn lists_every_violation() {
        let other = NaiveDate::from_ymd_opt(2019, 6, 12).unwrap();
        let day = PatientDay::new(
            "A",
            d(),
            vec![
                Observation::numeric(ts(other, 8, 0), Modality::HeartRate, 70.0),
                Observation::numeric(ts(d(), 8, 0), Modality::HeartRate, f64::INFINITY),
                Observation::new(ts(d(), 8, 0), Modality::Sleep, Value::Label("dozing".into())),
            ],
        );
        let err = validate_patient_day(day).unwrap_err();
        assert_eq!(err.violations.len(), 3);
        assert!(matches!(err.violations[0], Violation::TimestampOutOfDate { index: 0, .. }));
        assert!(matches!(err.violations[2], Violation::UnknownLabel { index: 2, .. }));
    }

    #[test]
    fn config_parse_overrides_and_defaults() {
        let cfg = ThresholdConfig::parse(
            "# custom\nheart_rate.upper = 100\nmax_gap_minutes: 25\n\n",
        )
        .unwrap();
        assert_eq!(cfg.heart_rate, Bounds::new(50.0, 100.0));
        assert_eq!(cfg.max_gap_minutes, 25);
        assert_eq!(cfg.systolic_bp, ThresholdConfig::default().systolic_bp);
        assert_eq!(ThresholdConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(matches!(
            ThresholdConfig::parse("heart_rate.lower = 95"),
            Err(ConfigError::InvertedBounds { .. })
        ));
        assert!(matches!(
            ThresholdConfig::parse("activity.lower = 1"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            ThresholdConfig::parse("persistence_minutes = 0"),
            Err(ConfigError::NonPositive(_))
        ));
        assert!(matches!(
            ThresholdConfig::parse("max_gap_minutes = -3"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(ThresholdConfig::parse("nonsense"), Err(ConfigError::Syntax { line: 1 })));
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(
            readings in prop::collection::vec((0u32..24, 0u32..60, 0usize..4, 30.0f64..200.0), 1..40)
        ) {
            let obs = readings
                .into_iter()
                .map(|(h, m, v, x)| Observation::numeric(ts(d(), h, m), Modality::VITALS[v], x))
                .collect();
            let once = validate_patient_day(PatientDay::new("p", d(), obs)).unwrap();
            let twice = validate_patient_day(once.clone()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
