//! Statistical conditioning: the per-day summary vector and the text blocks
//! fed to the zero-shot and statistical prompts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Direction, Modality, PatientDay, ThresholdConfig};
use crate::templates::{self, format_reading, format_statistic, MISSING_DATA_SENTINEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Normal,
    High,
    Low,
    Mixed,
}

impl Indicator {
    fn from_flags(high: bool, low: bool) -> Self {
        match (high, low) {
            (true, true) => Indicator::Mixed,
            (true, false) => Indicator::High,
            (false, true) => Indicator::Low,
            (false, false) => Indicator::Normal,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Indicator::Normal => "Normal",
            Indicator::High => "Abnormally High",
            Indicator::Low => "Abnormally Low",
            Indicator::Mixed => "Abnormally High and Low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
    /// From individual readings: normal iff none is strictly out of range.
    pub indicator: Indicator,
    /// Where the daily mean falls relative to the bounds.
    pub mean_indicator: Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub patient_id: String,
    pub date: NaiveDate,
    /// Vitals with at least one reading.
    pub vitals: BTreeMap<Modality, VitalStats>,
    /// Observation count for every modality; zero means unavailable.
    pub observation_counts: BTreeMap<Modality, usize>,
}

impl StatSummary {
    pub fn is_available(&self, modality: Modality) -> bool {
        self.observation_counts.get(&modality).copied().unwrap_or(0) > 0
    }
}

pub fn compute_stat_summary(day: &PatientDay, cfg: &ThresholdConfig) -> StatSummary {
    let mut vitals = BTreeMap::new();
    for vital in Modality::VITALS {
        let bounds = cfg.bounds(vital).expect("vital has bounds");
        // Welford's update keeps the variance numerically stable
        let mut count = 0usize;
        let (mut mean, mut m2) = (0.0f64, 0.0f64);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut any_high, mut any_low) = (false, false);
        for (_, x) in day.numeric_series(vital) {
            count += 1;
            let delta = x - mean;
            mean += delta / count as f64;
            m2 += delta * (x - mean);
            min = min.min(x);
            max = max.max(x);
            match bounds.classify(x) {
                Some(Direction::High) => any_high = true,
                Some(Direction::Low) => any_low = true,
                None => {}
            }
        }
        if count == 0 {
            continue;
        }
        let mean_class = bounds.classify(mean);
        vitals.insert(
            vital,
            VitalStats {
                count,
                // running mean can drift a hair outside [min, max]
                mean: mean.clamp(min, max),
                min,
                max,
                std: (m2 / count as f64).max(0.0).sqrt(),
                indicator: Indicator::from_flags(any_high, any_low),
                mean_indicator: Indicator::from_flags(
                    mean_class == Some(Direction::High),
                    mean_class == Some(Direction::Low),
                ),
            },
        );
    }
    let observation_counts = Modality::ALL
        .iter()
        .map(|&m| (m, day.observations_of(m).count()))
        .collect();
    StatSummary {
        patient_id: day.patient_id.clone(),
        date: day.date,
        vitals,
        observation_counts,
    }
}

fn heading(modality: Modality) -> String {
    match modality {
        m if m.is_vital() => format!("{} ({})", m.display_name(), m.unit()),
        m => m.display_name().to_string(),
    }
}

/// Direct textual serialization: one heading per modality in canonical order,
/// followed by `HH:MM value` lines or the missing-data sentinel.
pub fn serialize_raw(day: &PatientDay) -> String {
    let mut out = String::new();
    for modality in Modality::ALL {
        let _ = writeln!(out, "{}:", heading(modality));
        let mut any = false;
        for obs in day.observations_of(modality) {
            any = true;
            let value = match obs.value.as_f64() {
                Some(v) => format_reading(modality, v),
                None => obs.value.to_string(),
            };
            let _ = writeln!(out, "{} {}", obs.timestamp.format("%H:%M"), value);
        }
        if !any {
            let _ = writeln!(out, "{MISSING_DATA_SENTINEL}");
        }
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatTextOptions {
    /// Include the discrete abnormality indicators.
    pub indicators: bool,
}

impl Default for StatTextOptions {
    fn default() -> Self {
        Self { indicators: true }
    }
}

/// The statistical summary vector as prompt text.
pub fn stat_text(summary: &StatSummary, opts: StatTextOptions) -> String {
    let mut out = String::new();
    for modality in Modality::ALL {
        let _ = write!(out, "{}: ", heading(modality));
        match summary.vitals.get(&modality) {
            Some(s) => {
                let _ = write!(
                    out,
                    "mean {}, min {}, max {}, std {}, readings {}",
                    format_statistic(modality, s.mean),
                    format_reading(modality, s.min),
                    format_reading(modality, s.max),
                    format_statistic(modality, s.std),
                    s.count
                );
                if opts.indicators {
                    let _ = write!(
                        out,
                        ", status {}, mean status {}",
                        s.indicator.label(),
                        s.mean_indicator.label()
                    );
                }
                out.push('\n');
            }
            None if summary.is_available(modality) => {
                let n = summary.observation_counts[&modality];
                let _ = writeln!(out, "{n} observations recorded");
            }
            None => {
                let _ = writeln!(out, "{MISSING_DATA_SENTINEL}");
            }
        }
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ZeroShot,
    StatBased,
}

impl PromptKind {
    pub fn name(self) -> &'static str {
        match self {
            PromptKind::ZeroShot => "zero_shot",
            PromptKind::StatBased => "stat_based",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("the statistical prompt requires a stat summary")]
    MissingStatSummary,
    #[error("{0} is not a vital sign; vision prompts are per vital")]
    NonVitalModality(Modality),
}

pub fn render_prompt(
    kind: PromptKind,
    day: &PatientDay,
    summary: Option<&StatSummary>,
    cfg: &ThresholdConfig,
) -> Result<String, PromptError> {
    render_prompt_with(kind, day, summary, cfg, StatTextOptions::default())
}

pub fn render_prompt_with(
    kind: PromptKind,
    day: &PatientDay,
    summary: Option<&StatSummary>,
    cfg: &ThresholdConfig,
    opts: StatTextOptions,
) -> Result<String, PromptError> {
    let date = day.date.format("%Y-%m-%d").to_string();
    let prompt = match kind {
        PromptKind::ZeroShot => templates::ZERO_SHOT
            .replace("{target_date}", &date)
            .replace("{structured_patient_text}", &serialize_raw(day)),
        PromptKind::StatBased => {
            let summary = summary.ok_or(PromptError::MissingStatSummary)?;
            templates::STATISTICAL
                .replace("{target_date}", &date)
                .replace("{reference_ranges}", &templates::reference_ranges(cfg, "   "))
                .replace("{structured_patient_text}", &stat_text(summary, opts))
        }
    };
    Ok(prompt)
}
