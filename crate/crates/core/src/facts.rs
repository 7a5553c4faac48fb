//! Rule-based ground-truth facts for a patient-day.
//!
//! An abnormality fact records that a vital went strictly outside its bounds
//! in one direction; its value is the most extreme offending reading. A
//! duration fact records a sustained episode: consecutive same-direction
//! out-of-range readings, no gap larger than `max_gap_minutes`, spanning at
//! least `persistence_minutes` of wall-clock time.

use std::collections::BTreeSet;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::model::{Direction, Modality, PatientDay, ThresholdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactType {
    Abnormality,
    Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl Interval {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn minutes(&self) -> i64 {
        (self.end - self.start).num_minutes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalFact {
    pub vital: Modality,
    pub fact_type: FactType,
    pub direction: Direction,
    /// Extreme reading for abnormality facts, episode minutes for duration facts.
    pub value: f64,
    pub interval: Interval,
    pub source_count: usize,
}

impl ClinicalFact {
    fn sort_key(&self) -> (Modality, FactType, NaiveDateTime, Direction) {
        (self.vital, self.fact_type, self.interval.start, self.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSet {
    pub patient_id: String,
    pub date: NaiveDate,
    pub facts: Vec<ClinicalFact>,
    pub available_modalities: BTreeSet<Modality>,
}

impl FactSet {
    pub fn count(&self, fact_type: FactType) -> usize {
        self.facts.iter().filter(|f| f.fact_type == fact_type).count()
    }
}

/// One abnormality fact per (vital, direction) with at least one reading
/// strictly outside bounds.
pub fn extract_abnormality_facts(day: &PatientDay, cfg: &ThresholdConfig) -> Vec<ClinicalFact> {
    let mut facts = Vec::new();
    for vital in Modality::VITALS {
        let bounds = cfg.bounds(vital).expect("vital has bounds");
        let series = day.numeric_series(vital);
        for direction in [Direction::High, Direction::Low] {
            let offending: Vec<_> = series
                .iter()
                .filter(|(_, v)| bounds.classify(*v) == Some(direction))
                .collect();
            let (Some(first), Some(last)) = (offending.first(), offending.last()) else {
                continue;
            };
            let extreme = offending.iter().map(|(_, v)| *v).fold(first.1, |acc, v| match direction {
                Direction::High => acc.max(v),
                Direction::Low => acc.min(v),
            });
            facts.push(ClinicalFact {
                vital,
                fact_type: FactType::Abnormality,
                direction,
                value: extreme,
                interval: Interval::new(first.0, last.0),
                source_count: offending.len(),
            });
        }
    }
    facts
}

/// One duration fact per maximal sustained episode.
pub fn extract_duration_facts(day: &PatientDay, cfg: &ThresholdConfig) -> Vec<ClinicalFact> {
    let mut facts = Vec::new();
    let max_gap = i64::from(cfg.max_gap_minutes);
    let persistence = i64::from(cfg.persistence_minutes);
    for vital in Modality::VITALS {
        let bounds = cfg.bounds(vital).expect("vital has bounds");
        let series = day.numeric_series(vital);

        let mut run: Option<(Direction, usize, usize)> = None;
        let close = |run: Option<(Direction, usize, usize)>, facts: &mut Vec<ClinicalFact>| {
            if let Some((direction, start, end)) = run {
                let interval = Interval::new(series[start].0, series[end].0);
                if interval.minutes() >= persistence {
                    facts.push(ClinicalFact {
                        vital,
                        fact_type: FactType::Duration,
                        direction,
                        value: interval.minutes() as f64,
                        interval,
                        source_count: end - start + 1,
                    });
                }
            }
        };

        for (i, (ts, v)) in series.iter().enumerate() {
            let class = bounds.classify(*v);
            run = match (run, class) {
                (Some((dir, start, end)), Some(c))
                    if c == dir && (*ts - series[end].0).num_minutes() <= max_gap =>
                {
                    Some((dir, start, i))
                }
                (prev, Some(c)) => {
                    close(prev, &mut facts);
                    Some((c, i, i))
                }
                (prev, None) => {
                    close(prev, &mut facts);
                    None
                }
            };
        }
        close(run, &mut facts);
    }
    facts
}

/// Abnormality and duration facts plus modality availability, ordered by
/// (vital, fact type, interval start).
pub fn build_fact_set(day: &PatientDay, cfg: &ThresholdConfig) -> FactSet {
    let mut facts = extract_abnormality_facts(day, cfg);
    facts.extend(extract_duration_facts(day, cfg));
    facts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    FactSet {
        patient_id: day.patient_id.clone(),
        date: day.date,
        facts,
        available_modalities: day.observed_modalities(),
    }
}
