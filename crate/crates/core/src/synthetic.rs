//! Synthetic patient-days with planted episodes and known-answer summaries.
//!
//! Each vital gets a flat in-range baseline with small jitter and at most one
//! planted step episode per day, placed at least `margin` units beyond the
//! bound. Facts are derived from the plant parameters, not by running the
//! extractor, and the expected report is tallied from the corruption
//! bookkeeping rather than by running the evaluator.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{Averaging, CorpusReport, DayRow, PipelineReport, Tally};
use crate::facts::{ClinicalFact, FactSet, FactType, Interval};
use crate::ingest::{Pipeline, Summary};
use crate::model::{validate_patient_day, Direction, Modality, Observation, PatientDay, ThresholdConfig, Value};

const MINUTES_PER_DAY: u32 = 1440;
/// Longest episode the misstated-time window placement can accommodate.
pub const MAX_EPISODE_MINUTES: u32 = 360;
const ACTIVITY_LOCATIONS: [&str; 5] = ["kitchen", "lounge", "bedroom", "bathroom", "hallway"];
const SLEEP_LABELS: [&str; 4] = ["light", "deep", "rem", "awake"];

#[derive(Debug, Error, PartialEq)]
#[error("invalid scenario: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionPlan {
    pub omit: f64,
    pub misstate_value: f64,
    pub misstate_time: f64,
    pub hallucinate: f64,
    pub deny: f64,
}

impl CorruptionPlan {
    fn fractions(&self) -> [(&'static str, f64); 5] {
        [
            ("omit", self.omit),
            ("misstate_value", self.misstate_value),
            ("misstate_time", self.misstate_time),
            ("hallucinate", self.hallucinate),
            ("deny", self.deny),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeLength {
    pub min_minutes: u32,
    pub max_minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_days: usize,
    pub n_patients: usize,
    pub start_date: NaiveDate,
    /// Chance that a present vital carries an episode, per vital.
    pub abnormality_probability: BTreeMap<Modality, f64>,
    pub episode_minutes: EpisodeLength,
    pub cadence_minutes: u32,
    pub missing_modality_probability: f64,
    /// Minimum distance of planted values beyond the violated bound.
    pub margin: f64,
    pub corruption: CorruptionPlan,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_days: 20,
            n_patients: 4,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            abnormality_probability: Modality::VITALS.iter().map(|&v| (v, 0.4)).collect(),
            episode_minutes: EpisodeLength { min_minutes: 10, max_minutes: 120 },
            cadence_minutes: 10,
            missing_modality_probability: 0.1,
            margin: 5.0,
            corruption: CorruptionPlan::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), InvalidSpec> {
        let fail = |msg: String| Err(InvalidSpec(msg));
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_days == 0 {
            return fail("n_days must be at least 1".into());
        }
        if self.n_patients == 0 {
            return fail("n_patients must be at least 1".into());
        }
        for (m, p) in &self.abnormality_probability {
            if !m.is_vital() {
                return fail(format!("abnormality_probability given for non-vital `{m}`"));
            }
            if !prob_ok(*p) {
                return fail(format!("abnormality_probability for {m} is {p}, outside [0, 1]"));
            }
        }
        if !prob_ok(self.missing_modality_probability) {
            return fail(format!("missing_modality_probability {} outside [0, 1]", self.missing_modality_probability));
        }
        let mut sum = 0.0;
        for (name, f) in self.corruption.fractions() {
            if !prob_ok(f) {
                return fail(format!("corruption fraction {name} = {f} outside [0, 1]"));
            }
            sum += f;
        }
        if sum > 1.0 + 1e-9 {
            return fail(format!("corruption fractions sum to {sum}, more than 1"));
        }
        if self.cadence_minutes == 0 || self.cadence_minutes >= MINUTES_PER_DAY {
            return fail(format!("cadence_minutes {} must be in 1..1440", self.cadence_minutes));
        }
        let EpisodeLength { min_minutes, max_minutes } = self.episode_minutes;
        if min_minutes > max_minutes {
            return fail(format!("episode length min {min_minutes} exceeds max {max_minutes}"));
        }
        if max_minutes > MAX_EPISODE_MINUTES {
            return fail(format!("episode length max {max_minutes} exceeds {MAX_EPISODE_MINUTES}"));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return fail(format!("margin {} must be positive", self.margin));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    Omit,
    MisstateValue,
    MisstateTime,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEpisode {
    pub patient_id: String,
    pub date: NaiveDate,
    pub vital: Modality,
    pub direction: Direction,
    pub level: f64,
    pub interval: Interval,
    pub readings: usize,
    pub has_duration_fact: bool,
    pub corruption: Option<Corruption>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub days: Vec<PatientDay>,
    pub fact_sets: Vec<FactSet>,
    pub summaries: Vec<Summary>,
    pub episodes: Vec<PlantedEpisode>,
    pub expected: CorpusReport,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn at(date: NaiveDate, minute: u32) -> NaiveDateTime {
    date.and_time(NaiveTime::MIN) + Duration::minutes(i64::from(minute))
}

fn hhmm(t: NaiveTime) -> String {
    t.format("%H:%M").to_string()
}

/// Value text for templates: `X.X` when exact, otherwise the shortest
/// round-tripping form.
pub fn template_value(v: f64) -> String {
    let s = format!("{v:.1}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v}")
    }
}

pub fn abnormality_sentence(vital: Modality, direction: Direction, value: f64) -> String {
    let word = match direction {
        Direction::High => "High",
        Direction::Low => "Low",
    };
    format!("{} was Abnormally {word} (value: {}).", vital.display_name(), template_value(value))
}

pub fn duration_sentence(vital: Modality, direction: Direction, minutes: i64, start: NaiveTime, end: NaiveTime) -> String {
    format!(
        "{} was abnormally {} for {minutes} minutes from {} to {}.",
        vital.display_name(),
        direction.label(),
        hhmm(start),
        hhmm(end)
    )
}

pub fn normal_sentence(vital: Modality) -> String {
    format!("{} was within normal range.", vital.display_name())
}

/// Names the modality without any indicator term.
pub fn acknowledgment_sentence(modality: Modality) -> String {
    match modality {
        Modality::Activity => "Activity was logged across the day.".to_string(),
        Modality::Sleep => "Sleep Patterns were logged overnight.".to_string(),
        vital => format!("{} readings were recorded throughout the day.", vital.display_name()),
    }
}

pub fn missing_sentence(modality: Modality) -> String {
    format!("No data available for {}.", modality.display_name())
}

/// A summary that states every fact in template form and names every
/// modality, without any other claim.
pub fn template_summary(facts: &FactSet) -> String {
    let mut lines = Vec::new();
    for modality in Modality::ALL {
        let own: Vec<&ClinicalFact> = facts.facts.iter().filter(|f| f.vital == modality).collect();
        if !facts.available_modalities.contains(&modality) {
            lines.push(missing_sentence(modality));
        } else if !modality.is_vital() {
            lines.push(acknowledgment_sentence(modality));
        } else if own.is_empty() {
            lines.push(normal_sentence(modality));
        }
        for f in own {
            lines.push(match f.fact_type {
                FactType::Abnormality => abnormality_sentence(f.vital, f.direction, f.value),
                FactType::Duration => {
                    duration_sentence(f.vital, f.direction, f.interval.minutes(), f.interval.start.time(), f.interval.end.time())
                }
            });
        }
    }
    bullet(&lines)
}

fn bullet(lines: &[String]) -> String {
    lines.iter().map(|l| format!("- {l}\n")).collect()
}

struct DayPlan {
    day: PatientDay,
    facts: FactSet,
    /// Index into the corpus episode list, per vital.
    episodes: BTreeMap<Modality, usize>,
}

fn plan_day(spec: &ScenarioSpec, cfg: &ThresholdConfig, index: usize, rng: &mut ChaCha8Rng, episodes: &mut Vec<PlantedEpisode>) -> DayPlan {
    let patient_id = format!("synth-{:03}", index % spec.n_patients + 1);
    let date = spec.start_date + Duration::days((index / spec.n_patients) as i64);
    let cadence = spec.cadence_minutes;
    let grid = MINUTES_PER_DAY.div_ceil(cadence);

    let mut present: BTreeSet<Modality> =
        Modality::ALL.into_iter().filter(|_| rng.random::<f64>() >= spec.missing_modality_probability).collect();
    if present.is_empty() {
        present.insert(Modality::HeartRate);
    }

    let mut observations = Vec::new();
    let mut facts = Vec::new();
    let mut day_episodes = BTreeMap::new();
    for vital in Modality::VITALS {
        if !present.contains(&vital) {
            continue;
        }
        let bounds = cfg.bounds(vital).expect("vital has bounds");
        let mid = (bounds.lower + bounds.upper) / 2.0;
        let half = (bounds.upper - bounds.lower) / 2.0;
        let p = spec.abnormality_probability.get(&vital).copied().unwrap_or(0.0);

        let plant = (rng.random::<f64>() < p).then(|| {
            let direction = if rng.random::<bool>() { Direction::High } else { Direction::Low };
            let length = rng.random_range(spec.episode_minutes.min_minutes..=spec.episode_minutes.max_minutes);
            let steps = length / cadence;
            let k0 = rng.random_range(0..grid - steps);
            let extra = if vital == Modality::BodyTemperature {
                f64::from(rng.random_range(0..=10u32)) / 10.0
            } else {
                f64::from(rng.random_range(0..=10u32))
            };
            let level = round1(match direction {
                Direction::High => bounds.upper + spec.margin + extra,
                Direction::Low => bounds.lower - spec.margin - extra,
            });
            (direction, k0, steps, level)
        });

        for k in 0..grid {
            let value = match plant {
                Some((_, k0, steps, level)) if (k0..=k0 + steps).contains(&k) => level,
                _ => round1(mid + half * 0.4 * (rng.random::<f64>() * 2.0 - 1.0)),
            };
            observations.push(Observation::numeric(at(date, k * cadence), vital, value));
        }

        if let Some((direction, k0, steps, level)) = plant {
            let interval = Interval::new(at(date, k0 * cadence), at(date, (k0 + steps) * cadence));
            let readings = steps as usize + 1;
            facts.push(ClinicalFact { vital, fact_type: FactType::Abnormality, direction, value: level, interval, source_count: readings });
            let has_duration_fact = interval.minutes() >= i64::from(cfg.persistence_minutes)
                && (steps == 0 || cadence <= cfg.max_gap_minutes);
            if has_duration_fact {
                facts.push(ClinicalFact {
                    vital,
                    fact_type: FactType::Duration,
                    direction,
                    value: interval.minutes() as f64,
                    interval,
                    source_count: readings,
                });
            }
            day_episodes.insert(vital, episodes.len());
            episodes.push(PlantedEpisode {
                patient_id: patient_id.clone(),
                date,
                vital,
                direction,
                level,
                interval,
                readings,
                has_duration_fact,
                corruption: None,
            });
        }
    }
    if present.contains(&Modality::Activity) {
        for hour in 7..=21u32 {
            let label = ACTIVITY_LOCATIONS[rng.random_range(0..ACTIVITY_LOCATIONS.len())];
            observations.push(Observation::new(at(date, hour * 60), Modality::Activity, Value::Label(label.into())));
        }
    }
    if present.contains(&Modality::Sleep) {
        for slot in 0..14u32 {
            let label = SLEEP_LABELS[rng.random_range(0..SLEEP_LABELS.len())];
            observations.push(Observation::new(at(date, slot * 30), Modality::Sleep, Value::Label(label.into())));
        }
    }

    let day = validate_patient_day(PatientDay::new(patient_id.clone(), date, observations)).expect("generated day is valid");
    let facts = FactSet { patient_id, date, facts, available_modalities: present };
    DayPlan { day, facts, episodes: day_episodes }
}

fn take(n: f64, of: usize) -> usize {
    ((n * of as f64).round() as usize).min(of)
}

/// Clock window of the same length that does not overlap `interval`.
fn displaced_window(interval: &Interval) -> (NaiveTime, NaiveTime) {
    let len = interval.minutes();
    let start = interval.start.time();
    let end = interval.end.time();
    let gap = Duration::minutes(30);
    let start_min = (interval.start - interval.start.date().and_time(NaiveTime::MIN)).num_minutes();
    if start_min >= len + 30 {
        (start - gap - Duration::minutes(len), start - gap)
    } else {
        (end + gap, end + gap + Duration::minutes(len))
    }
}

pub fn generate_corpus(spec: &ScenarioSpec, cfg: &ThresholdConfig) -> Result<SyntheticCorpus, InvalidSpec> {
    spec.validate()?;
    cfg.validate().map_err(|e| InvalidSpec(format!("threshold config: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut episodes = Vec::new();
    let plans: Vec<DayPlan> = (0..spec.n_days).map(|i| plan_day(spec, cfg, i, &mut rng, &mut episodes)).collect();

    // Corruptions are assigned per episode with exact counts. Timing errors
    // need a duration sentence, so they are drawn from duration episodes first.
    let plan = spec.corruption;
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    order.shuffle(&mut rng);
    let with_duration: Vec<usize> = order.iter().copied().filter(|&i| episodes[i].has_duration_fact).collect();
    for &i in with_duration.iter().take(take(plan.misstate_time, with_duration.len())) {
        episodes[i].corruption = Some(Corruption::MisstateTime);
    }
    let free: Vec<usize> = order.iter().copied().filter(|&i| episodes[i].corruption.is_none()).collect();
    let mut free = free.into_iter();
    for (kind, frac) in [
        (Corruption::Omit, plan.omit),
        (Corruption::Deny, plan.deny),
        (Corruption::MisstateValue, plan.misstate_value),
    ] {
        for i in free.by_ref().take(take(frac, episodes.len())) {
            episodes[i].corruption = Some(kind);
        }
    }
    let mut day_order: Vec<usize> = (0..plans.len()).collect();
    day_order.shuffle(&mut rng);
    let hallucinated_days: BTreeSet<usize> = day_order.into_iter().take(take(plan.hallucinate, plans.len())).collect();

    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for (d, p) in plans.iter().enumerate() {
        let mut lines = Vec::new();
        let mut row = DayRow {
            patient_id: p.facts.patient_id.clone(),
            date: p.facts.date,
            pipeline: Pipeline::External,
            abnormality: Tally::default(),
            duration: Tally::default(),
            coverage: Tally { matched: p.facts.available_modalities.len(), total: p.facts.available_modalities.len() },
            hallucinations: 0,
            misclassifications: 0,
            mischaracterizations: 0,
        };
        let mut abnormal_claims = 0;
        for modality in Modality::ALL {
            if !p.facts.available_modalities.contains(&modality) {
                lines.push(missing_sentence(modality));
                continue;
            }
            if !modality.is_vital() {
                lines.push(acknowledgment_sentence(modality));
                continue;
            }
            let Some(&e) = p.episodes.get(&modality) else {
                lines.push(normal_sentence(modality));
                continue;
            };
            let ep = &episodes[e];
            let stated = !matches!(ep.corruption, Some(Corruption::Omit | Corruption::Deny));
            row.abnormality.total += 1;
            row.abnormality.matched += usize::from(stated);
            if ep.has_duration_fact {
                row.duration.total += 1;
                row.duration.matched += usize::from(stated);
            }
            match ep.corruption {
                Some(Corruption::Omit) => lines.push(acknowledgment_sentence(modality)),
                Some(Corruption::Deny) => {
                    lines.push(normal_sentence(modality));
                    row.misclassifications += 1;
                }
                _ => {
                    let shift = match (ep.corruption, ep.direction) {
                        (Some(Corruption::MisstateValue), Direction::High) => 20.0,
                        (Some(Corruption::MisstateValue), Direction::Low) => -20.0,
                        _ => 0.0,
                    };
                    lines.push(abnormality_sentence(modality, ep.direction, round1(ep.level + shift)));
                    abnormal_claims += 1;
                    if ep.has_duration_fact {
                        let (s, t) = if ep.corruption == Some(Corruption::MisstateTime) {
                            displaced_window(&ep.interval)
                        } else {
                            (ep.interval.start.time(), ep.interval.end.time())
                        };
                        lines.push(duration_sentence(modality, ep.direction, ep.interval.minutes(), s, t));
                        abnormal_claims += 1;
                    }
                    if matches!(ep.corruption, Some(Corruption::MisstateValue | Corruption::MisstateTime)) {
                        row.mischaracterizations += 1;
                    }
                }
            }
        }
        if hallucinated_days.contains(&d) {
            let free: Vec<(Modality, Direction)> = Modality::VITALS
                .iter()
                .flat_map(|&v| [(v, Direction::High), (v, Direction::Low)])
                .filter(|&(v, dir)| !p.facts.facts.iter().any(|f| f.vital == v && f.direction == dir))
                .collect();
            let (vital, direction) = free[rng.random_range(0..free.len())];
            let bounds = cfg.bounds(vital).expect("vital has bounds");
            let value = match direction {
                Direction::High => bounds.upper + spec.margin,
                Direction::Low => bounds.lower - spec.margin,
            };
            lines.push(abnormality_sentence(vital, direction, round1(value)));
            row.hallucinations += 1;
            abnormal_claims += 1;
        }
        summaries.push(Summary {
            patient_id: p.facts.patient_id.clone(),
            date: p.facts.date,
            pipeline: Pipeline::External,
            text: bullet(&lines),
        });
        rows.push((row, abnormal_claims));
    }

    let expected = expected_report(&rows);
    // Emit days in (patient, date) order, the order ingest reads them back in.
    let mut order: Vec<usize> = (0..plans.len()).collect();
    order.sort_by(|&a, &b| (&plans[a].day.patient_id, plans[a].day.date).cmp(&(&plans[b].day.patient_id, plans[b].day.date)));
    let mut slots: Vec<Option<(DayPlan, Summary)>> = plans.into_iter().zip(summaries).map(Some).collect();
    let (pairs, summaries): (Vec<_>, Vec<_>) = order
        .into_iter()
        .map(|i| slots[i].take().expect("each day taken once"))
        .map(|(p, s)| ((p.day, p.facts), s))
        .unzip();
    let (days, fact_sets) = pairs.into_iter().unzip();
    episodes.sort_by(|a, b| (&a.patient_id, a.date, a.vital).cmp(&(&b.patient_id, b.date, b.vital)));
    Ok(SyntheticCorpus { days, fact_sets, summaries, episodes, expected })
}

/// Micro-averaged report straight from the per-day bookkeeping.
fn expected_report(rows: &[(DayRow, usize)]) -> CorpusReport {
    let pct = |m: usize, t: usize| (t > 0).then(|| 100.0 * (m as f64 / t as f64));
    let mut abn = Tally::default();
    let mut dur = Tally::default();
    let mut cov = Tally::default();
    let (mut hall, mut claims, mut miscl, mut mischar) = (0, 0, 0, 0);
    for (r, c) in rows {
        abn = Tally { matched: abn.matched + r.abnormality.matched, total: abn.total + r.abnormality.total };
        dur = Tally { matched: dur.matched + r.duration.matched, total: dur.total + r.duration.total };
        cov = Tally { matched: cov.matched + r.coverage.matched, total: cov.total + r.coverage.total };
        hall += r.hallucinations;
        claims += c;
        miscl += r.misclassifications;
        mischar += r.mischaracterizations;
    }
    let mut days: Vec<DayRow> = rows.iter().map(|(r, _)| r.clone()).collect();
    days.sort_by(|a, b| (&a.patient_id, a.date).cmp(&(&b.patient_id, b.date)));
    CorpusReport {
        averaging: Averaging::Micro,
        pipelines: vec![PipelineReport {
            pipeline: Pipeline::External,
            days: rows.len(),
            abnormality: abn,
            duration: dur,
            coverage: cov,
            abnormality_recall: pct(abn.matched, abn.total),
            duration_recall: pct(dur.matched, dur.total),
            coverage_percent: pct(cov.matched, cov.total),
            hallucinations: hall,
            abnormal_claims: claims,
            hallucination_rate: pct(hall, claims),
            misclassifications: miscl,
            mischaracterizations: mischar,
        }],
        days,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{aggregate, evaluate_day};
    use crate::facts::build_fact_set;
    use crate::lexicon::Lexicon;

    fn run(spec: &ScenarioSpec) -> (SyntheticCorpus, CorpusReport) {
        let cfg = ThresholdConfig::default();
        let corpus = generate_corpus(spec, &cfg).unwrap();
        let lex = Lexicon::default();
        let evals: Vec<_> = corpus
            .fact_sets
            .iter()
            .zip(&corpus.summaries)
            .map(|(f, s)| evaluate_day(f, s, &lex).unwrap())
            .collect();
        let report = aggregate(&evals, Averaging::Micro).unwrap();
        (corpus, report)
    }

    #[test]
    fn perfect_plan_scores_full_marks() {
        let spec = ScenarioSpec { seed: 7, n_days: 30, ..Default::default() };
        let (corpus, report) = run(&spec);
        let p = &corpus.expected.pipelines[0];
        assert_eq!(p.abnormality_recall, Some(100.0));
        assert_eq!(p.coverage_percent, Some(100.0));
        assert_eq!(p.hallucinations, 0);
        assert_eq!(report, corpus.expected);
    }

    #[test]
    fn omitting_sixty_percent_leaves_forty() {
        let spec = ScenarioSpec {
            seed: 3,
            n_days: 50,
            abnormality_probability: Modality::VITALS.iter().map(|&v| (v, 1.0)).collect(),
            missing_modality_probability: 0.0,
            corruption: CorruptionPlan { omit: 0.6, ..Default::default() },
            ..Default::default()
        };
        let (corpus, report) = run(&spec);
        // 200 episodes, 120 omitted.
        assert_eq!(corpus.expected.pipelines[0].abnormality, Tally { matched: 80, total: 200 });
        assert_eq!(report.pipelines[0].abnormality_recall, Some(40.0));
        assert_eq!(report, corpus.expected);
    }

    #[test]
    fn deny_on_one_episode_is_one_misclassification() {
        let spec = ScenarioSpec {
            seed: 11,
            n_days: 1,
            abnormality_probability: BTreeMap::from([(Modality::HeartRate, 1.0)]),
            missing_modality_probability: 0.0,
            corruption: CorruptionPlan { deny: 1.0, ..Default::default() },
            ..Default::default()
        };
        let (corpus, report) = run(&spec);
        assert_eq!(corpus.expected.pipelines[0].misclassifications, 1);
        assert_eq!(report, corpus.expected);
    }

    #[test]
    fn mixed_plan_matches_bookkeeping() {
        for seed in 0..40 {
            let spec = ScenarioSpec {
                seed,
                n_days: 15,
                cadence_minutes: 5,
                corruption: CorruptionPlan { omit: 0.2, misstate_value: 0.2, misstate_time: 0.2, hallucinate: 0.2, deny: 0.2 },
                ..Default::default()
            };
            let (corpus, report) = run(&spec);
            assert_eq!(report, corpus.expected, "seed {seed}");
        }
    }

    #[test]
    fn analytic_facts_match_extractor() {
        let cfg = ThresholdConfig::default();
        for seed in 0..50 {
            let spec = ScenarioSpec { seed, n_days: 8, ..Default::default() };
            let corpus = generate_corpus(&spec, &cfg).unwrap();
            for (day, expected) in corpus.days.iter().zip(&corpus.fact_sets) {
                assert_eq!(&build_fact_set(day, &cfg), expected, "seed {seed}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ThresholdConfig::default();
        let spec = ScenarioSpec { seed: 99, corruption: CorruptionPlan { hallucinate: 0.5, ..Default::default() }, ..Default::default() };
        let a = generate_corpus(&spec, &cfg).unwrap();
        let b = generate_corpus(&spec, &cfg).unwrap();
        assert_eq!(a.days, b.days);
        assert_eq!(a.summaries, b.summaries);
        assert_eq!(a.expected, b.expected);
    }

    #[test]
    fn invalid_specs_rejected() {
        let cfg = ThresholdConfig::default();
        let bad = [
            ScenarioSpec { n_days: 0, ..Default::default() },
            ScenarioSpec { missing_modality_probability: 1.5, ..Default::default() },
            ScenarioSpec { corruption: CorruptionPlan { omit: 0.7, deny: 0.7, ..Default::default() }, ..Default::default() },
            ScenarioSpec { episode_minutes: EpisodeLength { min_minutes: 50, max_minutes: 20 }, ..Default::default() },
            ScenarioSpec { abnormality_probability: BTreeMap::from([(Modality::Sleep, 0.5)]), ..Default::default() },
            ScenarioSpec { margin: 0.0, ..Default::default() },
        ];
        for spec in bad {
            assert!(generate_corpus(&spec, &cfg).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ScenarioSpec { seed: 5, ..Default::default() };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), spec);
        let partial: ScenarioSpec = serde_json::from_str(r#"{"seed": 3, "corruption": {"omit": 0.5}}"#).unwrap();
        assert_eq!(partial.corruption.omit, 0.5);
        assert!(serde_json::from_str::<ScenarioSpec>(r#"{"sed": 3}"#).is_err());
    }
}
