//! Scoring summaries against fact sets.
//!
//! A fact is recalled when some claimed mention can be assigned to it. Each
//! mention serves at most one fact of a given type, so assignment is a
//! maximum bipartite matching; its size does not depend on sentence order
//! and never shrinks when a sentence is added. Mentions are visited in a
//! canonical order so that the chosen pairs are order independent as well.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facts::{ClinicalFact, FactSet, FactType, Interval};
use crate::ingest::{Pipeline, Summary};
use crate::lexicon::Lexicon;
use crate::mention::{extract_coverage_statements, extract_mentions, ClaimType, ClaimedInterval, ClaimedMention, Polarity};
use crate::model::Modality;

/// Largest |claimed − actual| that still counts as the right magnitude.
pub fn value_tolerance(fact: &ClinicalFact) -> f64 {
    match (fact.fact_type, fact.vital) {
        (FactType::Duration, _) => 5.0,
        (_, Modality::BodyTemperature) => 0.05,
        _ => 0.5,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("fact set is for {facts_patient}/{facts_date} but summary is for {summary_patient}/{summary_date}")]
    KeyMismatch {
        facts_patient: String,
        facts_date: NaiveDate,
        summary_patient: String,
        summary_date: NaiveDate,
    },
    #[error("no day evaluations to aggregate")]
    EmptyInput,
}

/// Whether `mention` is an abnormal claim that can stand for `fact`.
pub fn is_compatible(fact: &ClinicalFact, mention: &ClaimedMention) -> bool {
    claims_event(fact, mention) && (fact.fact_type != FactType::Duration || mention.claim_type == ClaimType::Duration)
}

/// Vital and direction agree, ignoring the duration requirement.
fn claims_event(fact: &ClinicalFact, mention: &ClaimedMention) -> bool {
    mention.claim_type != ClaimType::CoverageStatement
        && mention.vital.covers(fact.vital)
        && mention.polarity.agrees_with(fact.direction)
}

fn minute_of_day(t: NaiveTime) -> i64 {
    i64::from(t.hour() * 60 + t.minute())
}

/// Share of the fact's interval covered by the claimed window, by clock time.
pub fn overlap_fraction(fact: &Interval, claimed: &ClaimedInterval) -> f64 {
    let (fs, fe) = (minute_of_day(fact.start.time()), minute_of_day(fact.end.time()));
    let (cs, ce) = (minute_of_day(claimed.start), minute_of_day(claimed.end));
    if fe == fs {
        return if cs <= fs && fs <= ce { 1.0 } else { 0.0 };
    }
    let overlap = (fe.min(ce) - fs.max(cs)).max(0);
    overlap as f64 / (fe - fs) as f64
}

fn claimed_magnitude(fact: &ClinicalFact, mention: &ClaimedMention) -> Option<f64> {
    match fact.fact_type {
        FactType::Abnormality => mention.value,
        FactType::Duration => mention.duration_minutes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub fact: ClinicalFact,
    pub mention: Option<ClaimedMention>,
    pub value_error: Option<f64>,
    pub interval_overlap: Option<f64>,
}

impl MatchResult {
    fn new(fact: &ClinicalFact, mention: Option<&ClaimedMention>) -> Self {
        Self {
            fact: fact.clone(),
            value_error: mention.and_then(|m| claimed_magnitude(fact, m)).map(|v| (v - fact.value).abs()),
            interval_overlap: mention.and_then(|m| m.interval).map(|iv| overlap_fraction(&fact.interval, &iv)),
            mention: mention.cloned(),
        }
    }

    pub fn is_match(&self) -> bool {
        self.mention.is_some()
    }
}

/// Preference among compatible mentions, best first.
fn rank(fact: &ClinicalFact, a: &ClaimedMention, b: &ClaimedMention) -> Ordering {
    let exact_dir = |m: &ClaimedMention| m.polarity != Polarity::AbnormalUnspecified;
    let same_type = |m: &ClaimedMention| {
        matches!(
            (fact.fact_type, m.claim_type),
            (FactType::Abnormality, ClaimType::Point) | (FactType::Duration, ClaimType::Duration)
        )
    };
    let err = |m: &ClaimedMention| claimed_magnitude(fact, m).map_or(f64::INFINITY, |v| (v - fact.value).abs());
    let overlap = |m: &ClaimedMention| m.interval.map_or(-1.0, |iv| overlap_fraction(&fact.interval, &iv));
    b.specificity()
        .cmp(&a.specificity())
        .then(exact_dir(b).cmp(&exact_dir(a)))
        .then(same_type(b).cmp(&same_type(a)))
        .then(err(a).total_cmp(&err(b)))
        .then(overlap(b).total_cmp(&overlap(a)))
        .then_with(|| canonical_order(a, b))
}

/// Order on mentions that ignores where in the text they occurred.
fn canonical_order(a: &ClaimedMention, b: &ClaimedMention) -> Ordering {
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    };
    (a.vital, a.polarity, a.claim_type)
        .cmp(&(b.vital, b.polarity, b.claim_type))
        .then(opt(a.value, b.value))
        .then(opt(a.duration_minutes, b.duration_minutes))
        .then(a.interval.cmp(&b.interval))
        .then(a.surface.cmp(&b.surface))
}

/// Best compatible mention for a single fact, ignoring competition from
/// other facts.
pub fn match_fact(fact: &ClinicalFact, mentions: &[ClaimedMention]) -> MatchResult {
    let best = mentions.iter().filter(|m| is_compatible(fact, m)).min_by(|a, b| rank(fact, a, b));
    MatchResult::new(fact, best)
}

/// Maximum matching between `facts` and `mentions`; returns the mention
/// index assigned to each fact.
fn assign(facts: &[&ClinicalFact], mentions: &[ClaimedMention]) -> Vec<Option<usize>> {
    let candidates: Vec<Vec<usize>> = facts
        .iter()
        .map(|f| {
            let mut c: Vec<usize> = (0..mentions.len()).filter(|&j| is_compatible(f, &mentions[j])).collect();
            c.sort_by(|&x, &y| rank(f, &mentions[x], &mentions[y]));
            c
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; mentions.len()];

    fn augment(f: usize, cands: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &m in &cands[f] {
            if seen[m] {
                continue;
            }
            seen[m] = true;
            if owner[m].is_none_or(|g| augment(g, cands, owner, seen)) {
                owner[m] = Some(f);
                return true;
            }
        }
        false
    }

    for f in 0..facts.len() {
        let mut seen = vec![false; mentions.len()];
        augment(f, &candidates, &mut owner, &mut seen);
    }
    let mut out = vec![None; facts.len()];
    for (m, f) in owner.iter().enumerate() {
        if let Some(f) = f {
            out[*f] = Some(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub matched: usize,
    pub total: usize,
}

impl Tally {
    pub fn fraction(self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }

    fn add(self, other: Tally) -> Tally {
        Tally { matched: self.matched + other.matched, total: self.total + other.total }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassification {
    pub fact: ClinicalFact,
    pub mention: ClaimedMention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mischaracterization {
    Magnitude,
    Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MischaracterizedFact {
    pub fact: ClinicalFact,
    pub kinds: Vec<Mischaracterization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueError {
    pub fact: ClinicalFact,
    pub claimed: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalError {
    pub fact: ClinicalFact,
    pub claimed: ClaimedInterval,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEvaluation {
    pub patient_id: String,
    pub date: NaiveDate,
    pub pipeline: Pipeline,
    pub matched: Vec<MatchResult>,
    pub missed: Vec<ClinicalFact>,
    pub hallucinated: Vec<ClaimedMention>,
    pub misclassified: Vec<Misclassification>,
    pub mischaracterized: Vec<MischaracterizedFact>,
    pub value_errors: Vec<ValueError>,
    pub interval_errors: Vec<IntervalError>,
    pub abnormality: Tally,
    pub duration: Tally,
    pub coverage: Tally,
    /// Abnormal claims about a named vital; the hallucination-rate denominator.
    pub abnormal_claims: usize,
    pub acknowledged: BTreeSet<Modality>,
    pub abnormality_recall: Option<f64>,
    pub duration_recall: Option<f64>,
    pub coverage_fraction: Option<f64>,
}

pub fn evaluate_day(facts: &FactSet, summary: &Summary, lex: &Lexicon) -> Result<DayEvaluation, EvalError> {
    if facts.patient_id != summary.patient_id || facts.date != summary.date {
        return Err(EvalError::KeyMismatch {
            facts_patient: facts.patient_id.clone(),
            facts_date: facts.date,
            summary_patient: summary.patient_id.clone(),
            summary_date: summary.date,
        });
    }
    let mentions = extract_mentions(&summary.text, lex);
    let acknowledged = extract_coverage_statements(&summary.text, lex);
    Ok(evaluate_mentions(facts, summary.pipeline, mentions, acknowledged))
}

/// Scores pre-extracted mentions; `evaluate_day` without the text layer.
pub fn evaluate_mentions(
    facts: &FactSet,
    pipeline: Pipeline,
    mut mentions: Vec<ClaimedMention>,
    acknowledged: BTreeSet<Modality>,
) -> DayEvaluation {
    mentions.sort_by(|a, b| canonical_order(a, b).then(a.sentence_index.cmp(&b.sentence_index)));

    let mut matched = Vec::new();
    let mut missed = Vec::new();
    let mut tallies = BTreeMap::new();
    for fact_type in [FactType::Abnormality, FactType::Duration] {
        let of_type: Vec<&ClinicalFact> = facts.facts.iter().filter(|f| f.fact_type == fact_type).collect();
        let assignment = assign(&of_type, &mentions);
        let mut tally = Tally { matched: 0, total: of_type.len() };
        for (fact, slot) in of_type.iter().zip(assignment) {
            match slot {
                Some(j) => {
                    tally.matched += 1;
                    matched.push(MatchResult::new(fact, Some(&mentions[j])));
                }
                None => missed.push((*fact).clone()),
            }
        }
        tallies.insert(fact_type, tally);
    }

    let hallucinated: Vec<ClaimedMention> = mentions
        .iter()
        .filter(|m| m.is_abnormal_claim() && !facts.facts.iter().any(|f| claims_event(f, m)))
        .cloned()
        .collect();

    let misclassified = missed
        .iter()
        .filter(|f| f.fact_type == FactType::Abnormality)
        .filter_map(|f| {
            mentions
                .iter()
                .find(|m| m.polarity == Polarity::Normal && m.claim_type != ClaimType::CoverageStatement && m.vital.covers(f.vital))
                .map(|m| Misclassification { fact: f.clone(), mention: m.clone() })
        })
        .collect();

    let mut value_errors = Vec::new();
    let mut interval_errors = Vec::new();
    let mut mischaracterized = Vec::new();
    for r in &matched {
        let mention = r.mention.as_ref().expect("matched result has a mention");
        let mut kinds = Vec::new();
        if let (Some(err), Some(claimed)) = (r.value_error, claimed_magnitude(&r.fact, mention)) {
            value_errors.push(ValueError { fact: r.fact.clone(), claimed, abs_error: err });
            if err > value_tolerance(&r.fact) {
                kinds.push(Mischaracterization::Magnitude);
            }
        }
        if let (Some(overlap), Some(claimed)) = (r.interval_overlap, mention.interval) {
            interval_errors.push(IntervalError { fact: r.fact.clone(), claimed, overlap });
            if overlap == 0.0 {
                kinds.push(Mischaracterization::Timing);
            }
        }
        if !kinds.is_empty() {
            mischaracterized.push(MischaracterizedFact { fact: r.fact.clone(), kinds });
        }
    }

    let coverage = Tally {
        matched: facts.available_modalities.intersection(&acknowledged).count(),
        total: facts.available_modalities.len(),
    };
    let abnormality = tallies[&FactType::Abnormality];
    let duration = tallies[&FactType::Duration];
    DayEvaluation {
        patient_id: facts.patient_id.clone(),
        date: facts.date,
        pipeline,
        matched,
        missed,
        abnormal_claims: mentions.iter().filter(|m| m.is_abnormal_claim()).count(),
        hallucinated,
        misclassified,
        mischaracterized,
        value_errors,
        interval_errors,
        abnormality,
        duration,
        coverage,
        acknowledged,
        abnormality_recall: abnormality.fraction(),
        duration_recall: duration.fraction(),
        coverage_fraction: coverage.fraction(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Micro,
    Macro,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            other => Err(format!("unknown averaging `{other}` (expected micro or macro)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub pipeline: Pipeline,
    pub days: usize,
    pub abnormality: Tally,
    pub duration: Tally,
    pub coverage: Tally,
    /// Percentages; `None` when no day has a defined value.
    pub abnormality_recall: Option<f64>,
    pub duration_recall: Option<f64>,
    pub coverage_percent: Option<f64>,
    pub hallucinations: usize,
    pub abnormal_claims: usize,
    pub hallucination_rate: Option<f64>,
    pub misclassifications: usize,
    pub mischaracterizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub patient_id: String,
    pub date: NaiveDate,
    pub pipeline: Pipeline,
    pub abnormality: Tally,
    pub duration: Tally,
    pub coverage: Tally,
    pub hallucinations: usize,
    pub misclassifications: usize,
    pub mischaracterizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub averaging: Averaging,
    pub pipelines: Vec<PipelineReport>,
    pub days: Vec<DayRow>,
}

fn percent(x: Option<f64>) -> Option<f64> {
    x.map(|v| 100.0 * v)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn aggregate(evals: &[DayEvaluation], averaging: Averaging) -> Result<CorpusReport, EvalError> {
    if evals.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut by_pipeline: BTreeMap<Pipeline, Vec<&DayEvaluation>> = BTreeMap::new();
    for e in evals {
        by_pipeline.entry(e.pipeline).or_default().push(e);
    }
    let pipelines = by_pipeline
        .into_iter()
        .map(|(pipeline, days)| {
            let sum = |f: fn(&DayEvaluation) -> Tally| days.iter().map(|d| f(d)).fold(Tally::default(), Tally::add);
            let abnormality = sum(|d| d.abnormality);
            let duration = sum(|d| d.duration);
            let coverage = sum(|d| d.coverage);
            let (abnormality_recall, duration_recall, coverage_percent) = match averaging {
                Averaging::Micro => (abnormality.fraction(), duration.fraction(), coverage.fraction()),
                Averaging::Macro => (
                    mean(days.iter().map(|d| d.abnormality.fraction())),
                    mean(days.iter().map(|d| d.duration.fraction())),
                    mean(days.iter().map(|d| d.coverage.fraction())),
                ),
            };
            let hallucinations = days.iter().map(|d| d.hallucinated.len()).sum();
            let abnormal_claims = days.iter().map(|d| d.abnormal_claims).sum();
            PipelineReport {
                pipeline,
                days: days.len(),
                abnormality,
                duration,
                coverage,
                abnormality_recall: percent(abnormality_recall),
                duration_recall: percent(duration_recall),
                coverage_percent: percent(coverage_percent),
                hallucinations,
                abnormal_claims,
                hallucination_rate: percent(Tally { matched: hallucinations, total: abnormal_claims }.fraction()),
                misclassifications: days.iter().map(|d| d.misclassified.len()).sum(),
                mischaracterizations: days.iter().map(|d| d.mischaracterized.len()).sum(),
            }
        })
        .collect();
    let mut days: Vec<DayRow> = evals
        .iter()
        .map(|e| DayRow {
            patient_id: e.patient_id.clone(),
            date: e.date,
            pipeline: e.pipeline,
            abnormality: e.abnormality,
            duration: e.duration,
            coverage: e.coverage,
            hallucinations: e.hallucinated.len(),
            misclassifications: e.misclassified.len(),
            mischaracterizations: e.mischaracterized.len(),
        })
        .collect();
    days.sort_by(|a, b| (a.pipeline, &a.patient_id, a.date).cmp(&(b.pipeline, &b.patient_id, b.date)));
    Ok(CorpusReport { averaging, pipelines, days })
}

fn pct_cell(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}

/// Fixed-width table with one row per pipeline.
pub fn render_table(report: &CorpusReport) -> String {
    let header = ["Pipeline", "Days", "Abnormality", "Duration", "Coverage", "Hallucinations", "Misclassifications"];
    let rows: Vec<[String; 7]> = report
        .pipelines
        .iter()
        .map(|p| {
            [
                p.pipeline.to_string(),
                p.days.to_string(),
                pct_cell(p.abnormality_recall),
                pct_cell(p.duration_recall),
                pct_cell(p.coverage_percent),
                p.hallucinations.to_string(),
                p.misclassifications.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[i]);
            } else {
                let _ = write!(s, "  {c:>w$}", w = widths[i]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
    let _ = writeln!(out, "({} averaging; percentages)", match report.averaging {
        Averaging::Micro => "micro",
        Averaging::Macro => "macro",
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mention::ClaimedVital;
    use crate::model::Direction;

    fn t(h: u32, m: u32) -> chrono::NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 6, 11).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    fn fact(vital: Modality, fact_type: FactType, direction: Direction, value: f64) -> ClinicalFact {
        ClinicalFact { vital, fact_type, direction, value, interval: Interval::new(t(14, 36), t(17, 55)), source_count: 7 }
    }

    fn fact_set(facts: Vec<ClinicalFact>, modalities: &[Modality]) -> FactSet {
        FactSet {
            patient_id: "p1".into(),
            date: NaiveDate::from_ymd_opt(2019, 6, 11).unwrap(),
            facts,
            available_modalities: modalities.iter().copied().collect(),
        }
    }

    fn summary(text: &str) -> Summary {
        Summary {
            patient_id: "p1".into(),
            date: NaiveDate::from_ymd_opt(2019, 6, 11).unwrap(),
            pipeline: Pipeline::StatBased,
            text: text.into(),
        }
    }

    #[test]
    fn normal_bp_claim_misses_and_misclassifies() {
        let fs = fact_set(vec![fact(Modality::SystolicBp, FactType::Abnormality, Direction::High, 177.0)], &[Modality::SystolicBp]);
        let e = evaluate_day(&fs, &summary("Blood pressure remained within normal limits."), &Lexicon::default()).unwrap();
        assert_eq!(e.abnormality_recall, Some(0.0));
        assert_eq!(e.missed.len(), 1);
        assert_eq!(e.misclassified.len(), 1);
        assert_eq!(e.misclassified[0].mention.vital, ClaimedVital::BloodPressure);
        assert!(e.hallucinated.is_empty());
        assert_eq!(e.coverage_fraction, Some(1.0));
    }

    #[test]
    fn wrong_magnitude_and_window_still_match() {
        let f = fact(Modality::SystolicBp, FactType::Abnormality, Direction::High, 188.0);
        let lex = Lexicon::default();
        let mentions = extract_mentions(
            "The systolic blood pressure was abnormally high at 150 mmHg \u{2026} from 13:00 to 13:30.",
            &lex,
        );
        let r = match_fact(&f, &mentions);
        assert!(r.is_match());
        assert_eq!(r.value_error, Some(38.0));
        assert_eq!(r.interval_overlap, Some(0.0));

        let fs = fact_set(vec![f], &[Modality::SystolicBp]);
        let e = evaluate_mentions(&fs, Pipeline::StatBased, mentions, BTreeSet::new());
        assert_eq!(e.mischaracterized.len(), 1);
        assert_eq!(e.mischaracterized[0].kinds, vec![Mischaracterization::Magnitude, Mischaracterization::Timing]);
    }

    #[test]
    fn exact_template_match() {
        let f = fact(Modality::HeartRate, FactType::Abnormality, Direction::Low, 45.0);
        let mentions = extract_mentions("Heart Rate was Abnormally Low (value: 45.0).", &Lexicon::default());
        let r = match_fact(&f, &mentions);
        assert!(r.is_match());
        assert_eq!(r.value_error, Some(0.0));
    }

    #[test]
    fn recall_arithmetic() {
        let lex = Lexicon::default();
        let facts = vec![
            fact(Modality::HeartRate, FactType::Abnormality, Direction::High, 120.0),
            fact(Modality::BodyTemperature, FactType::Abnormality, Direction::High, 38.5),
        ];
        let fs = fact_set(facts, &[Modality::HeartRate, Modality::BodyTemperature]);
        let e = evaluate_day(&fs, &summary("Heart rate was elevated."), &lex).unwrap();
        assert_eq!(e.abnormality_recall, Some(0.5));
        assert_eq!(e.missed.len(), 1);
        assert_eq!(e.missed[0].vital, Modality::BodyTemperature);
        assert_eq!(e.duration_recall, None);
        assert_eq!(e.coverage, Tally { matched: 1, total: 2 });
    }

    #[test]
    fn hallucination_on_normal_day() {
        let fs = fact_set(vec![], &[Modality::BodyTemperature, Modality::HeartRate]);
        let e = evaluate_day(&fs, &summary("Temperature was abnormally high."), &Lexicon::default()).unwrap();
        assert_eq!(e.hallucinated.len(), 1);
        assert_eq!(e.abnormality_recall, None);
        assert_eq!(e.coverage, Tally { matched: 1, total: 2 });
    }

    #[test]
    fn bp_group_claim_serves_one_fact() {
        let facts = vec![
            fact(Modality::SystolicBp, FactType::Abnormality, Direction::High, 150.0),
            fact(Modality::DiastolicBp, FactType::Abnormality, Direction::High, 95.0),
        ];
        let fs = fact_set(facts, &[Modality::SystolicBp, Modality::DiastolicBp]);
        let e = evaluate_day(&fs, &summary("Blood pressure was elevated."), &Lexicon::default()).unwrap();
        assert_eq!(e.abnormality, Tally { matched: 1, total: 2 });
        assert!(e.hallucinated.is_empty());
    }

    #[test]
    fn duration_fact_needs_duration_claim() {
        let mut d = fact(Modality::HeartRate, FactType::Duration, Direction::High, 40.0);
        d.interval = Interval::new(t(10, 0), t(10, 40));
        let fs = fact_set(vec![d], &[Modality::HeartRate]);
        let lex = Lexicon::default();
        let e = evaluate_day(&fs, &summary("Heart rate was high."), &lex).unwrap();
        assert_eq!(e.duration_recall, Some(0.0));
        let e = evaluate_day(&fs, &summary("Heart rate was high for 40 minutes from 10:00 to 10:40."), &lex).unwrap();
        assert_eq!(e.duration_recall, Some(1.0));
        assert!(e.mischaracterized.is_empty());
    }

    #[test]
    fn key_mismatch() {
        let fs = fact_set(vec![], &[Modality::HeartRate]);
        let mut s = summary("x");
        s.patient_id = "p2".into();
        assert!(matches!(evaluate_day(&fs, &s, &Lexicon::default()), Err(EvalError::KeyMismatch { .. })));
    }

    #[test]
    fn overlap_fraction_cases() {
        let iv = Interval::new(t(10, 0), t(11, 0));
        let c = |a: u32, b: u32, c: u32, d: u32| ClaimedInterval {
            start: NaiveTime::from_hms_opt(a, b, 0).unwrap(),
            end: NaiveTime::from_hms_opt(c, d, 0).unwrap(),
        };
        assert_eq!(overlap_fraction(&iv, &c(10, 30, 12, 0)), 0.5);
        assert_eq!(overlap_fraction(&iv, &c(8, 0, 9, 0)), 0.0);
        let point = Interval::new(t(10, 0), t(10, 0));
        assert_eq!(overlap_fraction(&point, &c(9, 0, 10, 0)), 1.0);
    }

    fn day_eval(pipeline: Pipeline, abn: Tally, cov: Tally) -> DayEvaluation {
        let fs = fact_set(vec![], &[]);
        let mut e = evaluate_mentions(&fs, pipeline, vec![], BTreeSet::new());
        e.abnormality = abn;
        e.coverage = cov;
        e
    }

    #[test]
    fn micro_and_macro_aggregation() {
        let evals = vec![
            day_eval(Pipeline::StatBased, Tally { matched: 1, total: 1 }, Tally { matched: 5, total: 5 }),
            day_eval(Pipeline::StatBased, Tally { matched: 0, total: 1 }, Tally { matched: 5, total: 5 }),
            day_eval(Pipeline::StatBased, Tally { matched: 0, total: 0 }, Tally { matched: 3, total: 3 }),
        ];
        let r = aggregate(&evals, Averaging::Micro).unwrap();
        assert_eq!(r.pipelines[0].abnormality_recall, Some(50.0));
        assert_eq!(r.pipelines[0].coverage_percent, Some(100.0));
        assert_eq!(r.pipelines[0].duration_recall, None);

        let evals = vec![
            day_eval(Pipeline::ZeroShot, Tally { matched: 1, total: 1 }, Tally { matched: 1, total: 2 }),
            day_eval(Pipeline::ZeroShot, Tally { matched: 1, total: 3 }, Tally { matched: 2, total: 2 }),
        ];
        let micro = aggregate(&evals, Averaging::Micro).unwrap();
        let macro_ = aggregate(&evals, Averaging::Macro).unwrap();
        assert_eq!(micro.pipelines[0].abnormality_recall, Some(50.0));
        let m = macro_.pipelines[0].abnormality_recall.unwrap();
        assert!((m - 100.0 * (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(macro_.pipelines[0].coverage_percent, Some(75.0));
        assert_eq!(aggregate(&[], Averaging::Micro), Err(EvalError::EmptyInput));
    }

    #[test]
    fn table_has_metric_columns() {
        let evals = vec![day_eval(Pipeline::StatBased, Tally { matched: 2, total: 5 }, Tally { matched: 1, total: 1 })];
        let table = render_table(&aggregate(&evals, Averaging::Micro).unwrap());
        let header = table.lines().next().unwrap();
        for col in ["Abnormality", "Duration", "Coverage"] {
            assert!(header.contains(col));
        }
        let row = table.lines().nth(1).unwrap();
        assert!(row.contains("40.0") && row.contains("n/a") && row.contains("100.0"), "{row}");
    }
}
