//! Claimed clinical events in summary text.
//!
//! The policy is conservative: an abnormal claim needs a vital name and an
//! explicit indicator term in the same sentence. Sentences are split into
//! clauses on `,` `;` and contrastive conjunctions so that "heart rate was
//! high, temperature normal" yields two separate claims. An indicator clause
//! without a vital borrows the vitals of the nearest preceding clause.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use chrono::NaiveTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lexicon::{tokenize, Hit, Lexicon, TermClass, Token};
use crate::model::{Direction, Modality};

/// Subject of a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClaimedVital {
    Modality(Modality),
    /// Unqualified blood pressure: either BP vital.
    BloodPressure,
    Unknown,
}

impl ClaimedVital {
    /// Whether a claim about `self` can refer to `vital`.
    pub fn covers(self, vital: Modality) -> bool {
        match self {
            ClaimedVital::Modality(m) => m == vital,
            ClaimedVital::BloodPressure => vital.is_blood_pressure(),
            ClaimedVital::Unknown => false,
        }
    }

    pub fn is_known_vital(self) -> bool {
        match self {
            ClaimedVital::Modality(m) => m.is_vital(),
            ClaimedVital::BloodPressure => true,
            ClaimedVital::Unknown => false,
        }
    }

    /// Exact vital beats the BP group.
    fn specificity(self) -> u8 {
        match self {
            ClaimedVital::Modality(_) => 2,
            ClaimedVital::BloodPressure => 1,
            ClaimedVital::Unknown => 0,
        }
    }
}

impl fmt::Display for ClaimedVital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClaimedVital::Modality(m) => f.write_str(m.name()),
            ClaimedVital::BloodPressure => f.write_str("blood_pressure"),
            ClaimedVital::Unknown => f.write_str("unknown"),
        }
    }
}

impl From<ClaimedVital> for String {
    fn from(v: ClaimedVital) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for ClaimedVital {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "blood_pressure" => Ok(ClaimedVital::BloodPressure),
            "unknown" => Ok(ClaimedVital::Unknown),
            other => other.parse().map(ClaimedVital::Modality).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    AbnormalHigh,
    AbnormalLow,
    AbnormalUnspecified,
    Normal,
}

impl Polarity {
    pub fn is_abnormal(self) -> bool {
        self != Polarity::Normal
    }

    /// Whether this polarity is consistent with a fact in `direction`.
    pub fn agrees_with(self, direction: Direction) -> bool {
        matches!(
            (self, direction),
            (Polarity::AbnormalHigh, Direction::High)
                | (Polarity::AbnormalLow, Direction::Low)
                | (Polarity::AbnormalUnspecified, _)
        )
    }

    fn from_class(class: TermClass, negated: bool) -> Option<Self> {
        Some(match (class, negated) {
            (TermClass::High, false) => Polarity::AbnormalHigh,
            (TermClass::Low, false) => Polarity::AbnormalLow,
            (TermClass::Abnormal, false) => Polarity::AbnormalUnspecified,
            (TermClass::Normal, false) => Polarity::Normal,
            (TermClass::High | TermClass::Low | TermClass::Abnormal, true) => Polarity::Normal,
            (TermClass::Normal, true) => Polarity::AbnormalUnspecified,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimType {
    Point,
    Duration,
    CoverageStatement,
}

/// Clock-time window stated in a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClaimedInterval {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimedMention {
    pub vital: ClaimedVital,
    pub polarity: Polarity,
    pub claim_type: ClaimType,
    pub value: Option<f64>,
    pub duration_minutes: Option<f64>,
    pub interval: Option<ClaimedInterval>,
    pub sentence_index: usize,
    pub surface: String,
}

impl ClaimedMention {
    /// Claims an abnormal event about a known vital.
    pub fn is_abnormal_claim(&self) -> bool {
        self.polarity.is_abnormal() && self.vital.is_known_vital() && self.claim_type != ClaimType::CoverageStatement
    }

    pub fn specificity(&self) -> u8 {
        self.vital.specificity()
    }
}

const ABBREVIATIONS: [&str; 6] = ["e.g", "i.e", "eg", "ie", "approx", "vs"];
const CONTRASTIVE: [&str; 7] = ["while", "whereas", "but", "although", "though", "however", "yet"];
const NEGATION_WINDOW: usize = 3;

/// Splits text into trimmed sentences, dropping leading bullet markers and
/// fragments without any word characters.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(i, c)) in chars.iter().enumerate() {
        let prev = k.checked_sub(1).map(|p| chars[p].1);
        let next = chars.get(k + 1).map(|n| n.1);
        let boundary = match c {
            '\n' | '!' | '?' | '•' => true,
            '.' => !protected_period(text, i, prev, next, &chars[k + 1..]),
            _ => false,
        };
        if boundary {
            push_sentence(&text[start..i], &mut out);
            start = i + c.len_utf8();
        }
    }
    push_sentence(&text[start..], &mut out);
    out
}

fn protected_period(text: &str, i: usize, prev: Option<char>, next: Option<char>, rest: &[(usize, char)]) -> bool {
    if prev == Some('.') || next == Some('.') {
        return true;
    }
    if prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit()) {
        return true;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '.';
    let word_start = text[..i].rfind(|c: char| !is_word(c)).map_or(0, |p| p + text[p..].chars().next().map_or(1, char::len_utf8));
    let word_end = text[i..].find(|c: char| !is_word(c)).map_or(text.len(), |p| i + p);
    let word = text[word_start..word_end].trim_end_matches('.').to_lowercase();
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    // "bpm. and" style continuations: the next word starts lower-case.
    next == Some(' ')
        && rest
            .iter()
            .map(|(_, c)| *c)
            .find(|c| *c != ' ')
            .is_some_and(char::is_lowercase)
}

fn push_sentence<'a>(raw: &'a str, out: &mut Vec<&'a str>) {
    let s = raw.trim().trim_start_matches(['-', '*', '•', '–']).trim();
    if s.chars().any(char::is_alphanumeric) {
        out.push(s);
    }
}

#[derive(Debug, Default)]
struct Clause {
    start: usize,
    end: usize,
    vitals: Vec<ClaimedVital>,
    /// Activity or sleep named in the clause.
    other_modalities: Vec<Modality>,
    polarities: Vec<Polarity>,
    absence: bool,
}

impl Clause {
    fn is_neutral(&self) -> bool {
        self.vitals.is_empty() && self.other_modalities.is_empty() && self.polarities.is_empty() && !self.absence
    }
}

fn hard_breaks(sentence: &str, tokens: &[Token]) -> Vec<bool> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            i > 0 && (sentence[tokens[i - 1].end..t.start].contains([',', ';']) || CONTRASTIVE.contains(&t.text.as_str()))
        })
        .collect()
}

fn clauses(sentence: &str, lex: &Lexicon) -> Vec<Clause> {
    let tokens = tokenize(sentence);
    let breaks = hard_breaks(sentence, &tokens);

    // Scan each hard segment separately so terms never straddle a comma.
    let mut hits: Vec<Hit> = Vec::new();
    let mut seg_start = 0;
    for i in 1..=tokens.len() {
        if i == tokens.len() || breaks[i] {
            hits.extend(lex.scan(&tokens[seg_start..i]).into_iter().map(|h| Hit {
                start: h.start + seg_start,
                end: h.end + seg_start,
                ..h
            }));
            seg_start = i;
        }
    }

    let specific_bp = hits
        .iter()
        .any(|h| matches!(h.class, TermClass::Modality(m) if m.is_blood_pressure()));

    let mut out: Vec<Clause> = Vec::new();
    let mut current = Clause::default();
    let mut clause_first_token = 0;
    let mut hit_iter = hits.iter().peekable();
    for (i, tok) in tokens.iter().enumerate() {
        let soft = tok.text == "and" && !current.vitals.is_empty() && !current.polarities.is_empty();
        if i > 0 && (breaks[i] || soft) {
            current.end = tok.start;
            out.push(std::mem::take(&mut current));
            current.start = tok.start;
            clause_first_token = i;
        } else if i == 0 {
            current.start = tok.start;
        }
        while let Some(h) = hit_iter.next_if(|h| h.start == i) {
            match h.class {
                TermClass::Modality(m) if m.is_vital() => push_unique(&mut current.vitals, ClaimedVital::Modality(m)),
                TermClass::Modality(m) => push_unique(&mut current.other_modalities, m),
                TermClass::BloodPressure if !specific_bp => push_unique(&mut current.vitals, ClaimedVital::BloodPressure),
                TermClass::Absence => current.absence = true,
                class if class.is_indicator() => {
                    let negated = hits.iter().any(|n| {
                        n.class == TermClass::Negation
                            && n.start >= clause_first_token
                            && n.end <= h.start
                            && h.start - n.start <= NEGATION_WINDOW
                    });
                    if let Some(p) = Polarity::from_class(class, negated) {
                        push_unique(&mut current.polarities, p);
                    }
                }
                _ => {}
            }
        }
    }
    if !tokens.is_empty() {
        current.end = sentence.len();
        out.push(current);
    }
    out
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, item: T) {
    if !v.contains(&item) {
        v.push(item);
    }
}

/// Extracts claimed events, at most one per (sentence, vital, polarity).
pub fn extract_mentions(text: &str, lex: &Lexicon) -> Vec<ClaimedMention> {
    let mut out = Vec::new();
    for (sentence_index, sentence) in split_sentences(text).into_iter().enumerate() {
        let clauses = clauses(sentence, lex);
        let mut found: Vec<ClaimedMention> = Vec::new();
        let mut record = |vital: ClaimedVital, polarity: Polarity, claim_type: ClaimType, scope: &str| {
            let captured = Captures::scan(scope, vital);
            let claim_type = match claim_type {
                ClaimType::Point if polarity.is_abnormal() && captured.is_duration() => ClaimType::Duration,
                other => other,
            };
            if let Some(m) = found.iter_mut().find(|m| m.vital == vital && m.polarity == polarity) {
                m.value = m.value.or(captured.value);
                m.duration_minutes = m.duration_minutes.or(captured.duration_minutes());
                m.interval = m.interval.or(captured.interval);
                if claim_type == ClaimType::Duration {
                    m.claim_type = ClaimType::Duration;
                }
                return;
            }
            found.push(ClaimedMention {
                vital,
                polarity,
                claim_type,
                value: captured.value,
                duration_minutes: captured.duration_minutes(),
                interval: captured.interval,
                sentence_index,
                surface: sentence.to_string(),
            });
        };

        for (ci, clause) in clauses.iter().enumerate() {
            if clause.absence {
                let named = clause
                    .vitals
                    .iter()
                    .copied()
                    .chain(clause.other_modalities.iter().map(|&m| ClaimedVital::Modality(m)));
                for vital in named {
                    record(vital, Polarity::Normal, ClaimType::CoverageStatement, "");
                }
                continue;
            }
            if clause.polarities.is_empty() {
                continue;
            }
            let mut first = ci;
            let mut targets = clause.vitals.clone();
            if targets.is_empty() && clause.other_modalities.is_empty() {
                if let Some(prev) = (0..ci).rev().find(|&p| !clauses[p].vitals.is_empty() || !clauses[p].other_modalities.is_empty()) {
                    if !clauses[prev].absence {
                        targets = clauses[prev].vitals.clone();
                        first = prev;
                    }
                }
                if first == ci {
                    targets.push(ClaimedVital::Unknown);
                }
            }
            let mut last = ci;
            while last + 1 < clauses.len() && clauses[last + 1].is_neutral() {
                last += 1;
            }
            let scope = &sentence[clauses[first].start..clauses[last].end];
            for &vital in &targets {
                for &polarity in &clause.polarities {
                    record(vital, polarity, ClaimType::Point, scope);
                }
            }
        }

        // A specific direction makes an unspecified claim on the same vital redundant.
        let directed: BTreeSet<ClaimedVital> = found
            .iter()
            .filter(|m| matches!(m.polarity, Polarity::AbnormalHigh | Polarity::AbnormalLow))
            .map(|m| m.vital)
            .collect();
        found.retain(|m| !(m.polarity == Polarity::AbnormalUnspecified && directed.contains(&m.vital)));
        out.extend(found);
    }
    out
}

/// Modalities the summary names anywhere. The group term "blood pressure"
/// acknowledges both BP vitals.
pub fn extract_coverage_statements(text: &str, lex: &Lexicon) -> BTreeSet<Modality> {
    let tokens = tokenize(text);
    let mut out = BTreeSet::new();
    for hit in lex.scan(&tokens) {
        match hit.class {
            TermClass::Modality(m) => {
                out.insert(m);
            }
            TermClass::BloodPressure => {
                out.insert(Modality::SystolicBp);
                out.insert(Modality::DiastolicBp);
            }
            _ => {}
        }
    }
    out
}

static VALUE_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\s*value\s*:\s*(-?\d+(?:\.\d+)?)\s*\)").unwrap());
static BP_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d{2,3}(?:\.\d+)?)\s*/\s*(\d{2,3}(?:\.\d+)?)\b").unwrap());
static HR_UNIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d+(?:\.\d+)?)\s*(?:bpm|beats per minute|beats/min)\b").unwrap());
static BP_UNIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+(?:\.\d+)?)\s*mm\s?hg\b").unwrap());
static TEMP_UNIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d+(?:\.\d+)?)\s*(?:°\s*c\b|º\s*c\b|degrees|celsius)").unwrap());
static DURATION_WORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:sustained|persist\w*|prolonged|consecutive|continuous(?:ly)?)\b").unwrap()
});
static FOR_SPAN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:for|over|lasting)\s+(?:about\s+|approximately\s+|around\s+|roughly\s+|nearly\s+|over\s+)?(\d+(?:\.\d+)?)\s*(minutes?|mins?|hours?|hrs?)\b")
        .unwrap()
});
static CLOCK_RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\b(?:from|between)\s+)?\b(\d{1,2}):(\d{2})\s*(?:to|until|and|-|–|—)\s*(\d{1,2}):(\d{2})\b").unwrap()
});

/// Values, extents and windows found in a claim's scope.
#[derive(Debug, Default)]
struct Captures {
    value: Option<f64>,
    span_minutes: Option<f64>,
    interval: Option<ClaimedInterval>,
    duration_word: bool,
}

impl Captures {
    fn scan(scope: &str, vital: ClaimedVital) -> Self {
        let text = scope.to_lowercase();
        let first_num = |re: &Regex, group: usize| {
            re.captures(&text).and_then(|c| c.get(group)).and_then(|m| m.as_str().parse::<f64>().ok())
        };
        let tagged = first_num(&VALUE_TAG, 1);
        let unit_value = match vital {
            ClaimedVital::Modality(Modality::HeartRate) => first_num(&HR_UNIT, 1),
            ClaimedVital::Modality(Modality::SystolicBp) => first_num(&BP_PAIR, 1).or_else(|| first_num(&BP_UNIT, 1)),
            ClaimedVital::Modality(Modality::DiastolicBp) => first_num(&BP_PAIR, 2).or_else(|| first_num(&BP_UNIT, 1)),
            ClaimedVital::Modality(Modality::BodyTemperature) => first_num(&TEMP_UNIT, 1),
            _ => None,
        };
        let span_minutes = FOR_SPAN.captures(&text).and_then(|c| {
            let n: f64 = c[1].parse().ok()?;
            Some(if c[2].starts_with('h') { n * 60.0 } else { n })
        });
        let interval = CLOCK_RANGE.captures_iter(&text).find_map(|c| {
            let t = |h: &str, m: &str| NaiveTime::from_hms_opt(h.parse().ok()?, m.parse().ok()?, 0);
            let start = t(&c[1], &c[2])?;
            let end = t(&c[3], &c[4])?;
            (start <= end).then_some(ClaimedInterval { start, end })
        });
        Self {
            value: tagged.or(unit_value),
            span_minutes,
            interval,
            duration_word: DURATION_WORD.is_match(&text),
        }
    }

    fn is_duration(&self) -> bool {
        self.duration_word || self.span_minutes.is_some() || self.interval.is_some()
    }

    fn duration_minutes(&self) -> Option<f64> {
        self.span_minutes
            .or_else(|| self.interval.map(|iv| (iv.end - iv.start).num_minutes() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::default()
    }

    fn hm(h: u32, m: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, 0).unwrap()
    }

    #[test]
    fn bp_group_normal_claim() {
        let m = extract_mentions("Blood pressure remained within normal limits.", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::BloodPressure);
        assert_eq!(m[0].polarity, Polarity::Normal);
        assert_eq!(m[0].claim_type, ClaimType::Point);
    }

    #[test]
    fn case_study_duration_claim() {
        let text = "The systolic blood pressure was abnormally high at 150 mmHg \u{2026} from 13:00 to 13:30.";
        let m = extract_mentions(text, &lex());
        assert_eq!(m.len(), 1);
        let m = &m[0];
        assert_eq!(m.vital, ClaimedVital::Modality(Modality::SystolicBp));
        assert_eq!(m.polarity, Polarity::AbnormalHigh);
        assert_eq!(m.claim_type, ClaimType::Duration);
        assert_eq!(m.value, Some(150.0));
        assert_eq!(m.interval, Some(ClaimedInterval { start: hm(13, 0), end: hm(13, 30) }));
        assert_eq!(m.duration_minutes, Some(30.0));
    }

    #[test]
    fn template_form() {
        let m = extract_mentions("Heart Rate was Abnormally High (value: 95.0).", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::Modality(Modality::HeartRate));
        assert_eq!(m[0].polarity, Polarity::AbnormalHigh);
        assert_eq!(m[0].claim_type, ClaimType::Point);
        assert_eq!(m[0].value, Some(95.0));
    }

    #[test]
    fn clauses_keep_claims_apart() {
        let m = extract_mentions("Heart rate was elevated at 102 bpm, while temperature stayed normal.", &lex());
        let pairs: Vec<_> = m.iter().map(|m| (m.vital, m.polarity, m.value)).collect();
        assert_eq!(
            pairs,
            vec![
                (ClaimedVital::Modality(Modality::HeartRate), Polarity::AbnormalHigh, Some(102.0)),
                (ClaimedVital::Modality(Modality::BodyTemperature), Polarity::Normal, None),
            ]
        );
    }

    #[test]
    fn indicator_clause_borrows_previous_vital() {
        let m = extract_mentions("Diastolic pressure reached 95 mmHg, above the normal range.", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::Modality(Modality::DiastolicBp));
        assert_eq!(m[0].polarity, Polarity::AbnormalHigh);
        assert_eq!(m[0].value, Some(95.0));
    }

    #[test]
    fn negation_forces_normal() {
        for text in ["Temperature was not elevated.", "No abnormalities in heart rate."] {
            let m = extract_mentions(text, &lex());
            assert_eq!(m.len(), 1, "{text}");
            assert_eq!(m[0].polarity, Polarity::Normal, "{text}");
        }
        let m = extract_mentions("Heart rate was not within normal limits.", &lex());
        assert_eq!(m[0].polarity, Polarity::AbnormalUnspecified);
    }

    #[test]
    fn specific_bp_suppresses_group() {
        let m = extract_mentions("Blood pressure was high (150/95 mmHg) with systolic readings elevated.", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::Modality(Modality::SystolicBp));
        assert_eq!(m[0].value, Some(150.0));
    }

    #[test]
    fn indicator_without_vital_is_unknown() {
        let m = extract_mentions("Readings were abnormally high overnight.", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::Unknown);
        assert!(!m[0].is_abnormal_claim());
    }

    #[test]
    fn activity_indicator_is_not_a_vital_claim() {
        assert!(extract_mentions("Activity was high in the kitchen.", &lex()).is_empty());
    }

    #[test]
    fn absence_is_coverage_statement() {
        let m = extract_mentions("No data available for sleep patterns.", &lex());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].vital, ClaimedVital::Modality(Modality::Sleep));
        assert_eq!(m[0].claim_type, ClaimType::CoverageStatement);
    }

    #[test]
    fn duration_in_hours() {
        let m = extract_mentions("Temperature was elevated for 2 hours (value: 38.4).", &lex());
        assert_eq!(m[0].duration_minutes, Some(120.0));
        assert_eq!(m[0].value, Some(38.4));
        assert_eq!(m[0].claim_type, ClaimType::Duration);
    }

    #[test]
    fn sentence_splitting() {
        let text = "- Heart rate 72 bpm, e.g. at 10:00. Temperature 36.6 °C...\n* Sleep: light\nBP? fine! HR 60 bpm. and steady";
        assert_eq!(
            split_sentences(text),
            vec!["Heart rate 72 bpm, e.g. at 10:00", "Temperature 36.6 °C...", "Sleep: light", "BP", "fine", "HR 60 bpm. and steady"]
        );
    }

    #[test]
    fn coverage_examples() {
        let text = "Heart rate steady. Blood pressure fine. Temperature normal. Activity in kitchen. Sleep was light.";
        assert_eq!(extract_coverage_statements(text, &lex()).len(), 6);
        assert!(extract_coverage_statements("No data available for sleep patterns", &lex()).contains(&Modality::Sleep));
        assert_eq!(
            extract_coverage_statements("Only temperature was recorded.", &lex()),
            BTreeSet::from([Modality::BodyTemperature])
        );
    }

    #[test]
    fn mention_serializes_with_flat_vital() {
        let m = extract_mentions("Blood pressure was low.", &lex());
        let json = serde_json::to_string(&m[0]).unwrap();
        assert!(json.contains(r#""vital":"blood_pressure""#), "{json}");
        let back: ClaimedMention = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m[0]);
    }

    const FILLER: [&str; 10] = ["the", "reading", "was", "at", "recorded", "stable", "today", "around", "morning", "value"];

    fn vital_term() -> impl Strategy<Value = &'static str> {
        prop::sample::select(vec![
            "heart rate", "pulse", "systolic", "systolic blood pressure", "diastolic bp", "blood pressure",
            "body temperature", "temperature", "temp",
        ])
    }

    proptest! {
        #[test]
        fn vital_only_sentences_make_no_abnormal_claim(
            vital in vital_term(),
            words in prop::collection::vec(prop::sample::select(FILLER.to_vec()), 0..8),
            number in 0u32..250,
        ) {
            let text = format!("{} {} {} {}.", words.join(" "), vital, number, words.iter().rev().cloned().collect::<Vec<_>>().join(" "));
            let m = extract_mentions(&text, &lex());
            prop_assert!(m.iter().all(|m| !m.polarity.is_abnormal()), "{text}: {m:?}");
        }

        #[test]
        fn vision_templates_round_trip(vi in 0usize..4, kind in 0usize..3, tenths in 0u32..3000) {
            let vital = Modality::VITALS[vi];
            let value = f64::from(tenths) / 10.0;
            let (text, polarity, expected) = match kind {
                0 => (format!("{} was Abnormally High (value: {value:.1}).", vital.display_name()), Polarity::AbnormalHigh, Some(value)),
                1 => (format!("{} was Abnormally Low (value: {value:.1}).", vital.display_name()), Polarity::AbnormalLow, Some(value)),
                _ => (format!("{} was within normal range.", vital.display_name()), Polarity::Normal, None),
            };
            let m = extract_mentions(&text, &lex());
            prop_assert_eq!(m.len(), 1);
            prop_assert_eq!(m[0].vital, ClaimedVital::Modality(vital));
            prop_assert_eq!(m[0].polarity, polarity);
            prop_assert_eq!(m[0].value, expected);
        }

        #[test]
        fn extraction_is_deterministic(text in "[A-Za-z0-9 ,.;:()/-]{0,120}") {
            let a = extract_mentions(&text, &lex());
            let b = extract_mentions(&text, &lex());
            prop_assert_eq!(a, b);
        }
    }
}
