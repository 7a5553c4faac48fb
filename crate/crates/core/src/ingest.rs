//! Loading observation and summary files.
//!
//! The canonical observation format is a CSV file with the header
//! `patient_id,date,timestamp,modality,value`. Rows that cannot be turned
//! into a valid observation are reported as line-numbered rejects so that
//! every input row is accounted for.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    observation_violations, validate_patient_day, Modality, Observation, PatientDay, Value, Violation,
};

pub const CANONICAL_HEADER: [&str; 5] = ["patient_id", "date", "timestamp", "modality", "value"];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// The canonical single-file CSV.
    Generic,
    /// A directory holding TIHM-style `Physiology.csv`, `Activity.csv` and
    /// `Sleep.csv` exports.
    TihmLike,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed row: {0}")]
    MalformedRow(String),
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("unparseable timestamp `{0}`")]
    UnparseableTimestamp(String),
    #[error("unparseable date `{0}`")]
    UnparseableDate(String),
    #[error("{0}")]
    InvalidObservation(Violation),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("duplicate summary key ({patient_id}, {date}, {pipeline}) first seen on line {first_line}")]
    DuplicateKey {
        patient_id: String,
        date: NaiveDate,
        pipeline: Pipeline,
        first_line: u64,
    },
    #[error("summary text is empty")]
    EmptyText,
    #[error("{path}: unexpected header, expected `{expected}`")]
    BadHeader { path: PathBuf, expected: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("requested {requested} evaluation days but only {available} are available")]
    InsufficientDays { requested: usize, available: usize },
}

/// A row or record that was not loaded, with its 1-based line number.
#[derive(Debug)]
pub struct Reject {
    pub path: PathBuf,
    pub line: u64,
    pub reason: IngestError,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.reason)
    }
}

#[derive(Debug, Default)]
pub struct ObservationLoad {
    pub days: Vec<PatientDay>,
    pub rejects: Vec<Reject>,
    /// Data rows read, excluding headers.
    pub rows: usize,
}

impl ObservationLoad {
    pub fn observation_count(&self) -> usize {
        self.days.iter().map(|d| d.observations.len()).sum()
    }
}

/// Loads patient-days from `path`. Only file-level problems (unreadable file,
/// wrong header) are errors; bad rows land in [`ObservationLoad::rejects`].
pub fn load_observations(path: &Path, schema: Schema) -> Result<ObservationLoad, IngestError> {
    match schema {
        Schema::Generic => {
            let file = File::open(path).map_err(|source| IngestError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            read_observations(file, path)
        }
        Schema::TihmLike => tihm::load_dir(path),
    }
}

/// Reads canonical CSV from any reader; `path` is used only for diagnostics.
pub fn read_observations<R: Read>(reader: R, path: &Path) -> Result<ObservationLoad, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CANONICAL_HEADER) {
        return Err(IngestError::BadHeader {
            path: path.to_path_buf(),
            expected: CANONICAL_HEADER.join(","),
        });
    }

    let mut collector = DayCollector::default();
    let mut rejects = Vec::new();
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(csv_err(e)),
            Err(e) => {
                rows += 1;
                rejects.push(Reject {
                    path: path.to_path_buf(),
                    line,
                    reason: IngestError::MalformedRow(e.to_string()),
                });
                continue;
            }
        }
        rows += 1;
        let line = record.position().map_or(line, |p| p.line());
        match parse_canonical_row(&record) {
            Ok((patient, date, obs)) => collector.push(patient, date, obs),
            Err(reason) => rejects.push(Reject {
                path: path.to_path_buf(),
                line,
                reason,
            }),
        }
    }
    Ok(ObservationLoad {
        days: collector.finish(),
        rejects,
        rows,
    })
}

fn parse_canonical_row(record: &csv::StringRecord) -> Result<(String, NaiveDate, Observation), IngestError> {
    if record.len() != CANONICAL_HEADER.len() {
        return Err(IngestError::MalformedRow(format!(
            "expected {} fields, found {}",
            CANONICAL_HEADER.len(),
            record.len()
        )));
    }
    let patient = record[0].to_string();
    if patient.is_empty() {
        return Err(IngestError::MissingField("patient_id"));
    }
    let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
        .map_err(|_| IngestError::UnparseableDate(record[1].to_string()))?;
    let timestamp = parse_timestamp(&record[2])?;
    let modality: Modality = record[3]
        .parse()
        .map_err(|_| IngestError::UnknownModality(record[3].to_string()))?;
    let obs = Observation::new(timestamp, modality, Value::parse(&record[4]));
    check_observation(&obs, date)?;
    Ok((patient, date, obs))
}

fn check_observation(obs: &Observation, date: NaiveDate) -> Result<(), IngestError> {
    match observation_violations(0, obs, date).into_iter().next() {
        Some(v) => Err(IngestError::InvalidObservation(v)),
        None => Ok(()),
    }
}

/// Accepts ISO-8601 local timestamps with `T` or space separator and
/// optional seconds / fractional seconds. Seconds are truncated.
pub fn parse_timestamp(raw: &str) -> Result<NaiveDateTime, IngestError> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(crate::model::truncate_to_minute)
        .ok_or_else(|| IngestError::UnparseableTimestamp(raw.to_string()))
}

#[derive(Default)]
struct DayCollector {
    days: BTreeMap<(String, NaiveDate), Vec<Observation>>,
}

impl DayCollector {
    fn push(&mut self, patient: String, date: NaiveDate, obs: Observation) {
        self.days.entry((patient, date)).or_default().push(obs);
    }

    fn finish(self) -> Vec<PatientDay> {
        self.days
            .into_iter()
            .map(|((patient, date), obs)| {
                // rows were checked individually and each day is non-empty
                validate_patient_day(PatientDay::new(patient, date, obs))
                    .expect("row-level checks guarantee a valid day")
            })
            .collect()
    }
}

/// Writes patient-days in the canonical CSV format.
pub fn write_observations<W: Write>(days: &[PatientDay], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CANONICAL_HEADER)?;
    for day in days {
        let date = day.date.format("%Y-%m-%d").to_string();
        for obs in &day.observations {
            wtr.write_record([
                day.patient_id.as_str(),
                date.as_str(),
                &obs.timestamp.format(TIMESTAMP_FORMAT).to_string(),
                obs.modality.name(),
                &obs.value.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Renders rejects as the `<input>.rejects` sidecar: one `line<TAB>reason`
/// entry per reject.
pub fn format_rejects(rejects: &[Reject]) -> String {
    let mut out = String::new();
    for r in rejects {
        out.push_str(&format!("{}\t{}\n", r.line, r.reason));
    }
    out
}

pub fn rejects_sidecar_path(input: &Path) -> PathBuf {
    let mut name = input.as_os_str().to_owned();
    name.push(".rejects");
    PathBuf::from(name)
}

/// Adapter for TIHM-style multi-file exports. Column names and device-type
/// strings live in this module only.
pub mod tihm {
    use super::*;

    pub const PHYSIOLOGY_FILE: &str = "Physiology.csv";
    pub const ACTIVITY_FILE: &str = "Activity.csv";
    pub const SLEEP_FILE: &str = "Sleep.csv";

    /// `device_type` values mapped onto vitals. Other device types (weight,
    /// muscle mass, ...) are rejected as unknown modalities.
    pub const DEVICE_TYPES: [(&str, Modality); 4] = [
        ("heart rate", Modality::HeartRate),
        ("systolic blood pressure", Modality::SystolicBp),
        ("diastolic blood pressure", Modality::DiastolicBp),
        ("body temperature", Modality::BodyTemperature),
    ];

    pub(super) fn load_dir(dir: &Path) -> Result<ObservationLoad, IngestError> {
        let mut collector = DayCollector::default();
        let mut rejects = Vec::new();
        let mut rows = 0;
        let files: [(&str, RowMapper); 3] = [
            (PHYSIOLOGY_FILE, physiology_row),
            (ACTIVITY_FILE, activity_row),
            (SLEEP_FILE, sleep_row),
        ];
        let mut found = false;
        for (name, mapper) in files {
            let path = dir.join(name);
            if !path.exists() {
                continue;
            }
            found = true;
            let file = File::open(&path).map_err(|source| IngestError::Io {
                path: path.clone(),
                source,
            })?;
            let mut rdr = csv::ReaderBuilder::new()
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(file);
            let header = rdr
                .headers()
                .map_err(|source| IngestError::Csv {
                    path: path.clone(),
                    source,
                })?
                .clone();
            for result in rdr.records() {
                rows += 1;
                let (line, outcome) = match result {
                    Ok(rec) => (
                        rec.position().map_or(0, |p| p.line()),
                        mapper(&header, &rec),
                    ),
                    Err(e) => (
                        e.position().map_or(0, |p| p.line()),
                        Err(IngestError::MalformedRow(e.to_string())),
                    ),
                };
                match outcome {
                    Ok((patient, obs)) => {
                        let date = obs.timestamp.date();
                        collector.push(patient, date, obs)
                    }
                    Err(reason) => rejects.push(Reject {
                        path: path.clone(),
                        line,
                        reason,
                    }),
                }
            }
        }
        if !found {
            return Err(IngestError::Io {
                path: dir.to_path_buf(),
                source: io::Error::new(io::ErrorKind::NotFound, "no TIHM export files in directory"),
            });
        }
        Ok(ObservationLoad {
            days: collector.finish(),
            rejects,
            rows,
        })
    }

    type RowMapper = fn(&csv::StringRecord, &csv::StringRecord) -> Result<(String, Observation), IngestError>;

    fn field<'a>(
        header: &csv::StringRecord,
        rec: &'a csv::StringRecord,
        name: &'static str,
    ) -> Result<&'a str, IngestError> {
        header
            .iter()
            .position(|h| h == name)
            .and_then(|i| rec.get(i))
            .filter(|v| !v.is_empty())
            .ok_or(IngestError::MissingField(name))
    }

    fn finish(
        header: &csv::StringRecord,
        rec: &csv::StringRecord,
        modality: Modality,
        value: Value,
    ) -> Result<(String, Observation), IngestError> {
        let patient = field(header, rec, "patient_id")?.to_string();
        let ts = parse_timestamp(field(header, rec, "date")?)?;
        let obs = Observation::new(ts, modality, value);
        check_observation(&obs, ts.date())?;
        Ok((patient, obs))
    }

    fn physiology_row(
        header: &csv::StringRecord,
        rec: &csv::StringRecord,
    ) -> Result<(String, Observation), IngestError> {
        let device = field(header, rec, "device_type")?;
        let modality = DEVICE_TYPES
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(device))
            .map(|(_, m)| *m)
            .ok_or_else(|| IngestError::UnknownModality(device.to_string()))?;
        let value = Value::parse(field(header, rec, "value")?);
        finish(header, rec, modality, value)
    }

    fn activity_row(
        header: &csv::StringRecord,
        rec: &csv::StringRecord,
    ) -> Result<(String, Observation), IngestError> {
        let location = field(header, rec, "location_name")?.to_ascii_lowercase();
        finish(header, rec, Modality::Activity, Value::Label(location))
    }

    fn sleep_row(
        header: &csv::StringRecord,
        rec: &csv::StringRecord,
    ) -> Result<(String, Observation), IngestError> {
        let state = field(header, rec, "state")?.to_ascii_lowercase();
        finish(header, rec, Modality::Sleep, Value::Label(state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    ZeroShot,
    StatBased,
    ImageBased,
    External,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [
        Pipeline::ZeroShot,
        Pipeline::StatBased,
        Pipeline::ImageBased,
        Pipeline::External,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::ZeroShot => "zero_shot",
            Pipeline::StatBased => "stat_based",
            Pipeline::ImageBased => "image_based",
            Pipeline::External => "external",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| format!("unknown pipeline `{s}`"))
    }
}

/// A generated daily narrative for one patient-day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub patient_id: String,
    pub date: NaiveDate,
    pub pipeline: Pipeline,
    pub text: String,
}

impl Summary {
    pub fn key(&self) -> (&str, NaiveDate, Pipeline) {
        (&self.patient_id, self.date, self.pipeline)
    }
}

#[derive(Debug, Default)]
pub struct SummaryLoad {
    pub summaries: Vec<Summary>,
    pub rejects: Vec<Reject>,
}

pub fn load_summaries(path: &Path) -> Result<SummaryLoad, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_summaries(BufReader::new(file), path)
}

/// Reads line-delimited JSON summary records. Every line yields one summary
/// or one reject.
pub fn read_summaries<R: BufRead>(reader: R, path: &Path) -> Result<SummaryLoad, IngestError> {
    let mut out = SummaryLoad::default();
    let mut seen: BTreeMap<(String, NaiveDate, Pipeline), u64> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reject = |reason| Reject {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        match parse_summary_line(&line) {
            Ok(summary) => {
                let key = (summary.patient_id.clone(), summary.date, summary.pipeline);
                if let Some(&first_line) = seen.get(&key) {
                    out.rejects.push(reject(IngestError::DuplicateKey {
                        patient_id: key.0,
                        date: key.1,
                        pipeline: key.2,
                        first_line,
                    }));
                } else {
                    seen.insert(key, line_no);
                    out.summaries.push(summary);
                }
            }
            Err(reason) => out.rejects.push(reject(reason)),
        }
    }
    Ok(out)
}

fn parse_summary_line(line: &str) -> Result<Summary, IngestError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedRow(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedRow("expected a JSON object".into()))?;
    let get = |name: &'static str| {
        obj.get(name)
            .and_then(|v| v.as_str())
            .ok_or(IngestError::MissingField(name))
    };
    let patient_id = get("patient_id")?;
    let date_raw = get("date")?;
    let pipeline_raw = get("pipeline")?;
    let text = get("text")?;
    let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
        .map_err(|_| IngestError::UnparseableDate(date_raw.to_string()))?;
    let pipeline = pipeline_raw.parse().map_err(IngestError::MalformedRow)?;
    if text.split_whitespace().next().is_none() {
        return Err(IngestError::EmptyText);
    }
    Ok(Summary {
        patient_id: patient_id.to_string(),
        date,
        pipeline,
        text: text.to_string(),
    })
}

pub fn write_summaries<W: Write>(summaries: &[Summary], mut writer: W) -> io::Result<()> {
    for s in summaries {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Holds out `n` patient-days for evaluation, drawing round-robin across
/// patients so no single patient dominates the test set.
///
/// Deterministic for a given seed. Returns `(test, dev)`; both keep the
/// input's relative order.
pub fn split_eval_set(
    days: &[PatientDay],
    n: usize,
    seed: u64,
) -> Result<(Vec<PatientDay>, Vec<PatientDay>), IngestError> {
    if n > days.len() {
        return Err(IngestError::InsufficientDays {
            requested: n,
            available: days.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_patient: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in days.iter().enumerate() {
        by_patient.entry(&d.patient_id).or_default().push(i);
    }
    let mut queues: Vec<Vec<usize>> = by_patient.into_values().collect();
    for q in &mut queues {
        q.shuffle(&mut rng);
    }
    queues.shuffle(&mut rng);

    let mut chosen = BTreeSet::new();
    let mut round = 0;
    while chosen.len() < n {
        for q in &queues {
            if chosen.len() == n {
                break;
            }
            if let Some(&idx) = q.get(round) {
                chosen.insert(idx);
            }
        }
        round += 1;
    }
    let (test, dev): (Vec<_>, Vec<_>) = days
        .iter()
        .enumerate()
        .partition(|(i, _)| chosen.contains(i));
    Ok((
        test.into_iter().map(|(_, d)| d.clone()).collect(),
        dev.into_iter().map(|(_, d)| d.clone()).collect(),
    ))
}
