//! Survival data containers: validated `(entry, observed, event)` triples,
//! CSV ingestion and summaries.
//!
//! Every subject satisfies `0 <= entry < observed < inf`. Ties between entry
//! and observed time are rejected outright; tied data must be jittered
//! before it reaches this crate.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One subject: entry (truncation) time, observed time `min(Y, C)` and the
/// event indicator (`true` iff the observed time is the survival time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub entry: f64,
    pub observed: f64,
    pub event: bool,
}

impl SurvivalSample {
    pub fn new(entry: f64, observed: f64, event: bool) -> Self {
        Self {
            entry,
            observed,
            event,
        }
    }
}

/// Ways a raw triple can fail validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonFiniteTime,
    NegativeEntry,
    EntryNotBeforeObserved,
    InvalidEvent(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteTime => write!(f, "time is not finite"),
            Violation::NegativeEntry => write!(f, "entry time is negative"),
            Violation::EntryNotBeforeObserved => write!(f, "entry time is not < observed time"),
            Violation::InvalidEvent(v) => write!(f, "event value {v} is not 0 or 1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {violation}")]
    Validation { line: u64, violation: Violation },
    #[error("{} invalid sample(s); first at index {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Invalid(Vec<(usize, Violation)>),
    #[error("group labels: expected {expected}, got {got}")]
    GroupLength { expected: usize, got: usize },
}

/// A validated, ordered collection of subjects with optional cohort labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDataset {
    samples: Vec<SurvivalSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<String>>,
}

fn check_triple(entry: f64, observed: f64, event: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if !entry.is_finite() || !observed.is_finite() {
        out.push(Violation::NonFiniteTime);
    } else {
        if entry < 0.0 {
            out.push(Violation::NegativeEntry);
        }
        if entry >= observed {
            out.push(Violation::EntryNotBeforeObserved);
        }
    }
    if event != 0.0 && event != 1.0 {
        out.push(Violation::InvalidEvent(event));
    }
    out
}

/// Validates raw `(entry, observed, event)` triples, collecting every
/// violation rather than stopping at the first.
pub fn validate(raw: &[(f64, f64, f64)]) -> Result<TruncatedDataset, DataError> {
    let mut violations = Vec::new();
    let mut samples = Vec::with_capacity(raw.len());
    for (i, &(entry, observed, event)) in raw.iter().enumerate() {
        let v = check_triple(entry, observed, event);
        if v.is_empty() {
            samples.push(SurvivalSample::new(entry, observed, event == 1.0));
        } else {
            violations.extend(v.into_iter().map(|v| (i, v)));
        }
    }
    if violations.is_empty() {
        Ok(TruncatedDataset {
            samples,
            groups: None,
        })
    } else {
        Err(DataError::Invalid(violations))
    }
}

impl TruncatedDataset {
    pub fn new(samples: Vec<SurvivalSample>) -> Result<Self, DataError> {
        let violations: Vec<_> = samples
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                check_triple(s.entry, s.observed, if s.event { 1.0 } else { 0.0 })
                    .into_iter()
                    .map(move |v| (i, v))
            })
            .collect();
        if violations.is_empty() {
            Ok(Self {
                samples,
                groups: None,
            })
        } else {
            Err(DataError::Invalid(violations))
        }
    }

    /// Builds from tuples already known to be valid. Panics otherwise; meant
    /// for fixtures.
    pub fn from_triples(triples: &[(f64, f64, bool)]) -> Self {
        let raw: Vec<_> = triples
            .iter()
            .map(|&(x, t, d)| (x, t, if d { 1.0 } else { 0.0 }))
            .collect();
        validate(&raw).expect("fixture triples must be valid")
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self, DataError> {
        if groups.len() != self.samples.len() {
            return Err(DataError::GroupLength {
                expected: self.samples.len(),
                got: groups.len(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn samples(&self) -> &[SurvivalSample] {
        &self.samples
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn entries(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.entry).collect()
    }

    pub fn observed(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.observed).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.event).collect()
    }

    pub fn event_count(&self) -> usize {
        self.samples.iter().filter(|s| s.event).count()
    }

    /// Subjects at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        }
    }

    /// Replaces the entry times, keeping `(observed, event)` in place.
    /// Fails if any new pair violates `entry < observed`.
    pub fn with_entries(&self, entries: &[f64]) -> Result<Self, DataError> {
        let samples = self
            .samples
            .iter()
            .zip(entries)
            .map(|(s, &x)| SurvivalSample::new(x, s.observed, s.event))
            .collect();
        let mut out = Self::new(samples)?;
        out.groups = self.groups.clone();
        Ok(out)
    }

    /// Cohorts keyed by group label, in label order. Empty when unlabeled.
    pub fn split_by_group(&self) -> Vec<(String, TruncatedDataset)> {
        let Some(groups) = &self.groups else {
            return Vec::new();
        };
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in groups.iter().enumerate() {
            by_label.entry(g.as_str()).or_default().push(i);
        }
        by_label
            .into_iter()
            .map(|(label, idx)| (label.to_string(), self.subset(&idx)))
            .collect()
    }
}

/// Counts and ranges describing a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub events: usize,
    pub event_fraction: f64,
    pub censoring_fraction: f64,
    pub entry_range: (f64, f64),
    pub observed_range: (f64, f64),
}

pub fn summarize(dataset: &TruncatedDataset) -> DatasetSummary {
    let n = dataset.len();
    let events = dataset.event_count();
    let event_fraction = if n == 0 {
        0.0
    } else {
        events as f64 / n as f64
    };
    let range = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    DatasetSummary {
        n,
        events,
        event_fraction,
        censoring_fraction: 1.0 - event_fraction,
        entry_range: range(&mut dataset.samples.iter().map(|s| s.entry)),
        observed_range: range(&mut dataset.samples.iter().map(|s| s.observed)),
    }
}

/// Column names for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub entry: String,
    pub time: String,
    pub event: String,
    pub group: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            entry: "entry".into(),
            time: "time".into(),
            event: "event".into(),
            group: Some("group".into()),
        }
    }
}

/// Reads a headed CSV. The group column is optional even when named in the
/// schema; the other three are required. Line numbers in errors are 1-based
/// and count the header.
pub fn load_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<TruncatedDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Io(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let entry_col =
        col(&schema.entry).ok_or_else(|| DataError::MissingColumn(schema.entry.clone()))?;
    let time_col =
        col(&schema.time).ok_or_else(|| DataError::MissingColumn(schema.time.clone()))?;
    let event_col =
        col(&schema.event).ok_or_else(|| DataError::MissingColumn(schema.event.clone()))?;
    let group_col = schema.group.as_deref().and_then(col);

    let mut samples = Vec::new();
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, what: &str| -> Result<f64, DataError> {
            let raw = record.get(idx).ok_or_else(|| DataError::Parse {
                line,
                message: format!("missing {what} field"),
            })?;
            raw.parse::<f64>().map_err(|_| DataError::Parse {
                line,
                message: format!("{what} value `{raw}` is not numeric"),
            })
        };
        let entry = field(entry_col, "entry")?;
        let observed = field(time_col, "time")?;
        let event = field(event_col, "event")?;
        if let Some(violation) = check_triple(entry, observed, event).into_iter().next() {
            return Err(match violation {
                Violation::InvalidEvent(_) => DataError::Parse {
                    line,
                    message: violation.to_string(),
                },
                v => DataError::Validation { line, violation: v },
            });
        }
        samples.push(SurvivalSample::new(entry, observed, event == 1.0));
        if let Some(g) = group_col {
            groups.push(record.get(g).unwrap_or("").to_string());
        }
    }
    let dataset = TruncatedDataset {
        samples,
        groups: None,
    };
    if group_col.is_some() {
        dataset.with_groups(groups)
    } else {
        Ok(dataset)
    }
}

/// Writes the dataset in the `entry,time,event[,group]` schema. Times use
/// the shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(dataset: &TruncatedDataset, mut out: W) -> Result<(), DataError> {
    let io = |e: std::io::Error| DataError::Io(e.to_string());
    let header = if dataset.groups.is_some() {
        "entry,time,event,group"
    } else {
        "entry,time,event"
    };
    writeln!(out, "{header}").map_err(io)?;
    for (i, s) in dataset.samples.iter().enumerate() {
        let event = u8::from(s.event);
        match &dataset.groups {
            Some(g) => writeln!(out, "{},{},{},{}", s.entry, s.observed, event, g[i]),
            None => writeln!(out, "{},{},{}", s.entry, s.observed, event),
        }
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<TruncatedDataset, DataError> {
        load_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn parses_plain_rows() {
        let d = load("entry,time,event\n1,4,1\n2,5,1\n3,6,1\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.event_count(), 3);
        assert_eq!(d.samples()[1], SurvivalSample::new(2.0, 5.0, true));
        assert!(d.groups().is_none());
    }

    #[test]
    fn crlf_and_group_column() {
        let d = load("entry,time,event,group\r\n1,4,1,male\r\n2,5,0,female\r\n").unwrap();
        assert_eq!(
            d.groups().unwrap(),
            &["male".to_string(), "female".to_string()]
        );
        let split = d.split_by_group();
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].0, "female");
        assert_eq!(split[0].1.len(), 1);
    }

    #[test]
    fn tie_is_a_validation_error_on_its_line() {
        match load("entry,time,event\n1,4,1\n5,5,0\n") {
            Err(DataError::Validation { line, violation }) => {
                assert_eq!(line, 3);
                assert_eq!(violation, Violation::EntryNotBeforeObserved);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_parse_errors() {
        assert!(matches!(
            load("entry,time,event\n1,x,1\n"),
            Err(DataError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load("entry,time,event\n1,4,1\n1,4,2\n"),
            Err(DataError::Parse { line: 3, .. })
        ));
        assert!(
            matches!(load("entry,event\n1,1\n"), Err(DataError::MissingColumn(c)) if c == "time")
        );
    }

    #[test]
    fn validate_reports_every_violation() {
        assert_eq!(
            validate(&[(1.0, 4.0, 1.0), (2.0, 5.0, 0.0)]).unwrap().len(),
            2
        );
        match validate(&[(4.0, 1.0, 1.0)]) {
            Err(DataError::Invalid(v)) => {
                assert_eq!(v, vec![(0, Violation::EntryNotBeforeObserved)])
            }
            other => panic!("unexpected {other:?}"),
        }
        match validate(&[(0.0, 1.0, 1.0), (0.0, 1.0, 2.0), (-1.0, 1.0, 1.0)]) {
            Err(DataError::Invalid(v)) => assert_eq!(
                v,
                vec![
                    (1, Violation::InvalidEvent(2.0)),
                    (2, Violation::NegativeEntry)
                ]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn summaries() {
        let d3 = TruncatedDataset::from_triples(&[(1., 4., true), (2., 5., true), (3., 6., true)]);
        assert_eq!(summarize(&d3).event_fraction, 1.0);
        let d3c =
            TruncatedDataset::from_triples(&[(1., 4., true), (2., 5., false), (3., 6., true)]);
        let s = summarize(&d3c);
        assert!((s.event_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.event_fraction + s.censoring_fraction - 1.0).abs() < 1e-15);
        assert_eq!(s.entry_range, (1.0, 3.0));
        assert_eq!(s.observed_range, (4.0, 6.0));
    }

    #[test]
    fn aids_shaped_file_has_expected_event_fraction() {
        // 295 subjects, 258 events.
        let mut text = String::from("entry,time,event\n");
        for i in 0..295 {
            let x = 0.1 + i as f64 * 0.01;
            text.push_str(&format!("{},{},{}\n", x, x + 1.5, u8::from(i < 258)));
        }
        let s = summarize(&load(&text).unwrap());
        assert_eq!(s.n, 295);
        assert!((s.event_fraction - 0.875).abs() < 5e-4);
    }

    #[test]
    fn csv_round_trip() {
        let d =
            TruncatedDataset::from_triples(&[(0.1, 0.30000000000000004, true), (1e-9, 2.5, false)])
                .with_groups(vec!["a".into(), "b".into()])
                .unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = load_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, d);
    }
}
