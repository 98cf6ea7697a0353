//! Assay CSV ingestion and the log-space preprocessing chain.
//!
//! Per channel and in this order: reject values below the floor, drop
//! positives measured too soon after onset, add the offset, divide by the
//! reference signal, divide by the smallest accepted value, take `ln`.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LogPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Positive,
    Negative,
    Unknown,
}

impl SampleLabel {
    /// Case-insensitive; an empty cell reads as `Unknown`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Self::Positive),
            "negative" => Some(Self::Negative),
            "unknown" | "" => Some(Self::Unknown),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Unknown => "unknown",
        }
    }
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSampleRecord {
    pub sample_id: String,
    pub mfi_a: f64,
    pub mfi_b: f64,
    pub reference: f64,
    pub label: SampleLabel,
    pub days_since_onset: Option<u32>,
}

/// Header names for each field. Without a reference column every record
/// gets reference 1; without an onset column the onset filter never fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub id: String,
    pub mfi_a: String,
    pub mfi_b: String,
    pub reference: Option<String>,
    pub label: Option<String>,
    pub days_since_onset: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            id: "id".into(),
            mfi_a: "rbd".into(),
            mfi_b: "s1".into(),
            reference: Some("ref".into()),
            label: Some("label".into()),
            days_since_onset: None,
        }
    }
}

pub fn parse_csv(path: &Path, mapping: &ColumnMapping) -> Result<Vec<RawSampleRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_reader(file, mapping)
}

pub fn parse_csv_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Vec<RawSampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let id_col = find(&mapping.id)?;
    let a_col = find(&mapping.mfi_a)?;
    let b_col = find(&mapping.mfi_b)?;
    let ref_col = mapping.reference.as_deref().map(find).transpose()?;
    let label_col = mapping.label.as_deref().map(find).transpose()?;
    let onset_col = mapping.days_since_onset.as_deref().map(find).transpose()?;

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let cell = |col: usize| rec.get(col).unwrap_or("");
        let number = |col: usize, what: &str| -> Result<f64> {
            let s = cell(col);
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Row { line, message: format!("{what} value `{s}` is not a number") })
        };
        let label = match label_col {
            Some(c) => SampleLabel::parse(cell(c))
                .ok_or_else(|| Error::Row { line, message: format!("unknown label `{}`", cell(c)) })?,
            None => SampleLabel::Unknown,
        };
        let days_since_onset = match onset_col {
            Some(c) if !cell(c).is_empty() => Some(cell(c).parse::<u32>().map_err(|_| Error::Row {
                line,
                message: format!("days since onset `{}` is not a non-negative integer", cell(c)),
            })?),
            _ => None,
        };
        out.push(RawSampleRecord {
            sample_id: cell(id_col).to_string(),
            mfi_a: number(a_col, "channel A")?,
            mfi_b: number(b_col, "channel B")?,
            reference: match ref_col {
                Some(c) => number(c, "reference")?,
                None => 1.0,
            },
            label,
            days_since_onset,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub offset: f64,
    pub rejection_floor: f64,
    pub min_onset_days: Option<u32>,
    pub log_transform: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { offset: 300.0, rejection_floor: -300.0, min_onset_days: Some(7), log_transform: true }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::Config(format!("offset must be >= 0, got {}", self.offset)));
        }
        if !(self.rejection_floor <= 0.0 && self.offset + self.rejection_floor >= 0.0) {
            return Err(Error::Config(format!(
                "need rejection_floor <= 0 <= offset + rejection_floor, got floor {} offset {}",
                self.rejection_floor, self.offset
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    BelowRejectionFloor,
    OnsetTooRecent,
    NonPositiveReference,
    NonPositiveAfterOffset,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BelowRejectionFloor => "below rejection floor",
            Self::OnsetTooRecent => "onset too recent",
            Self::NonPositiveReference => "non-positive reference",
            Self::NonPositiveAfterOffset => "non-positive after offset",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: String,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedSample {
    pub sample_id: String,
    pub label: SampleLabel,
    pub point: LogPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutput {
    pub samples: Vec<ProcessedSample>,
    pub rejections: Vec<Rejection>,
    /// Per-channel divisors from the minimum step.
    pub channel_minima: (f64, f64),
}

impl PreprocessOutput {
    /// The `sample_id,reason` report.
    pub fn rejection_csv(&self) -> String {
        let mut s = String::from("sample_id,reason\n");
        for r in &self.rejections {
            s.push_str(&format!("{},{}\n", r.sample_id, r.reason));
        }
        s
    }
}

pub fn preprocess(records: &[RawSampleRecord], cfg: &PreprocessConfig) -> Result<PreprocessOutput> {
    cfg.validate()?;
    let mut rejections = Vec::new();
    let mut kept = Vec::new();
    for r in records {
        let reason = if r.mfi_a < cfg.rejection_floor || r.mfi_b < cfg.rejection_floor {
            Some(RejectionReason::BelowRejectionFloor)
        } else if matches!(
            (r.label, r.days_since_onset, cfg.min_onset_days),
            (SampleLabel::Positive, Some(days), Some(min)) if days < min
        ) {
            Some(RejectionReason::OnsetTooRecent)
        } else if !(r.reference > 0.0) {
            Some(RejectionReason::NonPositiveReference)
        } else if r.mfi_a + cfg.offset <= 0.0 || r.mfi_b + cfg.offset <= 0.0 {
            Some(RejectionReason::NonPositiveAfterOffset)
        } else {
            None
        };
        match reason {
            Some(reason) => rejections.push(Rejection { sample_id: r.sample_id.clone(), reason }),
            None => kept.push((r, (r.mfi_a + cfg.offset) / r.reference, (r.mfi_b + cfg.offset) / r.reference)),
        }
    }
    if kept.is_empty() {
        return Err(Error::AllRejected);
    }
    let min_a = kept.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
    let min_b = kept.iter().map(|k| k.2).fold(f64::INFINITY, f64::min);
    let samples = kept
        .into_iter()
        .map(|(r, a, b)| {
            let (x, y) = (a / min_a, b / min_b);
            let point = if cfg.log_transform { LogPoint::new(x.ln(), y.ln()) } else { LogPoint::new(x, y) };
            ProcessedSample { sample_id: r.sample_id.clone(), label: r.label, point }
        })
        .collect();
    Ok(PreprocessOutput { samples, rejections, channel_minima: (min_a, min_b) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, a: f64, b: f64, reference: f64, label: SampleLabel) -> RawSampleRecord {
        RawSampleRecord { sample_id: id.into(), mfi_a: a, mfi_b: b, reference, label, days_since_onset: None }
    }

    #[test]
    fn maps_named_columns() {
        let csv = "id,rbd,s1,ref,label\ns1,120.5,88.0,1000,negative\n";
        let r = parse_csv_reader(csv.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].mfi_a, 120.5);
        assert_eq!(r[0].mfi_b, 88.0);
        assert_eq!(r[0].label, SampleLabel::Negative);
    }

    #[test]
    fn header_only_is_empty() {
        let r = parse_csv_reader("id,rbd,s1,ref,label\n".as_bytes(), &ColumnMapping::default()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn labels_are_case_insensitive() {
        let csv = "id,rbd,s1,ref,label\na,1,1,1,POSITIVE\nb,1,1,1,Unknown\n";
        let r = parse_csv_reader(csv.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(r[0].label, SampleLabel::Positive);
        assert_eq!(r[1].label, SampleLabel::Unknown);
    }

    #[test]
    fn bad_number_reports_line() {
        let csv = "id,rbd,s1,ref,label\na,1,1,1,negative\nb,oops,1,1,negative\n";
        match parse_csv_reader(csv.as_bytes(), &ColumnMapping::default()) {
            Err(Error::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_named() {
        let csv = "id,rbd,ref,label\n";
        assert!(matches!(
            parse_csv_reader(csv.as_bytes(), &ColumnMapping::default()),
            Err(Error::MissingColumn(c)) if c == "s1"
        ));
    }

    #[test]
    fn below_floor_rejected() {
        let recs = vec![
            rec("low", -301.0, 10.0, 1000.0, SampleLabel::Negative),
            rec("ok", 10.0, 10.0, 1000.0, SampleLabel::Negative),
        ];
        let out = preprocess(&recs, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.rejections[0].sample_id, "low");
        assert_eq!(out.rejections[0].reason.to_string(), "below rejection floor");
    }

    #[test]
    fn worked_two_record_example() {
        let recs = vec![
            rec("a", 0.0, 50.0, 1000.0, SampleLabel::Negative),
            rec("b", 2700.0, 100.0, 1000.0, SampleLabel::Negative),
        ];
        let out = preprocess(&recs, &PreprocessConfig::default()).unwrap();
        assert!((out.channel_minima.0 - 0.3).abs() < 1e-15);
        assert_eq!(out.samples[0].point.lx, 0.0);
        assert!((out.samples[1].point.lx - 10f64.ln()).abs() < 1e-12);
        assert!((out.samples[1].point.lx - std::f64::consts::LN_10).abs() < 1e-12);
        // channel B minimum maps to zero as well
        assert_eq!(out.samples[0].point.ly, 0.0);
    }

    #[test]
    fn early_onset_positives_dropped_only_when_known() {
        let mut early = rec("early", 500.0, 500.0, 1.0, SampleLabel::Positive);
        early.days_since_onset = Some(3);
        let mut late = rec("late", 500.0, 500.0, 1.0, SampleLabel::Positive);
        late.days_since_onset = Some(9);
        let unknown_onset = rec("nodays", 500.0, 500.0, 1.0, SampleLabel::Positive);
        let mut neg = rec("neg", 5.0, 5.0, 1.0, SampleLabel::Negative);
        neg.days_since_onset = Some(0);
        let out = preprocess(&[early, late, unknown_onset, neg], &PreprocessConfig::default()).unwrap();
        let ids: Vec<_> = out.samples.iter().map(|s| s.sample_id.as_str()).collect();
        assert_eq!(ids, ["late", "nodays", "neg"]);
        assert_eq!(out.rejections[0].reason, RejectionReason::OnsetTooRecent);
    }

    #[test]
    fn non_positive_reference_is_record_level() {
        let recs =
            vec![rec("bad", 1.0, 1.0, 0.0, SampleLabel::Unknown), rec("ok", 1.0, 1.0, 1.0, SampleLabel::Unknown)];
        let out = preprocess(&recs, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.rejections[0].reason, RejectionReason::NonPositiveReference);
        assert_eq!(out.samples.len(), 1);
    }

    #[test]
    fn all_rejected_is_an_error() {
        let recs = vec![rec("x", -400.0, 1.0, 1.0, SampleLabel::Negative)];
        assert!(matches!(preprocess(&recs, &PreprocessConfig::default()), Err(Error::AllRejected)));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = PreprocessConfig { offset: 100.0, ..Default::default() };
        assert!(preprocess(&[], &cfg).is_err());
    }

    #[test]
    fn rejection_report_format() {
        let recs =
            vec![rec("low", -301.0, 10.0, 1.0, SampleLabel::Negative), rec("ok", 1.0, 1.0, 1.0, SampleLabel::Negative)];
        let out = preprocess(&recs, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.rejection_csv(), "sample_id,reason\nlow,below rejection floor\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn minimum_maps_to_zero_and_is_deterministic(
                vals in proptest::collection::vec((-299.0f64..6.0e4, -299.0f64..6.0e4, 0.1f64..5.0e3), 1..40)
            ) {
                let recs: Vec<_> = vals.iter().enumerate()
                    .map(|(i, (a, b, r))| rec(&format!("s{i}"), *a, *b, *r, SampleLabel::Unknown))
                    .collect();
                let cfg = PreprocessConfig::default();
                let out = preprocess(&recs, &cfg).unwrap();
                let min_x = out.samples.iter().map(|s| s.point.lx).fold(f64::INFINITY, f64::min);
                let min_y = out.samples.iter().map(|s| s.point.ly).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(min_x, 0.0);
                prop_assert_eq!(min_y, 0.0);
                prop_assert_eq!(out, preprocess(&recs, &cfg).unwrap());
            }
        }
    }
}
