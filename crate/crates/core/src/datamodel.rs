//! Shared domain types.
//!
//! Conventions used throughout the crate:
//! - frame indices are 0-based;
//! - class order is fixed by [`DatasetManifest::class_names`] and every
//!   [`ScoreMatrix`] column follows it;
//! - each video carries at most one ground-truth label.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Validation,
    Test,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Validation => "validation",
            Subset::Test => "test",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive frame range `[start_frame, end_frame]`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct TemporalInterval {
    pub start_frame: usize,
    pub end_frame: usize,
}

impl TemporalInterval {
    pub fn new(start_frame: usize, end_frame: usize) -> Self {
        TemporalInterval {
            start_frame,
            end_frame,
        }
    }

    /// Number of frames covered; zero when the interval is inverted.
    pub fn len(&self) -> usize {
        (self.end_frame + 1).saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<[usize; 2]> for TemporalInterval {
    fn from([start_frame, end_frame]: [usize; 2]) -> Self {
        TemporalInterval {
            start_frame,
            end_frame,
        }
    }
}

impl From<TemporalInterval> for [usize; 2] {
    fn from(t: TemporalInterval) -> Self {
        [t.start_frame, t.end_frame]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    #[serde(rename = "id")]
    pub video_id: String,
    pub subset: Subset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub num_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<Vec<TemporalInterval>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    #[serde(rename = "videos")]
    pub entries: Vec<VideoRecord>,
}

/// One breached manifest invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestViolation {
    NoClasses,
    DuplicateClass(String),
    DuplicateVideo(String),
    LabelOutOfRange {
        video_id: String,
        label: usize,
        num_classes: usize,
    },
    NoFrames(String),
    InvertedProposal {
        video_id: String,
        interval: TemporalInterval,
    },
    ProposalOutOfRange {
        video_id: String,
        interval: TemporalInterval,
        num_frames: usize,
    },
}

impl fmt::Display for ManifestViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestViolation::NoClasses => write!(f, "class_names is empty"),
            ManifestViolation::DuplicateClass(c) => write!(f, "duplicate class name {c:?}"),
            ManifestViolation::DuplicateVideo(v) => write!(f, "duplicate video id {v:?}"),
            ManifestViolation::LabelOutOfRange {
                video_id,
                label,
                num_classes,
            } => write!(
                f,
                "video {video_id:?}: label {label} outside class range [0, {num_classes})"
            ),
            ManifestViolation::NoFrames(v) => write!(f, "video {v:?}: num_frames must be >= 1"),
            ManifestViolation::InvertedProposal { video_id, interval } => write!(
                f,
                "video {video_id:?}: proposal [{}, {}] has start after end",
                interval.start_frame, interval.end_frame
            ),
            ManifestViolation::ProposalOutOfRange {
                video_id,
                interval,
                num_frames,
            } => write!(
                f,
                "video {video_id:?}: proposal [{}, {}] outside [0, {num_frames})",
                interval.start_frame, interval.end_frame
            ),
        }
    }
}

/// Checks every manifest invariant, returning one violation per breach.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<ManifestViolation> {
    let mut out = Vec::new();
    let k = manifest.class_names.len();
    if k == 0 {
        out.push(ManifestViolation::NoClasses);
    }
    let mut seen = HashSet::new();
    for name in &manifest.class_names {
        if !seen.insert(name.as_str()) {
            out.push(ManifestViolation::DuplicateClass(name.clone()));
        }
    }
    let mut seen = HashSet::new();
    for rec in &manifest.entries {
        if !seen.insert(rec.video_id.as_str()) {
            out.push(ManifestViolation::DuplicateVideo(rec.video_id.clone()));
        }
        if let Some(label) = rec.label {
            if label >= k {
                out.push(ManifestViolation::LabelOutOfRange {
                    video_id: rec.video_id.clone(),
                    label,
                    num_classes: k,
                });
            }
        }
        if rec.num_frames == 0 {
            out.push(ManifestViolation::NoFrames(rec.video_id.clone()));
        }
        for &interval in rec.proposals.iter().flatten() {
            if interval.start_frame > interval.end_frame {
                out.push(ManifestViolation::InvertedProposal {
                    video_id: rec.video_id.clone(),
                    interval,
                });
            } else if interval.end_frame >= rec.num_frames {
                out.push(ManifestViolation::ProposalOutOfRange {
                    video_id: rec.video_id.clone(),
                    interval,
                    num_frames: rec.num_frames,
                });
            }
        }
    }
    out
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn record(&self, video_id: &str) -> Option<&VideoRecord> {
        self.entries.iter().find(|r| r.video_id == video_id)
    }

    pub fn videos_in(&self, subset: Subset) -> impl Iterator<Item = &VideoRecord> + '_ {
        self.entries.iter().filter(move |r| r.subset == subset)
    }

    /// Fails with the first violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        match validate_manifest(self).first() {
            Some(v) => Err(Error::invalid(format!("manifest: {v}"))),
            None => Ok(()),
        }
    }

    /// Ground-truth labels for `video_ids`, in the same order.
    pub fn labels_for<S: AsRef<str>>(&self, video_ids: &[S]) -> Result<Vec<usize>> {
        let by_id: HashMap<&str, &VideoRecord> = self
            .entries
            .iter()
            .map(|r| (r.video_id.as_str(), r))
            .collect();
        video_ids
            .iter()
            .map(|id| {
                let id = id.as_ref();
                let rec = by_id
                    .get(id)
                    .ok_or_else(|| Error::UnknownVideo(id.to_string()))?;
                rec.label.ok_or_else(|| Error::MissingLabel(id.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Frame,
    Clip,
    Video,
}

impl UnitKind {
    pub fn code(self) -> u8 {
        match self {
            UnitKind::Frame => 0,
            UnitKind::Clip => 1,
            UnitKind::Video => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(UnitKind::Frame),
            1 => Ok(UnitKind::Clip),
            2 => Ok(UnitKind::Video),
            other => Err(Error::InvalidUnitKind(other)),
        }
    }
}

/// Rows `offset..offset + count` of a [`FeatureSet`] belong to `video_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSpan {
    #[serde(rename = "id")]
    pub video_id: String,
    pub offset: usize,
    pub count: usize,
}

/// Per-unit descriptors for one stream over a collection of videos.
///
/// Values are stored as `f32`, exactly as they appear on disk; numerical
/// code works on `f64` copies obtained through [`FeatureSet::video_matrix`]
/// or [`FeatureSet::to_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    unit_kind: UnitKind,
    dim: usize,
    data: Vec<f32>,
    spans: Vec<VideoSpan>,
    lookup: HashMap<String, usize>,
}

impl FeatureSet {
    /// Validates and assembles a feature set. Spans may be given in any
    /// order; they are stored sorted by offset.
    pub fn new(
        unit_kind: UnitKind,
        dim: usize,
        data: Vec<f32>,
        mut spans: Vec<VideoSpan>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("feature row {} column {}", pos / dim, pos % dim),
            });
        }
        let units = data.len() / dim;
        spans.sort_by_key(|s| s.offset);
        let mut lookup = HashMap::with_capacity(spans.len());
        let mut next = 0;
        for (i, span) in spans.iter().enumerate() {
            if span.offset != next {
                return Err(Error::InvalidIndex(format!(
                    "video {:?} starts at row {} but row {} is next",
                    span.video_id, span.offset, next
                )));
            }
            next += span.count;
            if lookup.insert(span.video_id.clone(), i).is_some() {
                return Err(Error::InvalidIndex(format!(
                    "duplicate video {:?}",
                    span.video_id
                )));
            }
        }
        if next != units {
            return Err(Error::InvalidIndex(format!(
                "index covers {next} rows but the matrix has {units}"
            )));
        }
        Ok(FeatureSet {
            unit_kind,
            dim,
            data,
            spans,
            lookup,
        })
    }

    /// Converts an `f64` matrix to storage precision.
    pub fn from_matrix(unit_kind: UnitKind, matrix: &Matrix, spans: Vec<VideoSpan>) -> Result<Self> {
        let data = matrix.as_slice().iter().map(|&v| v as f32).collect();
        FeatureSet::new(unit_kind, matrix.cols(), data, spans)
    }

    /// One row per video, in the given order.
    pub fn video_level<S: AsRef<str>>(video_ids: &[S], matrix: &Matrix) -> Result<Self> {
        if video_ids.len() != matrix.rows() {
            return Err(Error::Misaligned(format!(
                "{} video ids for {} rows",
                video_ids.len(),
                matrix.rows()
            )));
        }
        let spans = video_ids
            .iter()
            .enumerate()
            .map(|(i, id)| VideoSpan {
                video_id: id.as_ref().to_string(),
                offset: i,
                count: 1,
            })
            .collect();
        FeatureSet::from_matrix(UnitKind::Video, matrix, spans)
    }

    pub fn unit_kind(&self) -> UnitKind {
        self.unit_kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn spans(&self) -> &[VideoSpan] {
        &self.spans
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.spans.iter().map(|s| s.video_id.as_str())
    }

    pub fn span(&self, video_id: &str) -> Option<&VideoSpan> {
        self.lookup.get(video_id).map(|&i| &self.spans[i])
    }

    pub fn contains(&self, video_id: &str) -> bool {
        self.lookup.contains_key(video_id)
    }

    pub fn unit(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// The rows of one video as an `f64` matrix.
    pub fn video_matrix(&self, video_id: &str) -> Result<Matrix> {
        let span = self
            .span(video_id)
            .ok_or_else(|| Error::UnknownVideo(video_id.to_string()))?;
        let start = span.offset * self.dim;
        let end = (span.offset + span.count) * self.dim;
        let data = self.data[start..end].iter().map(|&v| f64::from(v)).collect();
        Matrix::new(span.count, self.dim, data)
    }

    pub fn to_matrix(&self) -> Matrix {
        let data = self.data.iter().map(|&v| f64::from(v)).collect();
        Matrix {
            rows: self.unit_count(),
            cols: self.dim,
            data,
        }
    }

    /// Keeps only the listed videos, in the listed order.
    pub fn select_videos<S: AsRef<str>>(&self, video_ids: &[S]) -> Result<FeatureSet> {
        let mut data = Vec::new();
        let mut spans = Vec::with_capacity(video_ids.len());
        let mut offset = 0;
        for id in video_ids {
            let id = id.as_ref();
            let span = self
                .span(id)
                .ok_or_else(|| Error::UnknownVideo(id.to_string()))?;
            data.extend_from_slice(
                &self.data[span.offset * self.dim..(span.offset + span.count) * self.dim],
            );
            spans.push(VideoSpan {
                video_id: id.to_string(),
                offset,
                count: span.count,
            });
            offset += span.count;
        }
        FeatureSet::new(self.unit_kind, self.dim, data, spans)
    }
}

/// Videos × classes predictions for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub stream_name: String,
    video_ids: Vec<String>,
    scores: Matrix,
    normalized: bool,
}

/// Tolerance on row sums for [`ScoreMatrix::is_row_stochastic`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl ScoreMatrix {
    pub fn new(stream_name: impl Into<String>, video_ids: Vec<String>, scores: Matrix) -> Result<Self> {
        if video_ids.len() != scores.rows() {
            return Err(Error::Misaligned(format!(
                "{} video ids for {} score rows",
                video_ids.len(),
                scores.rows()
            )));
        }
        if !scores.is_finite() {
            return Err(Error::NonFinite {
                context: "score matrix".to_string(),
            });
        }
        Ok(ScoreMatrix {
            stream_name: stream_name.into(),
            video_ids,
            scores,
            normalized: false,
        })
    }

    /// Like [`ScoreMatrix::new`] but also checks and flags row-stochasticity.
    pub fn new_normalized(
        stream_name: impl Into<String>,
        video_ids: Vec<String>,
        scores: Matrix,
    ) -> Result<Self> {
        let mut m = ScoreMatrix::new(stream_name, video_ids, scores)?;
        if !m.is_row_stochastic() {
            return Err(Error::invalid(
                "scores flagged normalized must be non-negative with unit row sums",
            ));
        }
        m.normalized = true;
        Ok(m)
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn num_videos(&self) -> usize {
        self.video_ids.len()
    }

    pub fn num_classes(&self) -> usize {
        self.scores.cols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.scores.row(i)
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.scores.iter_rows().all(|row| {
            row.iter().all(|&v| v >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOLERANCE
        })
    }

    /// Restricts to the listed videos, in the listed order.
    pub fn select_videos<S: AsRef<str>>(&self, video_ids: &[S]) -> Result<ScoreMatrix> {
        let index: HashMap<&str, usize> = self
            .video_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = video_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownVideo(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreMatrix {
            stream_name: self.stream_name.clone(),
            video_ids: video_ids.iter().map(|s| s.as_ref().to_string()).collect(),
            scores: self.scores.select_rows(&rows),
            normalized: self.normalized,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.stream_name = name.into();
        self
    }

    /// Checks that both matrices cover the same videos in the same order
    /// with the same class count.
    pub fn ensure_aligned(&self, other: &ScoreMatrix) -> Result<()> {
        if self.num_classes() != other.num_classes() {
            return Err(Error::ClassCountMismatch {
                expected: self.num_classes(),
                found: other.num_classes(),
            });
        }
        if self.video_ids != other.video_ids {
            return Err(Error::Misaligned(format!(
                "streams {:?} and {:?} cover different videos",
                self.stream_name, other.stream_name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub stream_name: String,
    pub validation_accuracy: f64,
}

impl StreamMeta {
    pub fn new(stream_name: impl Into<String>, validation_accuracy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&validation_accuracy) {
            return Err(Error::invalid(format!(
                "validation accuracy {validation_accuracy} outside [0, 1]"
            )));
        }
        Ok(StreamMeta {
            stream_name: stream_name.into(),
            validation_accuracy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, label: Option<usize>) -> VideoRecord {
        VideoRecord {
            video_id: id.to_string(),
            subset: Subset::Train,
            label,
            num_frames: 30,
            proposals: None,
        }
    }

    fn manifest(entries: Vec<VideoRecord>) -> DatasetManifest {
        DatasetManifest {
            class_names: vec!["a".into(), "b".into(), "c".into()],
            entries,
        }
    }

    #[test]
    fn well_formed_manifest_has_no_violations() {
        let m = manifest(vec![
            record("v1", Some(0)),
            record("v2", Some(1)),
            record("v3", Some(2)),
        ]);
        assert!(validate_manifest(&m).is_empty());
    }

    #[test]
    fn duplicate_video_id_is_named() {
        let m = manifest(vec![record("v1", Some(0)), record("v1", Some(1))]);
        let v = validate_manifest(&m);
        assert_eq!(v, vec![ManifestViolation::DuplicateVideo("v1".into())]);
        assert!(v[0].to_string().contains("v1"));
    }

    #[test]
    fn label_one_past_last_class() {
        let m = manifest(vec![record("v1", Some(3))]);
        let v = validate_manifest(&m);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], ManifestViolation::LabelOutOfRange { label: 3, .. }));
        assert!(v[0].to_string().contains("class range"));
    }

    #[test]
    fn proposal_and_frame_checks() {
        let mut r = record("v1", None);
        r.num_frames = 10;
        r.proposals = Some(vec![
            TemporalInterval::new(0, 9),
            TemporalInterval::new(5, 10),
            TemporalInterval::new(4, 3),
        ]);
        let mut z = record("v2", None);
        z.num_frames = 0;
        let v = validate_manifest(&manifest(vec![r, z]));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn empty_and_duplicate_classes() {
        let m = DatasetManifest {
            class_names: vec![],
            entries: vec![],
        };
        assert_eq!(validate_manifest(&m), vec![ManifestViolation::NoClasses]);
        let m = DatasetManifest {
            class_names: vec!["x".into(), "x".into()],
            entries: vec![],
        };
        assert_eq!(
            validate_manifest(&m),
            vec![ManifestViolation::DuplicateClass("x".into())]
        );
    }

    #[test]
    fn manifest_json_shape() {
        let json = r#"{"class_names":["a","b"],"videos":[
            {"id":"v1","subset":"train","label":1,"num_frames":40,"proposals":[[0,9],[20,29]]},
            {"id":"v2","subset":"test","num_frames":5}]}"#;
        let m: DatasetManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.entries[0].proposals.as_ref().unwrap()[1], TemporalInterval::new(20, 29));
        assert_eq!(m.entries[1].label, None);
        let back = serde_json::to_string(&m).unwrap();
        assert!(back.contains(r#""proposals":[[0,9],[20,29]]"#));
        assert!(!back.contains(r#""v2","subset":"test","label""#));
    }

    #[test]
    fn feature_set_partition_checks() {
        let spans = vec![
            VideoSpan { video_id: "b".into(), offset: 1, count: 2 },
            VideoSpan { video_id: "a".into(), offset: 0, count: 1 },
        ];
        let fs = FeatureSet::new(UnitKind::Frame, 2, vec![0.0; 6], spans).unwrap();
        assert_eq!(fs.video_ids().collect::<Vec<_>>(), ["a", "b"]);

        let gap = vec![VideoSpan { video_id: "a".into(), offset: 1, count: 2 }];
        assert!(matches!(
            FeatureSet::new(UnitKind::Frame, 2, vec![0.0; 6], gap),
            Err(Error::InvalidIndex(_))
        ));
        let short = vec![VideoSpan { video_id: "a".into(), offset: 0, count: 2 }];
        assert!(FeatureSet::new(UnitKind::Frame, 2, vec![0.0; 6], short).is_err());
        let nan = vec![VideoSpan { video_id: "a".into(), offset: 0, count: 1 }];
        assert!(matches!(
            FeatureSet::new(UnitKind::Frame, 2, vec![0.0, f32::NAN], nan),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn score_matrix_alignment() {
        let m = Matrix::from_rows(&[[0.25, 0.75], [0.5, 0.5]]).unwrap();
        let s = ScoreMatrix::new_normalized("s", vec!["v1".into(), "v2".into()], m).unwrap();
        assert!(s.is_normalized());
        let sub = s.select_videos(&["v2"]).unwrap();
        assert_eq!(sub.row(0), &[0.5, 0.5]);
        assert!(s.ensure_aligned(&sub).is_err());
        let bad = Matrix::from_rows(&[[0.5, 0.6]]).unwrap();
        assert!(ScoreMatrix::new_normalized("s", vec!["v".into()], bad).is_err());
    }
}
