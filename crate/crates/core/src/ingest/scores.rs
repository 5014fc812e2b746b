//! `.scores.csv`: header `video_id,<class_0>,...`, one row per video,
//! `.` decimal separator, `\n` line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datamodel::{Matrix, ScoreMatrix};
use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`; exponent form for
/// very small or very large magnitudes.
pub fn format_score(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn check_field(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.contains([',', '\n', '\r', '"']) {
        return Err(Error::invalid(format!(
            "{kind} {s:?} cannot be written to CSV (empty or contains a separator)"
        )));
    }
    Ok(())
}

pub fn scores_to_csv(scores: &ScoreMatrix, class_names: &[String]) -> Result<String> {
    if scores.num_classes() != class_names.len() {
        return Err(Error::ClassCountMismatch {
            expected: class_names.len(),
            found: scores.num_classes(),
        });
    }
    let mut out = String::from("video_id");
    for c in class_names {
        check_field("class name", c)?;
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, id) in scores.video_ids().iter().enumerate() {
        check_field("video id", id)?;
        out.push_str(id);
        for &v in scores.row(i) {
            let _ = write!(out, ",{}", format_score(v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_scores(scores: &ScoreMatrix, class_names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = scores_to_csv(scores, class_names)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Stream name implied by a score file name (`resnet.validation.scores.csv`
/// → `resnet.validation`).
pub fn stream_name_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".scores.csv")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(&name)
        .to_string()
}

pub fn parse_scores(text: &str, class_names: &[String], stream_name: &str, path: &Path) -> Result<ScoreMatrix> {
    let csv_err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "missing header row".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols[0] != "video_id" {
        return Err(csv_err(1, format!("header must start with video_id, found {:?}", cols[0])));
    }
    let names = &cols[1..];
    if names.len() != class_names.len() {
        return Err(Error::ClassCountMismatch {
            expected: class_names.len(),
            found: names.len(),
        });
    }
    if let Some((got, want)) = names.iter().zip(class_names).find(|(g, w)| **g != w.as_str()) {
        return Err(Error::ClassNameMismatch(format!("found {got:?} where {want:?} was expected")));
    }

    let k = class_names.len();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (ln, line) in lines {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != k {
            return Err(Error::ClassCountMismatch {
                expected: k,
                found: values.len(),
            });
        }
        for v in values {
            let x: f64 = v
                .parse()
                .map_err(|_| csv_err(ln + 1, format!("cannot parse {v:?} as a number")))?;
            data.push(x);
        }
        ids.push(id.to_string());
    }
    let n = ids.len();
    ScoreMatrix::new(stream_name, ids, Matrix::new(n, k, data)?)
}

pub fn read_scores(path: impl AsRef<Path>, class_names: &[String]) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text, class_names, &stream_name_from_path(path), path)
}
