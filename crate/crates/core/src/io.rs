//! Text formats for events, camera models, labels and ground-truth sidecars,
//! plus CSV/JSON writers for metrics.
//!
//! Every file starts with a `# <kind> v1` header line. Other lines starting
//! with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoise::IterationRecord;
use crate::event::{CameraModel, Event, Label, LabelSet};
use crate::metrics::RocCurve;
use crate::warp::MotionParams;

pub const EVENTS_HEADER: &str = "# events v1";
pub const CAMERA_HEADER: &str = "# camera v1";
pub const LABELS_HEADER: &str = "# labels v1";
pub const GT_HEADER: &str = "# gt v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("missing header, expected `{0}`")]
    MissingHeader(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("expected index {expected}, found {found}")]
    IndexMismatch { expected: usize, found: usize },
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

/// Numbered non-comment lines after the header check.
fn body<'a>(text: &'a str, header: &'static str) -> Result<impl Iterator<Item = (usize, &'a str)>, FormatError> {
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.trim_end().starts_with(header)) {
        return Err(FormatError::MissingHeader(header));
    }
    Ok(lines
        .enumerate()
        .map(|(i, l)| (i + 2, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, name: &str) -> Result<T, FormatError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {name}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {name} `{tok}`")))
}

/// `t x y p` per line, timestamps printed in shortest round-trip form.
pub fn write_events(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 24 + 16);
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p);
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<Event>, FormatError> {
    body(text, EVENTS_HEADER)?
        .map(|(n, l)| {
            let mut it = l.split_whitespace();
            let t = field(it.next(), n, "timestamp")?;
            let x = field(it.next(), n, "x")?;
            let y = field(it.next(), n, "y")?;
            let p = field(it.next(), n, "polarity")?;
            if it.next().is_some() {
                return Err(parse_err(n, "trailing fields"));
            }
            Ok(Event { x, y, t, p })
        })
        .collect()
}

/// `key = value` lines for width, height, fx, fy, cx, cy.
pub fn write_camera(cam: &CameraModel) -> String {
    format!(
        "{CAMERA_HEADER}\nwidth = {}\nheight = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\n",
        cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy
    )
}

pub fn parse_camera(text: &str) -> Result<CameraModel, FormatError> {
    let mut values = BTreeMap::new();
    let mut last = 1;
    for (n, l) in body(text, CAMERA_HEADER)? {
        let (k, v) = l.split_once('=').ok_or_else(|| parse_err(n, "expected `key = value`"))?;
        let k = k.trim();
        if !["width", "height", "fx", "fy", "cx", "cy"].contains(&k) {
            return Err(parse_err(n, format!("unknown key `{k}`")));
        }
        values.insert(k.to_string(), (n, v.trim().to_string()));
        last = n;
    }
    let get = |k: &str| values.get(k).ok_or_else(|| parse_err(last, format!("missing key `{k}`")));
    let int = |k: &str| -> Result<u32, FormatError> {
        let (n, v) = get(k)?;
        field(Some(v.as_str()), *n, k)
    };
    let real = |k: &str| -> Result<f64, FormatError> {
        let (n, v) = get(k)?;
        field(Some(v.as_str()), *n, k)
    };
    let cam = CameraModel { width: int("width")?, height: int("height")?, fx: real("fx")?, fy: real("fy")?, cx: real("cx")?, cy: real("cy")? };
    cam.validate().map_err(|e| parse_err(last, e.to_string()))?;
    Ok(cam)
}

/// `index label score` per event, with tau and threshold in a comment line.
pub fn write_labels(labels: &LabelSet) -> String {
    let mut out = String::with_capacity(labels.len() * 24 + 64);
    let _ = writeln!(out, "{LABELS_HEADER}\n# tau {} threshold {}", labels.tau, labels.threshold);
    for (i, (l, s)) in labels.labels.iter().zip(&labels.scores).enumerate() {
        let _ = writeln!(out, "{i} {} {s}", l.as_char());
    }
    out
}

fn parse_label(tok: Option<&str>, line: usize) -> Result<Label, FormatError> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing label"))?;
    let mut chars = tok.chars();
    match (chars.next().and_then(Label::from_char), chars.next()) {
        (Some(l), None) => Ok(l),
        _ => Err(parse_err(line, format!("bad label `{tok}`"))),
    }
}

fn check_index(tok: Option<&str>, line: usize, expected: usize) -> Result<(), FormatError> {
    let found: usize = field(tok, line, "index")?;
    if found != expected {
        return Err(FormatError::IndexMismatch { expected, found });
    }
    Ok(())
}

pub fn parse_labels(text: &str) -> Result<LabelSet, FormatError> {
    let mut tau = f64::NAN;
    let mut threshold = f64::NAN;
    for l in text.lines().skip(1).take_while(|l| l.starts_with('#')) {
        let toks: Vec<&str> = l.trim_start_matches('#').split_whitespace().collect();
        for pair in toks.chunks(2) {
            match pair {
                ["tau", v] => tau = v.parse().unwrap_or(f64::NAN),
                ["threshold", v] => threshold = v.parse().unwrap_or(f64::NAN),
                _ => {}
            }
        }
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (n, l) in body(text, LABELS_HEADER)? {
        let mut it = l.split_whitespace();
        check_index(it.next(), n, labels.len())?;
        labels.push(parse_label(it.next(), n)?);
        scores.push(field(it.next(), n, "score")?);
    }
    Ok(LabelSet { scores, labels, threshold, tau })
}

/// Sidecar header payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInfo {
    pub motion: MotionParams,
    pub noise_hz: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub info: GroundTruthInfo,
    pub labels: Vec<Label>,
}

/// Header line carries the JSON-encoded [`GroundTruthInfo`], then `index label` per event.
pub fn write_ground_truth(info: &GroundTruthInfo, labels: &[Label]) -> String {
    let json = serde_json::to_string(info).expect("ground truth info serializes");
    let mut out = String::with_capacity(labels.len() * 10 + json.len() + 16);
    let _ = writeln!(out, "{GT_HEADER} {json}");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{i} {}", l.as_char());
    }
    out
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth, FormatError> {
    let first = text.lines().next().ok_or(FormatError::MissingHeader(GT_HEADER))?;
    let json = first.strip_prefix(GT_HEADER).ok_or(FormatError::MissingHeader(GT_HEADER))?;
    let info: GroundTruthInfo = serde_json::from_str(json.trim()).map_err(|e| parse_err(1, e.to_string()))?;
    let mut labels = Vec::new();
    for (n, l) in body(text, GT_HEADER)? {
        let mut it = l.split_whitespace();
        check_index(it.next(), n, labels.len())?;
        labels.push(parse_label(it.next(), n)?);
    }
    Ok(GroundTruth { info, labels })
}

/// Flat `name -> value` JSON object with sorted keys.
pub fn metrics_json(metrics: &BTreeMap<String, f64>) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("# roc v1\nfpr,tpr\n");
    for (f, t) in &roc.points {
        let _ = writeln!(out, "{f},{t}");
    }
    out
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("# history v1\niteration,objective,threshold,signal_count,param_change\n");
    for r in history {
        let _ = writeln!(out, "{},{},{},{},{}", r.iteration, r.objective, r.threshold, r.signal_count, r.param_change);
    }
    out
}
