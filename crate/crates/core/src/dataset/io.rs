use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{LabelInfo, Rating, Recording};

const RAWBIN_MAGIC: &[u8; 8] = b"ASMAPEEG";
const RAWBIN_VERSION: u16 = 1;
const FLAG_RATING: u8 = 1;
const FLAG_TAG: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Csv,
    Rawbin,
}

impl RecordingFormat {
    /// `.csv` is CSV; `.bin` and `.rawbin` are rawbin.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(RecordingFormat::Csv),
            Some("bin" | "rawbin") => Ok(RecordingFormat::Rawbin),
            _ => Err(Error::invalid(format!(
                "cannot infer recording format of {}; use a .csv or .bin extension",
                path.display()
            ))),
        }
    }
}

fn parse_error(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), location: location.into(), message: message.into() }
}

fn default_trial_id(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Reads a recording. The trial id defaults to the file stem and the subject
/// id to `"unknown"`; manifests override both.
pub fn load_recording(path: &Path, format: RecordingFormat) -> Result<Recording> {
    match format {
        RecordingFormat::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, path)
        }
        RecordingFormat::Rawbin => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_rawbin(&bytes, path)
        }
    }
}

pub fn save_recording(rec: &Recording, path: &Path, format: RecordingFormat) -> Result<()> {
    let bytes = match format {
        RecordingFormat::Csv => to_csv(rec).into_bytes(),
        RecordingFormat::Rawbin => to_rawbin(rec),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_csv(text: &str, path: &Path) -> Result<Recording> {
    let mut fs = None;
    let mut labels: Option<Vec<String>> = None;
    let (mut valence, mut arousal, mut tag) = (None, None, None);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_lines = Vec::new();

    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let loc = || format!("line {lineno}");
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if !rows.is_empty() {
                return Err(parse_error(path, loc(), "header after sample rows"));
            }
            let (key, value) =
                header.split_once('=').ok_or_else(|| parse_error(path, loc(), "header must be #key=value"))?;
            let value = value.trim();
            let num = |what: &str| {
                value.parse::<f64>().map_err(|_| parse_error(path, loc(), format!("{what} '{value}' is not a number")))
            };
            match key.trim() {
                "sample_rate_hz" => {
                    let v = value.parse::<u32>().ok().filter(|&v| v > 0).ok_or_else(|| {
                        parse_error(path, loc(), format!("sample rate '{value}' is not a positive integer"))
                    })?;
                    fs = Some(v);
                }
                "channels" => labels = Some(value.split(',').map(|s| s.trim().to_string()).collect()),
                "valence" => valence = Some(num("valence")?),
                "arousal" => arousal = Some(num("arousal")?),
                "class" => tag = Some(value.to_string()),
                other => return Err(parse_error(path, loc(), format!("unknown header '{other}'"))),
            }
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, s)| {
                s.trim().parse::<f64>().map_err(|_| {
                    parse_error(
                        path,
                        format!("line {lineno}, column {}", col + 1),
                        format!("'{}' is not a number", s.trim()),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    loc(),
                    format!("row {} has {} samples, row 1 has {}", rows.len() + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
        row_lines.push(lineno);
    }

    let fs = fs.ok_or_else(|| parse_error(path, "header", "missing #sample_rate_hz"))?;
    let labels = labels.ok_or_else(|| parse_error(path, "header", "missing #channels"))?;
    if labels.len() != rows.len() {
        return Err(parse_error(
            path,
            "end of file",
            format!("#channels lists {} labels but {} sample rows follow", labels.len(), rows.len()),
        ));
    }
    let rating = match (valence, arousal) {
        (Some(valence), Some(arousal)) => Some(Rating { valence, arousal }),
        (None, None) => None,
        _ => return Err(parse_error(path, "header", "#valence and #arousal must appear together")),
    };
    let label = LabelInfo { class_tag: tag, rating };
    Recording::new(default_trial_id(path), "unknown", labels, fs, rows, label)
        .map_err(|e| parse_error(path, "body", e.to_string()))
}

fn to_csv(rec: &Recording) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#sample_rate_hz={}", rec.sample_rate_hz);
    let _ = writeln!(s, "#channels={}", rec.channel_labels.join(","));
    if let Some(r) = rec.label.rating {
        let _ = writeln!(s, "#valence={}", r.valence);
        let _ = writeln!(s, "#arousal={}", r.arousal);
    }
    if let Some(t) = &rec.label.class_tag {
        let _ = writeln!(s, "#class={t}");
    }
    for row in &rec.samples {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn to_rawbin(rec: &Recording) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + rec.n_channels() * rec.n_samples() * 8);
    out.extend_from_slice(RAWBIN_MAGIC);
    out.extend_from_slice(&RAWBIN_VERSION.to_le_bytes());
    for v in [rec.n_channels() as u32, rec.n_samples() as u32, rec.sample_rate_hz] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let flags = (rec.label.rating.is_some() as u8 * FLAG_RATING) | (rec.label.class_tag.is_some() as u8 * FLAG_TAG);
    out.push(flags);
    if let Some(r) = rec.label.rating {
        out.extend_from_slice(&r.valence.to_le_bytes());
        out.extend_from_slice(&r.arousal.to_le_bytes());
    }
    if let Some(t) = &rec.label.class_tag {
        push_str(&mut out, t);
    }
    for l in &rec.channel_labels {
        push_str(&mut out, l);
    }
    for row in &rec.samples {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        parse_error(self.path, format!("offset {}", self.pos), message)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("unexpected end of file, needed {n} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let start = self.pos;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| parse_error(self.path, format!("offset {start}"), "string is not UTF-8"))
    }
}

fn parse_rawbin(bytes: &[u8], path: &Path) -> Result<Recording> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(8)? != RAWBIN_MAGIC {
        return Err(parse_error(path, "offset 0", "missing ASMAPEEG magic"));
    }
    let version = c.u16()?;
    if version != RAWBIN_VERSION {
        return Err(c.err(format!("unsupported rawbin version {version}")));
    }
    let (n_ch, n_samp, fs) = (c.u32()? as usize, c.u32()? as usize, c.u32()?);
    let flags = c.u8()?;
    if flags & !(FLAG_RATING | FLAG_TAG) != 0 {
        return Err(c.err(format!("unknown label flags {flags:#04x}")));
    }
    let rating = if flags & FLAG_RATING != 0 { Some(Rating { valence: c.f64()?, arousal: c.f64()? }) } else { None };
    let class_tag = if flags & FLAG_TAG != 0 { Some(c.string()?) } else { None };
    let labels = (0..n_ch).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let expected =
        n_ch.checked_mul(n_samp).and_then(|n| n.checked_mul(8)).ok_or_else(|| c.err("sample block size overflows"))?;
    if bytes.len() - c.pos != expected {
        return Err(c.err(format!("sample block has {} bytes, header implies {expected}", bytes.len() - c.pos)));
    }
    let samples =
        (0..n_ch).map(|_| (0..n_samp).map(|_| c.f64()).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
    Recording::new(default_trial_id(path), "unknown", labels, fs, samples, LabelInfo { class_tag, rating })
        .map_err(|e| parse_error(path, "header", e.to_string()))
}

/// One manifest line. `path` is resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub subject_id: String,
    pub trial_id: String,
}

/// Parses `path,subject_id,trial_id` lines. Blank lines, `#` comments and a
/// literal header line are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "path,subject_id,trial_id" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [file, subject, trial] = fields[..] else {
            return Err(parse_error(
                path,
                format!("line {}", n + 1),
                format!("expected 3 fields path,subject_id,trial_id, found {}", fields.len()),
            ));
        };
        if file.is_empty() || trial.is_empty() {
            return Err(parse_error(path, format!("line {}", n + 1), "empty path or trial id"));
        }
        entries.push(ManifestEntry {
            path: base.join(file),
            subject_id: subject.to_string(),
            trial_id: trial.to_string(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !seen.insert(&e.trial_id)) {
        return Err(parse_error(path, "body", format!("duplicate trial id '{}'", dup.trial_id)));
    }
    Ok(entries)
}

/// Writes a manifest with paths relative to the manifest directory when
/// possible.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut s = String::from("path,subject_id,trial_id\n");
    for e in entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        let _ = writeln!(s, "{},{},{}", rel.display(), e.subject_id, e.trial_id);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads every recording named by a manifest, in manifest order.
pub fn load_manifest(path: &Path) -> Result<Vec<Recording>> {
    read_manifest(path)?
        .par_iter()
        .map(|e| {
            let mut rec = load_recording(&e.path, RecordingFormat::from_path(&e.path)?)?;
            rec.trial_id = e.trial_id.clone();
            rec.subject_id = e.subject_id.clone();
            Ok(rec)
        })
        .collect()
}
