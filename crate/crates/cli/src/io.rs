//! File formats: profile text files, envelope CSV input, CSV tables and reports.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use pulsedamp::design::Envelope;
use pulsedamp::{DampingProfile, Segment, SegmentKind};

use crate::CliError;

pub const PROFILE_HEADER: &str = "pulsedamp-profile v1";
pub const REPORT_HEADER: &str = "pulsedamp report v1";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_profile(profile: &DampingProfile) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for s in profile.segments() {
        let line = match s.kind {
            SegmentKind::Constant { value } => format!("C {} {}", num(value), num(s.duration)),
            SegmentKind::Ramp { start, slope } => format!("R {} {} {}", num(start), num(slope), num(s.duration)),
            SegmentKind::Blend { from, to, phase_start, phase_end } => format!(
                "B {} {} {} {} {}",
                num(from),
                num(to),
                num(phase_start),
                num(phase_end),
                num(s.duration)
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("PERIODIC {}\n", u8::from(profile.is_periodic())));
    out
}

pub fn parse_profile(text: &str) -> Result<DampingProfile, CliError> {
    let bad = |line: usize, msg: String| CliError::Input(format!("profile line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, PROFILE_HEADER)) => {}
        Some((i, other)) => return Err(bad(i, format!("expected header `{PROFILE_HEADER}`, found `{other}`"))),
        None => return Err(CliError::Input("profile file is empty".into())),
    }
    let mut segments = Vec::new();
    let mut periodic = None;
    for (i, line) in lines {
        if periodic.is_some() {
            return Err(bad(i, "content after PERIODIC line".into()));
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        let nums = |count: usize| -> Result<Vec<f64>, CliError> {
            if values.len() != count {
                return Err(bad(i, format!("`{tag}` takes {count} numbers, found {}", values.len())));
            }
            values.iter().map(|v| v.parse::<f64>().map_err(|_| bad(i, format!("not a number: `{v}`")))).collect()
        };
        match tag {
            "C" => {
                let v = nums(2)?;
                segments.push(Segment::constant(v[0], v[1]));
            }
            "R" => {
                let v = nums(3)?;
                segments.push(Segment::ramp(v[0], v[1], v[2]));
            }
            "B" => {
                let v = nums(5)?;
                segments.push(Segment::blend(v[0], v[1], v[2], v[3], v[4]));
            }
            "PERIODIC" => match values.as_slice() {
                ["0"] => periodic = Some(false),
                ["1"] => periodic = Some(true),
                _ => return Err(bad(i, "PERIODIC must be followed by 0 or 1".into())),
            },
            other => return Err(bad(i, format!("unknown segment tag `{other}`"))),
        }
    }
    let periodic = periodic.ok_or_else(|| CliError::Input("profile file is missing the PERIODIC line".into()))?;
    Ok(DampingProfile::new(segments, periodic)?)
}

pub fn read_profile(path: &Path) -> Result<DampingProfile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_profile(&text)
}

/// Reads `(t, phi)` rows; a non-numeric first row is taken as a header.
pub fn read_envelope(path: &Path) -> Result<Envelope, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("envelope: {e}")))?;
        if rec.len() != 2 {
            return Err(CliError::Input(format!("envelope row {}: expected 2 columns, found {}", i + 1, rec.len())));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(t), Ok(phi)) => points.push((t, phi)),
            _ if i == 0 => continue,
            _ => return Err(CliError::Input(format!("envelope row {}: not a number pair", i + 1))),
        }
    }
    Ok(Envelope::new(&points)?)
}

/// Writes via a temporary sibling file and a rename, so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| CliError::Input(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// A CSV table built in memory and written in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Plain-text report: a header line, free-form notes prefixed with `#`, then `key: value` lines.
pub struct Report {
    notes: Vec<String>,
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { notes: Vec::new(), entries: vec![("command".into(), command.into())] }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn list<T: Display>(&mut self, key: &str, values: impl IntoIterator<Item = T>) {
        let joined = values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.set(key, joined);
    }

    pub fn render(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }
}
