//! JSON model configs, JSON results and CSV event logs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::model::{validate_network, Event, EventKind, EventLog, ExcitationMode, ModelError, NetworkModel};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ModelError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// Best guess at the offending field: the serde path, or the name quoted in the message.
fn field_of(path: &str, message: &str) -> String {
    let path = path.trim_start_matches('.');
    if !path.is_empty() && path != "?" {
        return path.to_string();
    }
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<root>".to_string())
}

/// Parse and validate a model from JSON text.
pub fn parse_model_text(text: &str) -> Result<NetworkModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let model: NetworkModel = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        IoError::Parse {
            line: inner.line(),
            column: inner.column(),
            field: field_of(&path, &message),
            message,
        }
    })?;
    validate_network(&model)?;
    Ok(model)
}

/// Parse and validate a model from a JSON file.
pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    parse_model_text(&read_to_string(path)?)
}

/// Accept either inline JSON (starting with `{`) or a file path.
pub fn parse_model(path_or_text: &str) -> Result<NetworkModel> {
    if path_or_text.trim_start().starts_with('{') {
        parse_model_text(path_or_text)
    } else {
        load_model(path_or_text)
    }
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let p = path.as_ref();
    fs::read_to_string(p).map_err(|source| IoError::File {
        path: p.display().to_string(),
        source,
    })
}

/// Deserialize any JSON config, reporting the failing path.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        IoError::Parse {
            line: inner.line(),
            column: inner.column(),
            field: field_of(&path, &message),
            message,
        }
    })
}

pub fn model_to_json(model: &NetworkModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let p = path.as_ref();
    fs::write(p, to_json_string(value)?).map_err(|source| IoError::File {
        path: p.display().to_string(),
        source,
    })
}

const HEADER: [&str; 7] = ["time", "coordinate", "kind", "mark", "service", "particle_id", "parent_id"];

fn mode_name(mode: ExcitationMode) -> &'static str {
    match mode {
        ExcitationMode::Hawkes => "hawkes",
        ExcitationMode::Delayed => "delayed",
        ExcitationMode::Ephemeral => "ephemeral",
    }
}

fn csv_err(e: impl std::fmt::Display) -> IoError {
    IoError::Csv(e.to_string())
}

/// Write an event log as CSV. A leading `#` line carries the log metadata,
/// marks toward all targets are `;`-separated and a reroute from j to i is
/// written with coordinate j and kind `reroute:i`.
pub fn write_event_log_csv<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# d={} mode={} horizon={} seed={}",
        log.d,
        mode_name(log.mode),
        log.horizon,
        log.master_seed
    )
    .map_err(csv_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for e in &log.events {
        let kind = match e.kind {
            EventKind::Arrival => "arrival".to_string(),
            EventKind::Departure => "departure".to_string(),
            EventKind::Reroute { to, .. } => format!("reroute:{to}"),
        };
        let marks: Vec<String> = e.marks.iter().map(|m| m.to_string()).collect();
        w.write_record([
            e.time.to_string(),
            e.coordinate.to_string(),
            kind,
            marks.join(";"),
            e.service.map(|s| s.to_string()).unwrap_or_default(),
            e.particle.to_string(),
            e.parent.map(|p| p.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

fn parse_meta(line: &str) -> Result<(usize, ExcitationMode, f64, u64)> {
    let mut d = None;
    let mut mode = None;
    let mut horizon = None;
    let mut seed = None;
    for part in line.trim_start_matches('#').split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| csv_err(format!("bad metadata `{part}`")))?;
        match k {
            "d" => d = v.parse().ok(),
            "mode" => mode = serde_json::from_value(serde_json::Value::String(v.to_string())).ok(),
            "horizon" => horizon = v.parse().ok(),
            "seed" => seed = v.parse().ok(),
            _ => {}
        }
    }
    match (d, mode, horizon, seed) {
        (Some(d), Some(m), Some(h), Some(s)) => Ok((d, m, h, s)),
        _ => Err(csv_err("metadata line needs d, mode, horizon and seed")),
    }
}

/// Read a log written by [`write_event_log_csv`].
pub fn read_event_log_csv<R: Read>(mut input: R) -> Result<EventLog> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(csv_err)?;
    let (meta, body) = text.split_once('\n').ok_or_else(|| csv_err("empty log"))?;
    if !meta.starts_with('#') {
        return Err(csv_err("missing metadata line"));
    }
    let (d, mode, horizon, seed) = parse_meta(meta)?;
    let mut log = EventLog::new(d, mode, horizon, seed);
    let mut r = csv::Reader::from_reader(body.as_bytes());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| csv_err(format!("row {}: bad {what}", row + 1));
        let num = |i: usize, what: &str| -> Result<f64> { at(i).parse().map_err(|_| bad(what)) };
        let int = |i: usize, what: &str| -> Result<u64> { at(i).parse().map_err(|_| bad(what)) };
        let coordinate = int(1, "coordinate")? as usize;
        let kind = match at(2) {
            "arrival" => EventKind::Arrival,
            "departure" => EventKind::Departure,
            k => match k.strip_prefix("reroute:").and_then(|to| to.parse().ok()) {
                Some(to) => EventKind::Reroute { from: coordinate, to },
                None => return Err(bad("kind")),
            },
        };
        let marks = if at(3).is_empty() {
            Vec::new()
        } else {
            at(3).split(';').map(|m| m.parse().map_err(|_| bad("mark"))).collect::<Result<_>>()?
        };
        log.events.push(Event {
            time: num(0, "time")?,
            coordinate,
            kind,
            marks,
            service: if at(4).is_empty() { None } else { Some(num(4, "service")?) },
            particle: int(5, "particle_id")?,
            parent: if at(6).is_empty() { None } else { Some(int(6, "parent_id")?) },
        });
    }
    Ok(log)
}
