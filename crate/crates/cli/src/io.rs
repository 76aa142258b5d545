use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU8, Ordering};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

/// A problem with what the user supplied: arguments, files or records.
/// Maps to exit code 1; every other error is internal (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(InputError(msg.into()))
}

pub fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.downcast_ref::<InputError>().is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Info = 1,
    Warn = 2,
    Error = 3,
}

static MIN_LEVEL: AtomicU8 = AtomicU8::new(Level::Info as u8);

pub fn set_min_level(level: Level) {
    MIN_LEVEL.store(level as u8, Ordering::Relaxed);
}

/// Writes one JSON event line to stderr.
pub fn emit(level: Level, event: &str, fields: Value) {
    if (level as u8) < MIN_LEVEL.load(Ordering::Relaxed) {
        return;
    }
    let name = match level {
        Level::Info => "info",
        Level::Warn => "warn",
        Level::Error => "error",
    };
    let mut obj = json!({ "level": name, "event": event });
    if let (Value::Object(o), Value::Object(f)) = (&mut obj, fields) {
        o.extend(f);
    }
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{obj}");
}

pub fn info(event: &str, fields: Value) {
    emit(Level::Info, event, fields);
}

pub fn warn(event: &str, fields: Value) {
    emit(Level::Warn, event, fields);
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| input_err(format!("cannot open {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| input_err(format!("cannot create {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))
}

/// Non-blank lines with their 1-based line numbers.
pub fn numbered_lines<'a, R: BufRead + 'a>(reader: R, path: &'a Path) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(input_err(format!("{}:{}: {e}", path.display(), i + 1)))),
    })
}

pub fn parse_line<T: DeserializeOwned>(path: &Path, line_no: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| input_err(format!("{}:{line_no}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    numbered_lines(open(path)?, path).map(|r| r.and_then(|(n, l)| parse_line(path, n, &l))).collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Applies `key=value` overrides to a JSON object. Dotted keys reach into
/// nested objects; values are parsed as JSON, falling back to a string.
pub fn apply_overrides(config: &mut Value, sets: &[String]) -> Result<()> {
    for s in sets {
        let (key, raw) = s.split_once('=').ok_or_else(|| input_err(format!("override `{s}` is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *config;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| input_err(format!("override `{key}`: not an object at `{part}`")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
        }
    }
    Ok(())
}

/// Loads an optional JSON config, applies overrides and deserializes it.
pub fn load_config<T: DeserializeOwned>(path: Option<&Path>, sets: &[String], prepare: impl FnOnce(&mut Value) -> Result<()>) -> Result<T> {
    let mut value = match path {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| input_err(format!("{}: {e}", p.display())))?,
        None => json!({}),
    };
    if !value.is_object() {
        return Err(input_err("config must be a JSON object"));
    }
    prepare(&mut value)?;
    apply_overrides(&mut value, sets)?;
    let what = path.map_or_else(|| "config".to_string(), |p| p.display().to_string());
    serde_json::from_value(value).map_err(|e| input_err(format!("{what}: {e}")))
}
