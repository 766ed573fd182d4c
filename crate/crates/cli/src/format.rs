//! Deterministic output formatting: floats carrying 17 significant digits,
//! a small JSON document builder with a fixed key order, and atomic file
//! writes (temp + rename) so readers never observe a half-written file.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Formats a float in scientific notation with 17 significant digits —
/// enough for the printed value to parse back to the identical bits, which
/// is what makes byte-comparison of outputs a meaningful determinism check.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON document assembled field by field; objects keep insertion order, so
/// the byte layout of a rendered report is fixed by construction.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Self {
        Json::Obj(Vec::new())
    }

    /// Appends a field to an object (panics on non-objects: builder misuse).
    pub fn field(mut self, key: &str, value: Json) -> Self {
        match &mut self {
            Json::Obj(fields) => fields.push((key.to_string(), value)),
            _ => panic!("field() called on a non-object"),
        }
        self
    }

    pub fn floats(values: &[f64]) -> Self {
        Json::Arr(values.iter().map(|&v| Json::Float(v)).collect())
    }

    /// Renders the document with two-space indentation and a trailing
    /// newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            // JSON has no encoding for non-finite numbers; null keeps the
            // document parseable if one ever leaks into a report.
            Json::Float(x) if !x.is_finite() => out.push_str("null"),
            Json::Float(x) => out.push_str(&fmt_f64(*x)),
            Json::Str(s) => {
                out.push('"');
                escape_into(s, out);
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    pad(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                pad(out, indent);
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (k, (key, value)) in fields.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    pad(out, indent + 1);
                    out.push('"');
                    escape_into(key, out);
                    out.push_str("\": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                pad(out, indent);
                out.push('}');
            }
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
}

/// Writes `contents` to `path` via a sibling temp file and rename, so a
/// crash mid-write cannot leave a truncated output behind.
pub fn atomic_write(path: &Path, contents: &str) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
