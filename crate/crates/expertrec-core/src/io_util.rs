//! Line-oriented CSV helpers shared by the artifact readers and writers.
//!
//! Every artifact is plain CSV with an optional leading `#` comment line
//! (the config echo). Floats are written with nine decimal places so
//! identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.9}")
}

pub(crate) struct CsvWriter {
    out: BufWriter<std::fs::File>,
    buf: String,
}

impl CsvWriter {
    pub fn create(path: &Path, comment: Option<&str>, header: &str) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = std::fs::File::create(path)?;
        let mut w = CsvWriter {
            out: BufWriter::new(file),
            buf: String::new(),
        };
        if let Some(comment) = comment {
            debug_assert!(comment.starts_with('#'));
            w.raw_line(comment)?;
        }
        w.raw_line(header)?;
        Ok(w)
    }

    pub fn raw_line(&mut self, line: &str) -> Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    /// Writes one row from string-able fields without allocating per field.
    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) -> Result<()> {
        self.buf.clear();
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{f}");
        }
        self.out.write_all(self.buf.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Parsed CSV file: leading comment (if any) plus data rows with 1-based
/// line numbers for error reporting.
#[derive(Debug)]
pub(crate) struct CsvFile {
    pub comment: Option<String>,
    pub rows: Vec<(usize, String)>,
}

pub(crate) fn read_csv(path: &Path, expected_header: &str, missing_hint: &str) -> Result<CsvFile> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact {
                what: path.display().to_string(),
                hint: missing_hint.to_string(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let reader = BufReader::new(file);
    let mut comment = None;
    let mut header_seen = false;
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if comment.is_none() {
                comment = Some(line);
            }
            continue;
        }
        if !header_seen {
            if line != expected_header {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected header `{expected_header}`, found `{line}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        rows.push((line_no, line));
    }
    if !header_seen {
        return Err(Error::parse(path, 1, "file has no header row"));
    }
    Ok(CsvFile { comment, rows })
}

/// One data row split into fields, with typed accessors that report the
/// file, line, and column of any malformed value.
pub(crate) struct Row<'a> {
    path: &'a Path,
    line: usize,
    fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    pub fn split(path: &'a Path, line: usize, text: &'a str, expected: usize) -> Result<Self> {
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != expected {
            return Err(Error::parse(
                path,
                line,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        Ok(Row { path, line, fields })
    }

    pub fn line(&self) -> usize {
        self.line
    }

    fn field(&self, idx: usize) -> &str {
        self.fields[idx]
    }

    pub fn str(&self, idx: usize) -> &str {
        self.field(idx)
    }

    pub fn f64(&self, idx: usize, name: &str) -> Result<f64> {
        self.field(idx)
            .parse()
            .map_err(|_| self.bad(idx, name, "a real number"))
    }

    pub fn usize(&self, idx: usize, name: &str) -> Result<usize> {
        self.field(idx)
            .parse()
            .map_err(|_| self.bad(idx, name, "a non-negative integer"))
    }

    pub fn u32(&self, idx: usize, name: &str) -> Result<u32> {
        self.field(idx)
            .parse()
            .map_err(|_| self.bad(idx, name, "a 32-bit integer"))
    }

    pub fn u16(&self, idx: usize, name: &str) -> Result<u16> {
        self.field(idx)
            .parse()
            .map_err(|_| self.bad(idx, name, "a 16-bit integer"))
    }

    pub fn bool01(&self, idx: usize, name: &str) -> Result<bool> {
        match self.field(idx) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(self.bad(idx, name, "0 or 1")),
        }
    }

    /// Empty field means absent.
    pub fn opt_f64(&self, idx: usize, name: &str) -> Result<Option<f64>> {
        let raw = self.field(idx);
        if raw.is_empty() {
            return Ok(None);
        }
        self.f64(idx, name).map(Some)
    }

    pub fn opt_u32(&self, idx: usize, name: &str) -> Result<Option<u32>> {
        let raw = self.field(idx);
        if raw.is_empty() {
            return Ok(None);
        }
        self.u32(idx, name).map(Some)
    }

    fn bad(&self, idx: usize, name: &str, expected: &str) -> Error {
        Error::parse(
            self.path,
            self.line,
            format!(
                "column `{name}` (field {}): expected {expected}, found `{}`",
                idx + 1,
                self.field(idx)
            ),
        )
    }
}

/// Formats an optional float as an empty field when absent.
pub(crate) struct OptF64(pub Option<f64>);

impl std::fmt::Display for OptF64 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(x) => write!(f, "{x:.9}"),
            None => Ok(()),
        }
    }
}

/// Formats an optional integer as an empty field when absent.
pub(crate) struct OptU32(pub Option<u32>);

impl std::fmt::Display for OptU32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(x) => write!(f, "{x}"),
            None => Ok(()),
        }
    }
}

pub(crate) struct F64(pub f64);

impl std::fmt::Display for F64 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.9}", self.0)
    }
}
