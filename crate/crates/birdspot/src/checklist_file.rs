//! Checklist CSV files: 14 `key,value` metadata rows, then one row per species.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use birdspot_core::ingest::{parse_rows, Checklist, ChecklistId, ParseError, RawRow};
use birdspot_core::Dataset;

use crate::error::{Error, Result};

#[derive(Debug, thiserror::Error)]
pub enum ChecklistFileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    /// The CSV layer itself failed (bad UTF-8, unbalanced quotes).
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error(transparent)]
    Io(io::Error),
}

impl ChecklistFileError {
    pub fn row(&self) -> Option<usize> {
        match self {
            Self::Parse(e) => Some(e.row()),
            Self::Csv { row, .. } => Some(*row),
            Self::Io(_) => None,
        }
    }
}

/// A checklist failure tied to the file it came from.
#[derive(Debug)]
pub struct FileError {
    pub path: PathBuf,
    pub error: ChecklistFileError,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.error)
    }
}

fn csv_error(e: csv::Error) -> ChecklistFileError {
    let row = e.position().map_or(0, |p| p.line() as usize);
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ChecklistFileError::Io(io),
        _ => ChecklistFileError::Csv { row, message },
    }
}

/// Parse one checklist file. Row numbers are physical 1-based line numbers,
/// so blank lines keep their place in the count.
pub fn parse_checklist<R: Read>(mut reader: R, id: ChecklistId) -> Result<Checklist, ChecklistFileError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(ChecklistFileError::Io)?;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| record_line(&bytes, p));
        rows.push(RawRow::new(line, record.iter()));
    }
    Ok(parse_rows(id, rows)?)
}

/// The reader reports a record at the position where it started scanning,
/// which is before any blank lines it skipped.
fn record_line(bytes: &[u8], pos: &csv::Position) -> usize {
    let rest = bytes.get(pos.byte() as usize..).unwrap_or_default();
    let skipped = rest
        .split(|&b| b == b'\n')
        .take_while(|l| l.is_empty() || *l == b"\r")
        .count();
    pos.line() as usize + skipped
}

pub fn parse_checklist_str(text: &str) -> Result<Checklist, ChecklistFileError> {
    parse_checklist(text.as_bytes(), ChecklistId(0))
}

pub fn write_checklist<W: Write>(checklist: &Checklist, writer: W) -> io::Result<()> {
    let mut csv = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    for row in checklist.to_rows() {
        csv.write_record(&row).map_err(io::Error::other)?;
    }
    csv.flush()
}

pub fn serialize_checklist(checklist: &Checklist) -> String {
    let mut buf = Vec::new();
    write_checklist(checklist, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("checklist fields are UTF-8")
}

/// Expand directories into their `*.csv` files (sorted by name) and keep
/// plain files as given.
pub fn checklist_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        let meta = fs::metadata(input).map_err(|e| Error::io(input, e))?;
        if meta.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn parse_file(path: &Path, id: ChecklistId) -> Result<Checklist, ChecklistFileError> {
    let file = File::open(path).map_err(ChecklistFileError::Io)?;
    parse_checklist(io::BufReader::new(file), id)
}

/// Parse every file into one dataset. Any failure yields the complete list
/// of failures and no dataset.
pub fn load_dataset(paths: &[PathBuf]) -> Result<Dataset, Vec<FileError>> {
    let mut checklists = Vec::with_capacity(paths.len());
    let mut errors = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        match parse_file(path, ChecklistId(i as u32)) {
            Ok(c) => checklists.push(c),
            Err(error) => errors.push(FileError {
                path: path.clone(),
                error,
            }),
        }
    }
    if errors.is_empty() {
        Ok(Dataset::from_checklists(checklists))
    } else {
        Err(errors)
    }
}

/// [`checklist_paths`] followed by [`load_dataset`].
pub fn load_dataset_from(inputs: &[PathBuf]) -> Result<Dataset> {
    let paths = checklist_paths(inputs)?;
    if paths.is_empty() {
        return Err(Error::Usage("no checklist files found".into()));
    }
    load_dataset(&paths).map_err(Error::Checklists)
}
