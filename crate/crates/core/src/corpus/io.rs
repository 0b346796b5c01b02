use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::{CorpusError, Dataset, Entry, Label, Mode, Provenance, Result, VersionTag};

/// On-disk dataset formats. JSONL is canonical; CSV is accepted for ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(DataFormat::Jsonl),
            "csv" => Ok(DataFormat::Csv),
            other => Err(format!("unknown data format '{other}'")),
        }
    }
}

#[derive(Deserialize)]
struct RawEntry {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    category_encoded: Option<u8>,
    #[serde(default)]
    provenance: Option<Provenance>,
    #[serde(default)]
    version_tag: Option<VersionTag>,
}

impl RawEntry {
    fn into_entry(self, mode: Mode) -> Result<Entry> {
        let label = match self.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => {
                let label = Label::parse_lenient(s)
                    .filter(|l| l.belongs_to(mode))
                    .ok_or_else(|| CorpusError::UnknownLabel { id: self.id.clone(), label: s.to_string() })?;
                Some(label)
            }
        };
        if self.text.trim().is_empty() {
            return Err(CorpusError::EmptyText(self.id));
        }
        Ok(Entry {
            id: self.id,
            text: self.text,
            label,
            category_encoded: self.category_encoded,
            provenance: self.provenance.unwrap_or_default(),
            version_tag: self.version_tag.unwrap_or_default(),
        })
    }
}

/// Loads a multiclass dataset. Rows without a label stay unlabeled.
pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    load_dataset_as(path, format, Mode::Multiclass)
}

/// Loads a dataset whose labels belong to `mode`.
pub fn load_dataset_as(path: impl AsRef<Path>, format: DataFormat, mode: Mode) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = match format {
        DataFormat::Jsonl => read_jsonl(path)?,
        DataFormat::Csv => read_csv(path)?,
    };
    let entries = raw.into_iter().map(|r| r.into_entry(mode)).collect::<Result<Vec<_>>>()?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    Dataset::new(name, mode, entries)
}

fn read_jsonl(path: &Path) -> Result<Vec<RawEntry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(raw);
    }
    Ok(out)
}

fn read_csv(path: &Path) -> Result<Vec<RawEntry>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<RawEntry>().enumerate() {
        // header is line 1
        out.push(row.map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::Io(io),
        other => CorpusError::Parse { path: path.display().to_string(), line: 1, message: format!("{other:?}") },
    }
}

/// Writes entries as JSONL, one object per line.
pub fn write_jsonl<'a, W: Write>(mut out: W, entries: impl IntoIterator<Item = &'a Entry>) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_jsonl(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_jsonl(BufWriter::new(file), ds.entries())
}
