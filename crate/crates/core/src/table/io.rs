//! CSV and JSON score files.
//!
//! CSV: header `i_1,...,i_D,fold,val,test`, 1-based coordinates and folds,
//! with the grid manifest in a sibling JSON file. JSON: a single document
//! `{"manifest": .., "K": .., "rows": [{"coords", "fold", "val", "test"}]}`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoreTable;
use crate::{ArmIndex, Error, GridSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown table format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Grid manifest for CSV files. Defaults to `<stem>.manifest.json`, then
    /// `manifest.json`, next to the score file.
    pub manifest: Option<PathBuf>,
    /// Scores in the file are lower-is-better; negate them on ingestion.
    pub minimize: bool,
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    coords: ArmIndex,
    fold: usize,
    val: f64,
    test: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    manifest: GridSpec,
    #[serde(rename = "K")]
    folds: usize,
    rows: Vec<JsonRow>,
}

/// Collects rows in arbitrary order and checks completeness at the end.
struct Builder {
    spec: GridSpec,
    folds: usize,
    cells: Vec<Option<(f64, f64)>>,
    sign: f64,
}

impl Builder {
    fn new(spec: GridSpec, folds: usize, minimize: bool) -> Self {
        let cells = vec![None; spec.len() * folds];
        Self {
            spec,
            folds,
            cells,
            sign: if minimize { -1.0 } else { 1.0 },
        }
    }

    fn insert(&mut self, arm: &ArmIndex, fold: usize, val: f64, test: f64) -> Result<()> {
        let k = self.spec.to_linear(arm)?;
        if fold == 0 || fold > self.folds {
            return Err(Error::OutOfRange(format!(
                "fold {fold} of arm {arm} outside [1, {}]",
                self.folds
            )));
        }
        if !val.is_finite() || !test.is_finite() {
            return Err(Error::Parse(format!("non-finite score at arm {arm} fold {fold}")));
        }
        let slot = &mut self.cells[k * self.folds + fold - 1];
        if slot.is_some() {
            return Err(Error::Parse(format!("duplicate row for arm {arm} fold {fold}")));
        }
        *slot = Some((self.sign * val, self.sign * test));
        Ok(())
    }

    fn finish(self) -> Result<ScoreTable> {
        let mut val = Vec::with_capacity(self.cells.len());
        let mut test = Vec::with_capacity(self.cells.len());
        for (i, cell) in self.cells.iter().enumerate() {
            let Some((v, t)) = cell else {
                return Err(Error::Incomplete {
                    arm: ArmIndex(self.spec.coords_unchecked(i / self.folds)),
                    fold: i % self.folds + 1,
                });
            };
            val.push(*v);
            test.push(*t);
        }
        ScoreTable::new(self.spec, self.folds, val, test)
    }
}

fn parse_field<T: FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what} `{field}`")))
}

impl ScoreTable {
    /// Reads the CSV score format against a known grid.
    pub fn read_csv<R: Read>(reader: R, spec: &GridSpec, minimize: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let d = spec.dim();
        let expected: Vec<String> = (1..=d)
            .map(|j| format!("i_{j}"))
            .chain(["fold", "val", "test"].map(String::from))
            .collect();
        let header: Vec<&str> = rdr.headers()?.iter().collect();
        if header != expected {
            return Err(Error::Parse(format!(
                "CSV header {header:?} does not match {expected:?}"
            )));
        }

        let mut rows = Vec::new();
        let mut max_fold = 0;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let coords = (0..d)
                .map(|j| parse_field::<usize>(&record[j], "coordinate", line))
                .collect::<Result<Vec<_>>>()?;
            let fold: usize = parse_field(&record[d], "fold", line)?;
            let val: f64 = parse_field(&record[d + 1], "val", line)?;
            let test: f64 = parse_field(&record[d + 2], "test", line)?;
            max_fold = max_fold.max(fold);
            rows.push((ArmIndex(coords), fold, val, test));
        }
        if rows.is_empty() {
            return Err(Error::Parse("score file has no rows".into()));
        }

        let mut builder = Builder::new(spec.clone(), max_fold, minimize);
        for (arm, fold, val, test) in &rows {
            builder.insert(arm, *fold, *val, *test)?;
        }
        builder.finish()
    }

    /// Writes rows in linear-arm, then fold, order. Scores are printed in
    /// their shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let header: Vec<String> = (1..=self.spec.dim())
            .map(|j| format!("i_{j}"))
            .chain(["fold", "val", "test"].map(String::from))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for arm in 0..self.len() {
            let coords = self.spec.coords_unchecked(arm);
            for fold in 1..=self.folds {
                let (v, t) = self.cell(arm, fold);
                line.clear();
                for c in &coords {
                    write!(line, "{c},").unwrap();
                }
                write!(line, "{fold},{v},{t}").unwrap();
                writeln!(w, "{line}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R, minimize: bool) -> Result<Self> {
        let doc: JsonTable = serde_json::from_reader(reader)?;
        let mut builder = Builder::new(doc.manifest, doc.folds, minimize);
        if doc.folds == 0 {
            return Err(Error::Parse("K must be at least 1".into()));
        }
        for row in &doc.rows {
            builder.insert(&row.coords, row.fold, row.val, row.test)?;
        }
        builder.finish()
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let rows = (0..self.len())
            .flat_map(|arm| (1..=self.folds).map(move |fold| (arm, fold)))
            .map(|(arm, fold)| {
                let (val, test) = self.cell(arm, fold);
                JsonRow {
                    coords: ArmIndex(self.spec.coords_unchecked(arm)),
                    fold,
                    val,
                    test,
                }
            })
            .collect();
        let doc = JsonTable {
            manifest: self.spec.clone(),
            folds: self.folds,
            rows,
        };
        let mut w = BufWriter::new(writer);
        serde_json::to_writer(&mut w, &doc)?;
        w.flush()?;
        Ok(())
    }
}

fn default_manifest(path: &Path) -> PathBuf {
    let dir = path.parent().unwrap_or(Path::new("."));
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        let candidate = dir.join(format!("{stem}.manifest.json"));
        if candidate.exists() {
            return candidate;
        }
    }
    dir.join("manifest.json")
}

/// Loads a score table from disk.
pub fn load_table(path: &Path, format: TableFormat, opts: &LoadOptions) -> Result<ScoreTable> {
    let file = BufReader::new(File::open(path)?);
    match format {
        TableFormat::Csv => {
            let manifest = opts
                .manifest
                .clone()
                .unwrap_or_else(|| default_manifest(path));
            let spec: GridSpec = serde_json::from_reader(BufReader::new(File::open(&manifest)?))?;
            ScoreTable::read_csv(file, &spec, opts.minimize)
        }
        TableFormat::Json => ScoreTable::read_json(file, opts.minimize),
    }
}

/// Saves a score table. CSV also writes `<stem>.manifest.json` next to it.
pub fn save_table(table: &ScoreTable, path: &Path, format: TableFormat) -> Result<()> {
    match format {
        TableFormat::Csv => {
            table.write_csv(File::create(path)?)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
            let manifest = path
                .parent()
                .unwrap_or(Path::new("."))
                .join(format!("{stem}.manifest.json"));
            serde_json::to_writer_pretty(File::create(manifest)?, table.spec())?;
            Ok(())
        }
        TableFormat::Json => table.write_json(File::create(path)?),
    }
}
