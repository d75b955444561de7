//! The `gen-table`, `run`, `eval` and `compare` commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gridarena_core::metrics::{
    self, EvalOptions, EvalTable, InversionReport, MetricsResult, RankStatistic, ScoreKey,
};
use gridarena_core::{driver, LandscapeSpec, LoadOptions, Protocol, RunRecord, ScoreTable, TableFormat};
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{CampaignConfig, TableMeta};
use crate::error::{CliError, CliResult};

const TABLES_DIR: &str = "tables";
const RUNS_DIR: &str = "runs";

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Config(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| CliError::config(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::config(path.display(), e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::config(path.display(), e))
}

fn table_csv(table: &ScoreTable) -> Vec<u8> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn pretty_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("serializable");
    buf.push(b'\n');
    buf
}

#[derive(Debug, Deserialize)]
struct GenSpec {
    #[serde(flatten)]
    landscape: LandscapeSpec,
    folds: usize,
}

/// Synthesizes a table from a landscape recipe with a `folds` field and
/// writes `scores.csv` and `manifest.json` into `out`.
pub fn gen_table(spec_path: &Path, out: &Path) -> CliResult<PathBuf> {
    let text = fs::read_to_string(spec_path).map_err(|e| CliError::config(spec_path.display(), e))?;
    let spec: GenSpec =
        serde_json::from_str(&text).map_err(|e| CliError::config(spec_path.display(), e))?;
    let table = spec
        .landscape
        .synthesize(spec.folds)
        .map_err(|e| CliError::config(spec_path.display(), e))?;
    create_dir(out)?;
    let scores = out.join("scores.csv");
    write_atomic(&scores, &table_csv(&table))?;
    write_atomic(&out.join("manifest.json"), &pretty_json(table.spec()))?;
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub written: usize,
    pub skipped: usize,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} runs: {} new, {} already present",
            self.total, self.written, self.skipped
        )
    }
}

struct Task<'a> {
    table: &'a ScoreTable,
    table_id: &'a str,
    engine: usize,
    protocol: Protocol,
    multiplier: u32,
    seed: u64,
    path: PathBuf,
}

/// Executes every (table, engine, protocol, m, seed) tuple whose record is
/// not yet on disk, with at most `jobs` runs in flight.
pub fn run(config_path: &Path, out: &Path, jobs: usize) -> CliResult<RunSummary> {
    let config = CampaignConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let tables_dir = out.join(TABLES_DIR);
    let runs_dir = out.join(RUNS_DIR);
    create_dir(&tables_dir)?;
    create_dir(&runs_dir)?;

    let mut tables = Vec::with_capacity(config.tables.len());
    for entry in &config.tables {
        let table = entry.materialize(base)?;
        let id = &entry.id;
        write_atomic(&tables_dir.join(format!("{id}.csv")), &table_csv(&table))?;
        write_atomic(
            &tables_dir.join(format!("{id}.manifest.json")),
            &pretty_json(table.spec()),
        )?;
        write_atomic(&tables_dir.join(format!("{id}.meta.json")), &pretty_json(&entry.meta()))?;
        tables.push(table);
    }

    let mut tasks = Vec::new();
    let mut total = 0;
    for (entry, table) in config.tables.iter().zip(&tables) {
        for (engine, e) in config.engines.iter().enumerate() {
            for protocol in config.protocols_for(table.folds()) {
                for &multiplier in &config.multipliers {
                    for &seed in &config.seeds {
                        total += 1;
                        let key = driver::run_key(&entry.id, e.label(), protocol, multiplier, seed);
                        let path = runs_dir.join(format!("{key}.jsonl"));
                        if !path.exists() {
                            tasks.push(Task {
                                table,
                                table_id: &entry.id,
                                engine,
                                protocol,
                                multiplier,
                                seed,
                                path,
                            });
                        }
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::config("thread pool", e))?;
    let written = tasks.len();
    pool.install(|| {
        tasks.par_iter().try_for_each(|t| {
            let entry = &config.engines[t.engine];
            let record = driver::RunSetup {
                table: t.table,
                table_id: t.table_id,
                protocol: t.protocol,
                multiplier: t.multiplier,
                seed: t.seed,
                budget_rule: config.budget_rule,
            }
            .execute_labeled(entry.label(), &entry.config)
            .map_err(|e| CliError::config(format!("run {}", t.path.display()), e))?;
            let mut line = record.to_json_line();
            line.push('\n');
            write_atomic(&t.path, line.as_bytes())
        })
    })?;
    Ok(RunSummary {
        total,
        written,
        skipped: total - written,
    })
}

/// Tables and records of a run directory.
pub struct Campaign {
    pub tables: BTreeMap<String, EvalTable>,
    pub records: Vec<RunRecord>,
}

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::data(dir.display(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('.'))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_campaign(dir: &Path) -> CliResult<Campaign> {
    let tables_dir = dir.join(TABLES_DIR);
    let mut tables = BTreeMap::new();
    for path in sorted_entries(&tables_dir)? {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.ends_with(".meta.json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::data(path.display(), e))?;
        let meta: TableMeta =
            serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))?;
        let csv = tables_dir.join(format!("{}.csv", meta.id));
        let opts = LoadOptions {
            manifest: Some(tables_dir.join(format!("{}.manifest.json", meta.id))),
            minimize: false,
        };
        let table = gridarena_core::table::load_table(&csv, TableFormat::Csv, &opts)
            .map_err(|e| CliError::data(csv.display(), e))?;
        tables.insert(
            meta.id.clone(),
            EvalTable {
                table,
                model: meta.model,
                context: meta.context,
            },
        );
    }

    let mut records = Vec::new();
    for path in sorted_entries(&dir.join(RUNS_DIR))? {
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::data(path.display(), e))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(RunRecord::from_json_line(line).map_err(|e| CliError::data(path.display(), e))?);
        }
    }
    Ok(Campaign { tables, records })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `engine,m,p_mean,p_se,imp,imp_se,overall`, one row per engine and m.
pub fn report_csv(result: &MetricsResult) -> String {
    let mut out = String::from("engine,m,p_mean,p_se,imp,imp_se,overall\n");
    for e in &result.engines {
        for b in &e.budgets {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.engine,
                b.multiplier,
                cell(b.p_mean),
                cell(b.p_se),
                cell(b.improvement),
                cell(b.improvement_se),
                cell(e.overall)
            );
        }
    }
    out
}

/// Long format with one row per panel, engine and m.
pub fn plot_csv(result: &MetricsResult) -> String {
    let mut out = String::from("panel,engine,m,value,se\n");
    for (panel, pick) in [
        ("p_better_than_random", true),
        ("improvement_degree", false),
    ] {
        for e in &result.engines {
            for b in &e.budgets {
                let (value, se) = if pick {
                    (b.p_mean, b.p_se)
                } else {
                    (b.improvement, b.improvement_se)
                };
                if value.is_some() {
                    let _ = writeln!(out, "{panel},{},{},{},{}", e.engine, b.multiplier, cell(value), cell(se));
                }
            }
        }
    }
    out
}

/// Human-readable summary in the layout of a results table.
pub fn report_text(result: &MetricsResult) -> String {
    let fmt = |v: Option<f64>, se: Option<f64>| match (v, se) {
        (Some(v), Some(se)) => format!("{v:.1} ± {se:.1}"),
        (Some(v), None) => format!("{v:.1}"),
        _ => "-".into(),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>3} {:>16} {:>16} {:>8}  forte",
        "engine", "m", "p [%]", "improvement", "overall"
    );
    for e in &result.engines {
        for (i, b) in e.budgets.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<16} {:>3} {:>16} {:>16} {:>8}  {}",
                if i == 0 { e.engine.as_str() } else { "" },
                b.multiplier,
                fmt(b.p_mean.map(|p| 100.0 * p), b.p_se.map(|s| 100.0 * s)),
                fmt(b.improvement, b.improvement_se),
                if i == 0 { e.overall.map_or("-".into(), |o| format!("{o:.1}")) } else { String::new() },
                if i == 0 { e.forte.join(" ") } else { String::new() },
            );
        }
    }
    out
}

pub struct EvalArgs {
    pub draws: usize,
    pub seed: u64,
    pub statistic: RankStatistic,
    pub reference_multiplier: Option<u32>,
}

/// Evaluates a run directory and writes `metrics.json`, `report.csv` and
/// `plot_data.csv` into `out`.
pub fn eval(input: &Path, out: &Path, args: &EvalArgs) -> CliResult<MetricsResult> {
    if args.draws == 0 {
        return Err(CliError::Config("--draws must be positive".into()));
    }
    let campaign = load_campaign(input)?;
    let options = EvalOptions {
        draws: args.draws,
        seed: args.seed,
        statistic: args.statistic,
        reference_multiplier: args.reference_multiplier,
    };
    let result = metrics::evaluate(&campaign.records, &campaign.tables, &options).map_err(|e| match e {
        gridarena_core::Error::MissingTable(_) | gridarena_core::Error::OutOfRange(_) => {
            CliError::data(input.display(), e)
        }
        e => CliError::config(input.display(), e),
    })?;
    create_dir(out)?;
    write_atomic(&out.join("metrics.json"), &pretty_json(&result))?;
    write_atomic(&out.join("report.csv"), report_csv(&result).as_bytes())?;
    write_atomic(&out.join("plot_data.csv"), plot_csv(&result).as_bytes())?;
    Ok(result)
}

/// Mean `r*` of cross-validated runs per (engine, model, context), then the
/// winner inversion analysis over them.
pub fn compare(input: &Path) -> CliResult<InversionReport> {
    let campaign = load_campaign(input)?;
    let mut sums: BTreeMap<ScoreKey, (f64, usize)> = BTreeMap::new();
    for r in campaign
        .records
        .iter()
        .filter(|r| r.protocol == Protocol::CrossValidated)
    {
        let t = campaign
            .tables
            .get(&r.table)
            .ok_or_else(|| CliError::Data(format!("run {} references unknown table {}", r.key(), r.table)))?;
        let s = sums
            .entry(ScoreKey::new(&r.engine, &t.model, &t.context))
            .or_default();
        s.0 += r.r_star;
        s.1 += 1;
    }
    let means: BTreeMap<ScoreKey, f64> = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect();
    let engines: BTreeSet<&str> = means.keys().map(|k| k.engine.as_str()).collect();
    if engines.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no cross-validated runs to compare",
            input.display()
        )));
    }
    metrics::winner_inversion_rate(&means).map_err(|e| CliError::config(input.display(), e))
}
