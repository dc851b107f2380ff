//! Result files: `runs.csv`, `aggregate.csv`, `report.json`, plots.
//!
//! Files are written under temporary names and renamed into place only once
//! every file of a set has been written, so a failed emission leaves nothing
//! behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::aggregate::{AggregateCurve, CellKey, SeriesRecord};
use crate::error::{Error, Result};

pub const RUNS_HEADER: [&str; 11] = [
    "task",
    "target",
    "order",
    "self_ref",
    "beta",
    "k",
    "pop",
    "seed",
    "generation",
    "best_fitness",
    "pred_error",
];

pub const AGGREGATE_HEADER: [&str; 13] = [
    "task",
    "target",
    "order",
    "self_ref",
    "beta",
    "k",
    "pop",
    "generation",
    "n_seeds",
    "mean_best_fitness",
    "sem_best_fitness",
    "mean_pred_error",
    "sem_pred_error",
];

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn key_fields(key: &CellKey) -> [String; 7] {
    [
        key.task.clone(),
        key.target.clone(),
        key.order.to_string(),
        key.self_ref.to_string(),
        fmt_num(key.beta),
        key.k.to_string(),
        key.pop.to_string(),
    ]
}

/// Rows sorted by cell, then seed, then generation.
pub fn write_runs_csv<W: Write>(out: W, records: &[SeriesRecord]) -> Result<()> {
    let mut sorted: Vec<&SeriesRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp_key(&b.key).then(a.seed.cmp(&b.seed)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in sorted {
        let key = key_fields(&r.key);
        let seed = r.seed.to_string();
        for (j, &fit) in r.best_fitness.iter().enumerate() {
            let err = r.pred_error.as_ref().map(|e| fmt_num(e[j])).unwrap_or_default();
            let generation = (j + 1).to_string();
            let fit = fmt_num(fit);
            w.write_record(key.iter().map(String::as_str).chain([
                seed.as_str(),
                generation.as_str(),
                fit.as_str(),
                err.as_str(),
            ]))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field(row: &csv::StringRecord, i: usize) -> Result<&str> {
    row.get(i)
        .ok_or_else(|| Error::config("runs.csv", format!("missing column {}", RUNS_HEADER[i])))
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = field(row, i)?;
    raw.parse()
        .map_err(|_| Error::config("runs.csv", format!("bad {} value `{raw}`", RUNS_HEADER[i])))
}

/// Reads a `runs.csv` back into per-seed series.
pub fn read_runs_csv(path: &Path) -> Result<Vec<SeriesRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(RUNS_HEADER) {
        return Err(Error::config("runs.csv", "unexpected header"));
    }
    let mut records: Vec<SeriesRecord> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let key = CellKey {
            task: field(&row, 0)?.to_string(),
            target: field(&row, 1)?.to_string(),
            order: parse_field(&row, 2)?,
            self_ref: parse_field(&row, 3)?,
            beta: parse_field(&row, 4)?,
            k: parse_field(&row, 5)?,
            pop: parse_field(&row, 6)?,
        };
        let seed: u64 = parse_field(&row, 7)?;
        let generation: usize = parse_field(&row, 8)?;
        let fit: f64 = parse_field(&row, 9)?;
        let err = match field(&row, 10)? {
            "" => None,
            _ => Some(parse_field::<f64>(&row, 10)?),
        };
        let same = records
            .last()
            .is_some_and(|r| r.seed == seed && r.key.cmp_key(&key).is_eq());
        if !same {
            records.push(SeriesRecord {
                key,
                seed,
                best_fitness: Vec::new(),
                pred_error: err.map(|_| Vec::new()),
            });
        }
        let rec = records.last_mut().expect("pushed above");
        if generation != rec.best_fitness.len() + 1 {
            return Err(Error::config(
                "runs.csv",
                format!("generation {generation} out of sequence for seed {seed}"),
            ));
        }
        rec.best_fitness.push(fit);
        match (&mut rec.pred_error, err) {
            (Some(errors), Some(e)) => errors.push(e),
            (None, None) => {}
            _ => return Err(Error::config("runs.csv", "pred_error present on some rows only")),
        }
    }
    Ok(records)
}

pub fn write_aggregate_csv<W: Write>(out: W, curves: &[AggregateCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for curve in curves {
        let key = key_fields(&curve.key);
        for row in &curve.rows {
            let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
            let tail = [
                row.generation.to_string(),
                row.n_seeds.to_string(),
                fmt_num(row.mean_best_fitness),
                fmt_num(row.sem_best_fitness),
                opt(row.mean_pred_error),
                opt(row.sem_pred_error),
            ];
            w.write_record(key.iter().chain(tail.iter()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A set of files that appear together or not at all.
pub struct OutputSet {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    /// Streams one file through `write` into a temporary name.
    pub fn stage<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let final_path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        self.staged.push((tmp.clone(), final_path));
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn stage_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.stage(name, |w| Ok(w.write_all(bytes)?))
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dst) in staged {
            fs::rename(&tmp, &dst)?;
            written.push(dst);
        }
        Ok(written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// Everything one experiment run writes.
pub struct Emission<'a> {
    pub records: &'a [SeriesRecord],
    pub curves: &'a [AggregateCurve],
    pub report: &'a serde_json::Value,
    /// Extra named files (tables, plots).
    pub extra: Vec<(String, Vec<u8>)>,
}

/// Writes `runs.csv`, `aggregate.csv`, `report.json` and any extras to `outdir`.
pub fn emit_results(outdir: &Path, emission: &Emission<'_>) -> Result<Vec<PathBuf>> {
    if emission.records.is_empty() || emission.records.iter().all(|r| r.best_fitness.is_empty()) {
        return Err(Error::Contract("no run records to emit".into()));
    }
    let mut set = OutputSet::new(outdir)?;
    set.stage("runs.csv", |w| write_runs_csv(w, emission.records))?;
    set.stage("aggregate.csv", |w| write_aggregate_csv(w, emission.curves))?;
    for (name, bytes) in &emission.extra {
        set.stage_bytes(name, bytes)?;
    }
    set.stage("report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, emission.report)?;
        Ok(w.write_all(b"\n")?)
    })?;
    set.commit()
}

/// Writes a report plus extras without run records (theorem checks, fits).
pub fn emit_report(outdir: &Path, report: &serde_json::Value, extra: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    let mut set = OutputSet::new(outdir)?;
    for (name, bytes) in extra {
        set.stage_bytes(name, bytes)?;
    }
    set.stage("report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, report)?;
        Ok(w.write_all(b"\n")?)
    })?;
    set.commit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_format_is_compact() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.5), "1.5");
        assert_eq!(fmt_num(1e300), "1e300");
        assert_eq!(fmt_num(-2.5e-9), "-2.5e-9");
        assert_eq!(fmt_num(3352.75), "3352.75");
    }

    proptest! {
        #[test]
        fn number_format_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = fmt_num(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn empty_records_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let report = serde_json::json!({});
        let r = emit_results(
            &out,
            &Emission {
                records: &[],
                curves: &[],
                report: &report,
                extra: vec![],
            },
        );
        assert!(r.is_err());
        let leftovers = fs::read_dir(&out).map(|d| d.count()).unwrap_or(0);
        assert_eq!(leftovers, 0);
    }

    #[test]
    fn failed_stage_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut set = OutputSet::new(dir.path()).unwrap();
            set.stage_bytes("a.txt", b"hello").unwrap();
            let r = set.stage("b.txt", |_| Err(Error::Contract("boom".into())));
            assert!(r.is_err());
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        assert!(matches!(OutputSet::new(&blocker.join("sub")), Err(Error::Io(_))));
    }
}
