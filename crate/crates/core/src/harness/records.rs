use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// First line of every run CSV; bump when columns change.
pub const RUN_SCHEMA: &str = "# drrl-runs v1";
pub const RUN_COLUMNS: [&str; 8] = ["kind", "run", "seed", "step", "episode", "episode_return", "epsilon", "eval_return"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// A training episode finished at `step`.
    Episode,
    /// A periodic checkpoint, optionally with a greedy evaluation.
    Checkpoint,
}

/// One row of a run's log. Wall-clock seconds are kept in memory and in a
/// separate timing file so the run CSV stays bit-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kind: RecordKind,
    pub run: usize,
    pub seed: u64,
    pub step: usize,
    pub episode: usize,
    pub episode_return: Option<f64>,
    pub epsilon: f64,
    pub eval_return: Option<f64>,
    pub cumulative_seconds: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Streams records to a versioned CSV.
pub struct RunWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl RunWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{RUN_SCHEMA}").map_err(|e| Error::io(path, e))?;
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(RUN_COLUMNS)?;
        Ok(Self { path: path.to_path_buf(), inner })
    }

    pub fn write(&mut self, r: &RunRecord) -> Result<()> {
        let kind = match r.kind {
            RecordKind::Episode => "episode",
            RecordKind::Checkpoint => "checkpoint",
        };
        self.inner.write_record([
            kind.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.step.to_string(),
            r.episode.to_string(),
            opt(r.episode_return),
            r.epsilon.to_string(),
            opt(r.eval_return),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a run CSV, checking the schema line and column names.
pub fn read_run_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    if first.trim_end() != RUN_SCHEMA {
        return Err(Error::Aggregation(format!(
            "{}: expected schema line {RUN_SCHEMA:?}, found {:?}",
            path.display(),
            first.trim_end()
        )));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.iter().ne(RUN_COLUMNS) {
        return Err(Error::Aggregation(format!("{}: column mismatch {:?}", path.display(), headers)));
    }
    let bad = |line: usize, what: &str| Error::Aggregation(format!("{}:{line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let line = i + 3;
        let num = |idx: usize, what: &str| -> Result<f64> { row[idx].parse::<f64>().map_err(|_| bad(line, what)) };
        let maybe = |idx: usize, what: &str| -> Result<Option<f64>> {
            if row[idx].is_empty() { Ok(None) } else { num(idx, what).map(Some) }
        };
        out.push(RunRecord {
            kind: match &row[0] {
                "episode" => RecordKind::Episode,
                "checkpoint" => RecordKind::Checkpoint,
                _ => return Err(bad(line, "kind")),
            },
            run: row[1].parse().map_err(|_| bad(line, "run"))?,
            seed: row[2].parse().map_err(|_| bad(line, "seed"))?,
            step: row[3].parse().map_err(|_| bad(line, "step"))?,
            episode: row[4].parse().map_err(|_| bad(line, "episode"))?,
            episode_return: maybe(5, "episode_return")?,
            epsilon: num(6, "epsilon")?,
            eval_return: maybe(7, "eval_return")?,
            cumulative_seconds: 0.0,
        });
    }
    Ok(out)
}
