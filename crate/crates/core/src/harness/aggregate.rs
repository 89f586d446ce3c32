use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::records::{read_run_csv, RecordKind, RunRecord};

pub const SUMMARY_SCHEMA: &str = "# drrl-summary v1";
pub const SWEEP_SCHEMA: &str = "# drrl-sweep v1";

/// Mean, standard error of the mean, and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { n, mean, stderr, min, max })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub episodes: usize,
    /// Greedy evaluation at the last checkpoint.
    pub final_eval: Option<f64>,
    /// Mean training return over the last `final_window` episodes.
    pub final_window_mean: Option<f64>,
    /// Mean training return over every episode of the run.
    pub whole_run_mean: Option<f64>,
}

impl RunMetrics {
    pub fn from_records(records: &[RunRecord], final_window: usize) -> Self {
        let returns: Vec<f64> = records
            .iter()
            .filter(|r| r.kind == RecordKind::Episode)
            .filter_map(|r| r.episode_return)
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let tail = &returns[returns.len().saturating_sub(final_window.max(1))..];
        Self {
            episodes: returns.len(),
            final_eval: records
                .iter()
                .rev()
                .find(|r| r.kind == RecordKind::Checkpoint)
                .and_then(|r| r.eval_return),
            final_window_mean: mean(tail),
            whole_run_mean: mean(&returns),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub step: usize,
    /// Mean training return of episodes ending since the previous checkpoint.
    pub train: Option<Stats>,
    pub eval: Option<Stats>,
}

/// Cross-run aggregate of an experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunMetrics>,
}

impl Summary {
    pub fn final_eval(&self) -> Option<Stats> {
        Stats::of(&self.runs.iter().filter_map(|r| r.final_eval).collect::<Vec<_>>())
    }

    pub fn final_window(&self) -> Option<Stats> {
        Stats::of(&self.runs.iter().filter_map(|r| r.final_window_mean).collect::<Vec<_>>())
    }

    pub fn whole_run(&self) -> Option<Stats> {
        Stats::of(&self.runs.iter().filter_map(|r| r.whole_run_mean).collect::<Vec<_>>())
    }

    pub fn has_eval(&self) -> bool {
        self.rows.iter().any(|r| r.eval.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{SUMMARY_SCHEMA}\nstep,runs,train_mean,train_stderr,train_min,train_max,eval_mean,eval_stderr,eval_min,eval_max\n"
        );
        let cells = |s: &Option<Stats>| match s {
            Some(s) => format!("{},{},{},{}", s.mean, s.stderr, s.min, s.max),
            None => ",,,".into(),
        };
        for r in &self.rows {
            let runs = r.eval.map(|s| s.n).or(r.train.map(|s| s.n)).unwrap_or(0);
            let _ = writeln!(out, "{},{},{},{}", r.step, runs, cells(&r.train), cells(&r.eval));
        }
        out
    }

    /// Plain-text report: headline statistics, then the checkpoint table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fmt = |s: Option<Stats>| match s {
            Some(s) => format!("{:.3} +- {:.3} (n={}, min {:.3}, max {:.3})", s.mean, s.stderr, s.n, s.min, s.max),
            None => "n/a".into(),
        };
        let _ = writeln!(out, "final evaluation   {}", fmt(self.final_eval()));
        let _ = writeln!(out, "final-window mean  {}", fmt(self.final_window()));
        let _ = writeln!(out, "whole-run mean     {}", fmt(self.whole_run()));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>10} {:>5} {:>12} {:>10} {:>12} {:>10}", "step", "runs", "train", "stderr", "eval", "stderr");
        let col = |s: &Option<Stats>| match s {
            Some(s) => (format!("{:.3}", s.mean), format!("{:.3}", s.stderr)),
            None => ("-".into(), "-".into()),
        };
        for r in &self.rows {
            let (tm, ts) = col(&r.train);
            let (em, es) = col(&r.eval);
            let runs = r.eval.map(|s| s.n).or(r.train.map(|s| s.n)).unwrap_or(0);
            let _ = writeln!(out, "{:>10} {:>5} {:>12} {:>10} {:>12} {:>10}", r.step, runs, tm, ts, em, es);
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in [("summary.csv", self.to_csv()), ("summary.txt", self.to_table())] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Aggregates run CSVs sharing one checkpoint grid.
pub fn aggregate(paths: &[PathBuf], final_window: usize) -> Result<Summary> {
    if paths.is_empty() {
        return Err(Error::Aggregation("no run CSVs to aggregate".into()));
    }
    let runs: Vec<Vec<RunRecord>> = paths.iter().map(|p| read_run_csv(p)).collect::<Result<_>>()?;
    let grid = |recs: &[RunRecord]| -> Vec<usize> {
        recs.iter().filter(|r| r.kind == RecordKind::Checkpoint).map(|r| r.step).collect()
    };
    let steps = grid(&runs[0]);
    for (p, recs) in paths.iter().zip(&runs).skip(1) {
        if grid(recs) != steps {
            return Err(Error::Aggregation(format!(
                "{} has a different checkpoint grid from {}",
                p.display(),
                paths[0].display()
            )));
        }
    }
    let mut train: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut eval: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for recs in &runs {
        let mut bin = Vec::new();
        for r in recs {
            match r.kind {
                RecordKind::Episode => bin.extend(r.episode_return),
                RecordKind::Checkpoint => {
                    if !bin.is_empty() {
                        train.entry(r.step).or_default().push(bin.iter().sum::<f64>() / bin.len() as f64);
                        bin.clear();
                    }
                    if let Some(v) = r.eval_return {
                        eval.entry(r.step).or_default().push(v);
                    }
                }
            }
        }
    }
    let rows = steps
        .iter()
        .map(|&step| SummaryRow {
            step,
            train: train.get(&step).and_then(|v| Stats::of(v)),
            eval: eval.get(&step).and_then(|v| Stats::of(v)),
        })
        .collect();
    Ok(Summary { rows, runs: runs.iter().map(|r| RunMetrics::from_records(r, final_window)).collect() })
}

/// Successful run CSVs in `dir`, in run order.
pub fn run_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("run_") && name.ends_with(".csv") && !name.contains(".failed") && !name.contains(".timing")
        })
        .collect();
    out.sort();
    Ok(out)
}

fn dir_config(dir: &Path) -> Option<ExperimentConfig> {
    ExperimentConfig::load(&dir.join("config.txt")).ok()
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub dir: PathBuf,
    pub summary: Summary,
}

/// What `aggregate --in DIR` produced.
#[derive(Debug, Clone)]
pub enum Aggregated {
    Experiment(Summary),
    Sweep(Vec<SweepRow>),
}

/// Aggregates one experiment directory (holding run CSVs) or a sweep
/// directory (holding experiment subdirectories), writing the tables next
/// to the inputs.
pub fn aggregate_dir(dir: &Path) -> Result<Aggregated> {
    let runs = run_csvs(dir)?;
    if !runs.is_empty() {
        let window = dir_config(dir).map_or(1_000, |c| c.final_window);
        let summary = aggregate(&runs, window)?;
        summary.write(dir)?;
        return Ok(Aggregated::Experiment(summary));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut rows = Vec::new();
    for sub in subdirs {
        let csvs = run_csvs(&sub)?;
        if csvs.is_empty() {
            continue;
        }
        let cfg = dir_config(&sub);
        let summary = aggregate(&csvs, cfg.as_ref().map_or(1_000, |c| c.final_window))?;
        summary.write(&sub)?;
        let label = cfg
            .map(|c| c.delay.label())
            .unwrap_or_else(|| sub.file_name().unwrap_or_default().to_string_lossy().into_owned());
        rows.push(SweepRow { label, dir: sub, summary });
    }
    if rows.is_empty() {
        return Err(Error::Aggregation(format!("{} holds no run CSVs", dir.display())));
    }
    rows.sort_by_key(|r| (delay_order(&r.label), r.label.clone()));
    let path = dir.join("sweep.csv");
    std::fs::write(&path, sweep_csv(&rows)).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("sweep.txt");
    std::fs::write(&path, sweep_table(&rows)).map_err(|e| Error::io(&path, e))?;
    Ok(Aggregated::Sweep(rows))
}

fn delay_order(label: &str) -> usize {
    label.strip_prefix("d=").and_then(|d| d.parse().ok()).unwrap_or(usize::MAX)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_SCHEMA}\nlabel,runs,final_eval_mean,final_eval_stderr,final_window_mean,final_window_stderr,whole_run_mean,whole_run_stderr\n");
    let cells = |s: Option<Stats>| s.map_or(",".into(), |s| format!("{},{}", s.mean, s.stderr));
    for r in rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.label,
            s.runs.len(),
            cells(s.final_eval()),
            cells(s.final_window()),
            cells(s.whole_run())
        );
    }
    out
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("{:<14} {:>5} {:>20} {:>20} {:>20}\n", "delay", "runs", "final eval", "final window", "whole run");
    let cell = |s: Option<Stats>| s.map_or("-".into(), |s| format!("{:.3} +- {:.3}", s.mean, s.stderr));
    for r in rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>20} {:>20} {:>20}",
            r.label,
            s.runs.len(),
            cell(s.final_eval()),
            cell(s.final_window()),
            cell(s.whole_run())
        );
    }
    out
}
