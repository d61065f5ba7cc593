//! On-disk layout of experiment results.
//!
//! ```text
//! <root>/<experiment>/summary.csv             method,mean_mse,std_mse,diverged,median_mse
//! <root>/<experiment>/observation_mse.csv     repetition,mse
//! <root>/<experiment>/<method>/mse_t.csv      repetition,status,t<k>,...  (one row per repetition)
//! <root>/<experiment>/<method>/trace.csv      t,truth,prediction          (first repetition)
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::experiment::{MethodResult, ResultTable, RunOutcome};
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes `table` under `root/<experiment>/` and returns that directory.
pub fn write_results(table: &ResultTable, root: &Path) -> Result<PathBuf> {
    let dir = root.join(&table.experiment);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let path = dir.join("summary.csv");
    let mut w = create(&path)?;
    writeln!(w, "method,mean_mse,std_mse,diverged,median_mse").map_err(io_at(&path))?;
    for s in table.summaries() {
        writeln!(
            w,
            "{},{:?},{:?},{},{:?}",
            s.label, s.mean_mse, s.std_mse, s.diverged, s.median_mse
        )
        .map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))?;

    let path = dir.join("observation_mse.csv");
    let mut w = create(&path)?;
    writeln!(w, "repetition,mse").map_err(io_at(&path))?;
    for (r, v) in table.observation_mse.iter().enumerate() {
        writeln!(w, "{r},{v:?}").map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))?;

    let n_test = table.trace_truth.len();
    for m in &table.methods {
        let path = dir.join(&m.label).join("mse_t.csv");
        let mut w = create(&path)?;
        let mut header = String::from("repetition,status");
        for k in 0..n_test {
            header.push_str(&format!(",t{}", table.test_start + k));
        }
        writeln!(w, "{header}").map_err(io_at(&path))?;
        for (r, run) in m.runs.iter().enumerate() {
            let mut line = format!("{r}");
            match run {
                RunOutcome::Completed(series) => {
                    line.push_str(",ok");
                    for v in series {
                        line.push_str(&format!(",{v:?}"));
                    }
                }
                RunOutcome::Diverged { timestep } => {
                    line.push_str(&format!(",diverged@{timestep}"));
                    for _ in 0..n_test {
                        line.push_str(",nan");
                    }
                }
            }
            writeln!(w, "{line}").map_err(io_at(&path))?;
        }
        w.flush().map_err(io_at(&path))?;

        if let Some(trace) = &m.trace {
            let path = dir.join(&m.label).join("trace.csv");
            let mut w = create(&path)?;
            writeln!(w, "t,truth,prediction").map_err(io_at(&path))?;
            for (k, (truth, pred)) in table.trace_truth.iter().zip(trace).enumerate() {
                writeln!(w, "{},{truth:?},{pred:?}", table.test_start + k).map_err(io_at(&path))?;
            }
            w.flush().map_err(io_at(&path))?;
        }
    }
    Ok(dir)
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    reader
        .records()
        .map(|r| {
            r.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}

fn parse_cell<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, idx: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: rec.position().map_or(0, |p| p.line() as usize),
        message: format!("cannot parse `{raw}` in column {}", idx + 1),
    })
}

/// Reads a directory written by [`write_results`]. Summaries are recomputed
/// from the stored per-repetition series.
pub fn read_results(dir: &Path) -> Result<ResultTable> {
    let summary_path = dir.join("summary.csv");
    let labels: Vec<String> = read_csv(&summary_path)?
        .iter()
        .map(|r| r.get(0).unwrap_or("").to_owned())
        .collect();
    if labels.is_empty() {
        return Err(Error::Parse {
            path: summary_path,
            line: 0,
            message: "no methods listed".into(),
        });
    }

    let mut methods = Vec::with_capacity(labels.len());
    let mut test_start = 0;
    let mut trace_truth = Vec::new();
    for label in labels {
        let path = dir.join(&label).join("mse_t.csv");
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader.headers().map_err(|e| Error::Parse {
            path: path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
        if let Some(first) = header.get(2) {
            test_start = first.trim_start_matches('t').parse().unwrap_or(0);
        }
        let mut runs = Vec::new();
        for rec in read_csv(&path)? {
            let status = rec.get(1).unwrap_or("");
            if let Some(ts) = status.strip_prefix("diverged@") {
                let timestep = ts.parse().unwrap_or(0);
                runs.push(RunOutcome::Diverged { timestep });
            } else {
                let series = (2..rec.len())
                    .map(|i| parse_cell::<f64>(&path, &rec, i))
                    .collect::<Result<Vec<_>>>()?;
                runs.push(RunOutcome::Completed(series));
            }
        }
        let trace_path = dir.join(&label).join("trace.csv");
        let trace = if trace_path.exists() {
            let rows = read_csv(&trace_path)?;
            trace_truth = rows
                .iter()
                .map(|r| parse_cell::<f64>(&trace_path, r, 1))
                .collect::<Result<_>>()?;
            Some(
                rows.iter()
                    .map(|r| parse_cell::<f64>(&trace_path, r, 2))
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        methods.push(MethodResult { label, runs, trace });
    }

    let obs_path = dir.join("observation_mse.csv");
    let observation_mse = if obs_path.exists() {
        read_csv(&obs_path)?
            .iter()
            .map(|r| parse_cell::<f64>(&obs_path, r, 1))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    Ok(ResultTable {
        experiment: dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        test_start,
        methods,
        observation_mse,
        trace_node: 0,
        trace_truth,
    })
}
