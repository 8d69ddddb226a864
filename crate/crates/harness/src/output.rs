//! Result files: `results.csv` (one row per method, replication and p),
//! `summary.csv`, `failures.csv` and `trace_<method>.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::experiment::{AveragedTrace, ExperimentOutput, Failure, ResultRow, SummaryRow};
use crate::plot::emit_plots;

pub const RESULTS_HEADER: &str = "method,p,replication,seed,test_mcr,bayes_mcr,final_sparsity,wall_seconds";
pub const TRACE_HEADER: &str = "iteration,L,deviance,xi_bar,test_mcr";

fn opt(v: Option<f64>, missing: &str) -> String {
    v.map_or_else(|| missing.to_string(), |x| x.to_string())
}

/// Method labels may contain commas and parentheses; quote when needed.
fn field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_record(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Failed cells carry `NA` in `test_mcr`; `wall_seconds` is blank unless
/// timing was requested.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            field(&r.method),
            r.p,
            r.replication,
            r.seed,
            opt(r.test_mcr, "NA"),
            opt(r.bayes_mcr, ""),
            opt(r.final_sparsity, ""),
            opt(r.wall_seconds, ""),
        );
    }
    s
}

pub fn parse_results_csv(text: &str, path: &Path) -> Result<Vec<ResultRow>> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(err(1, format!("expected header '{RESULTS_HEADER}'"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let f = split_record(line);
        if f.len() != 8 {
            return Err(err(lineno, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            match s {
                "" | "NA" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| err(lineno, format!("'{v}' is not a number"))),
            }
        };
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(lineno, format!("'{s}' is not an integer")));
        rows.push(ResultRow {
            method: f[0].clone(),
            p: int(&f[1])? as usize,
            replication: int(&f[2])? as usize,
            seed: int(&f[3])?,
            test_mcr: num(&f[4])?,
            bayes_mcr: num(&f[5])?,
            final_sparsity: num(&f[6])?,
            wall_seconds: num(&f[7])?,
        });
    }
    Ok(rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_results_csv(&text, path)
}

pub fn summary_csv(table: &[SummaryRow], bayes: Option<(f64, f64)>) -> String {
    let mut s = String::from("method,p,swept,mean_mcr,se,reps\n");
    if let Some((m, se)) = bayes {
        let _ = writeln!(s, "Bayes,,false,{m},{se},");
    }
    for r in table {
        let _ = writeln!(s, "{},{},{},{},{},{}", field(&r.method), r.p, r.swept, r.mean, r.se, r.reps);
    }
    s
}

pub fn failures_csv(failures: &[Failure]) -> String {
    let mut s = String::from("method,replication,reason\n");
    for f in failures {
        let _ = writeln!(s, "{},{},{}", field(&f.method), f.replication, field(&f.reason));
    }
    s
}

pub fn trace_csv(t: &AveragedTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for i in 0..t.iteration.len() {
        let mcr = t.test_mcr.as_ref().map(|v| v[i]);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.iteration[i],
            t.l[i],
            t.deviance[i],
            t.xi_bar[i],
            opt(mcr, "")
        );
    }
    s
}

/// File-name-safe form of a method label.
pub fn file_stem(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '-' => out.push(c),
            '=' => out.push('-'),
            _ => {
                if !out.ends_with('_') {
                    out.push('_');
                }
            }
        }
    }
    out.trim_end_matches('_').to_string()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Writes every output of an experiment into `dir`; returns the files written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), results_csv(&out.rows))?;
    put("summary.csv".into(), summary_csv(&out.table, out.bayes))?;
    if !out.failures.is_empty() {
        put("failures.csv".into(), failures_csv(&out.failures))?;
    }
    for (label, trace) in &out.traces {
        put(format!("trace_{}.csv", file_stem(label)), trace_csv(trace))?;
    }
    if plots {
        for (label, trace) in &out.traces {
            written.extend(emit_plots(trace, dir, &file_stem(label))?);
        }
    }
    Ok(written)
}

/// Plain-text rendering of the summary table.
pub fn format_table(table: &[SummaryRow], bayes: Option<(f64, f64)>) -> String {
    let width = table.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut s = format!("{:<width$}  {:>4}  {:>8}  {:>7}  {:>4}\n", "method", "p", "MCR", "se", "reps");
    if let Some((m, se)) = bayes {
        let _ = writeln!(s, "{:<width$}  {:>4}  {:>8.4}  {:>7.4}", "Bayes", "", m, se);
    }
    for r in table {
        let p = if r.swept { format!("{}*", r.p) } else { r.p.to_string() };
        let _ = writeln!(s, "{:<width$}  {:>4}  {:>8.4}  {:>7.4}  {:>4}", r.method, p, r.mean, r.se, r.reps);
    }
    s
}
