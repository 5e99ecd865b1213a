//! Coverage output: a versioned per-coordinate CSV, a text table in the
//! layout of the usual coverage tables, and an optional per-replication CSV.
//!
//! Coverage CSV columns, one row per coordinate, target and method:
//!
//! ```text
//! # saaci coverage v1
//! # problem=<name> n=<dim> sample_size=<N> seed=<seed> requested=<R> completed=<R'> excluded=<R-R'>
//! method,alpha1,alpha2,target,coordinate,active,hits,completed,coverage,mean_half_width
//! ```
//!
//! `method` is `delta` for the cell-based intervals and `baseline` for the
//! naive ones (`alpha1` is 0 there). Coordinates are numbered from 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::ReplicationRecord;
use super::summary::{cell_code, CoverageSummary, FiveNumber, MethodSummary};
use crate::error::Result;
use crate::special::chi2_quantile;

pub const CSV_VERSION_LINE: &str = "# saaci coverage v1";
pub const CSV_HEADER: &str = "method,alpha1,alpha2,target,coordinate,active,hits,completed,coverage,mean_half_width";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Table,
}

fn method_rows(out: &mut String, s: &CoverageSummary, method: &str, alphas: (f64, f64), m: &MethodSummary) {
    for (target, hits, widths, active) in [
        ("z", &m.z_hits, &m.z_mean_half_width, &s.active_z),
        ("x", &m.x_hits, &m.x_mean_half_width, &s.active_x),
    ] {
        for j in 0..s.dim {
            let rate = if m.completed == 0 { f64::NAN } else { hits[j] as f64 / m.completed as f64 };
            let _ = writeln!(
                out,
                "{method},{},{},{target},{},{},{},{},{:.6},{:.9e}",
                alphas.0,
                alphas.1,
                j + 1,
                active.contains(&j) as u8,
                hits[j],
                m.completed,
                rate,
                widths[j]
            );
        }
    }
}

pub fn coverage_csv(s: &CoverageSummary) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    let _ = writeln!(
        out,
        "# problem={} n={} sample_size={} seed={} requested={} completed={} excluded={}",
        s.problem,
        s.dim,
        s.sample_size,
        s.seed,
        s.requested,
        s.completed,
        s.excluded.len()
    );
    out.push_str(CSV_HEADER);
    out.push('\n');
    for b in &s.budgets {
        method_rows(&mut out, s, "delta", b.alphas, &b.intervals);
    }
    if let Some((alpha, m)) = &s.baseline {
        method_rows(&mut out, s, "baseline", (0.0, *alpha), m);
    }
    out
}

fn pct(v: f64) -> String {
    format!("{:5.1} %", 100.0 * v)
}

fn five_rows(out: &mut String, columns: &[(String, Option<FiveNumber>)]) {
    let _ = write!(out, "{:<8}", "");
    for (label, _) in columns {
        let _ = write!(out, "{label:>16}");
    }
    out.push('\n');
    for (k, name) in ["MIN", "Q1", "MEDIAN", "Q3", "MAX"].iter().enumerate() {
        let _ = write!(out, "{name:<8}");
        for (_, f) in columns {
            let cell = f.map_or_else(|| "-".to_string(), |f| pct(f.as_array()[k]));
            let _ = write!(out, "{cell:>16}");
        }
        out.push('\n');
    }
}

fn coord_list(v: &[usize]) -> String {
    if v.is_empty() {
        return "none".into();
    }
    // Runs of consecutive coordinates as ranges, numbered from 1.
    let mut parts = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut k = i;
        while k + 1 < v.len() && v[k + 1] == v[k] + 1 {
            k += 1;
        }
        parts.push(if k == i { format!("{}", v[i] + 1) } else { format!("{}..{}", v[i] + 1, v[k] + 1) });
        i = k + 1;
    }
    parts.join(",")
}

pub fn coverage_table(s: &CoverageSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem {}  n = {}  N = {}  seed = {}", s.problem, s.dim, s.sample_size, s.seed);
    let _ = writeln!(out, "replications: {} requested, {} completed, {} excluded", s.requested, s.completed, s.excluded.len());
    let _ = writeln!(out, "true cell: {}", s.true_cell);
    let _ = writeln!(out, "A_z = {{{}}}  A_x = {{{}}}", coord_list(&s.active_z), coord_list(&s.active_x));

    let mut z_cols = Vec::new();
    let mut x_cols = Vec::new();
    for b in &s.budgets {
        let label = format!("({}, {})", b.alphas.0, b.alphas.1);
        z_cols.push((label.clone(), b.intervals.z_summary(&s.active_z)));
        x_cols.push((label, b.intervals.x_summary(&s.active_x)));
    }
    if let Some((alpha, m)) = &s.baseline {
        let label = format!("baseline {alpha}");
        z_cols.push((label.clone(), m.z_summary(&s.active_z)));
        x_cols.push((label, m.x_summary(&s.active_x)));
    }
    out.push_str("\ncoverage of (z0)_j, j in A_z\n");
    if s.active_z.is_empty() {
        out.push_str("(empty active set)\n");
    } else {
        five_rows(&mut out, &z_cols);
    }
    out.push_str("\ncoverage of (x0)_j, j in A_x\n");
    if s.active_x.is_empty() {
        out.push_str("(empty active set)\n");
    } else {
        five_rows(&mut out, &x_cols);
    }

    out.push('\n');
    for (k, b) in s.budgets.iter().enumerate() {
        let m = &b.intervals;
        let min_of = |coords: &[usize], f: &dyn Fn(usize) -> f64| coords.iter().map(|&j| f(j)).fold(f64::INFINITY, f64::min);
        let _ = writeln!(out, "budget ({}, {}):", b.alphas.0, b.alphas.1);
        if s.completed > 0 {
            let _ = writeln!(out, "  region coverage        {}", pct(s.region_coverage(k)));
        }
        if !s.inactive_z.is_empty() && s.completed > 0 {
            let _ = writeln!(out, "  inactive z, lowest     {}", pct(min_of(&s.inactive_z, &|j| m.z_coverage(j))));
        }
        if !s.inactive_x.is_empty() && s.completed > 0 {
            let _ = writeln!(out, "  inactive x, lowest     {}", pct(min_of(&s.inactive_x, &|j| m.x_coverage(j))));
        }
        if let (Some(ratios), Some((alpha, _))) = (s.width_ratios(k), &s.baseline) {
            if let (Some(f), Ok(a), Ok(b2)) = (super::summary::five_number(&ratios), chi2_quantile(1, *alpha), chi2_quantile(1, b.alphas.1)) {
                let _ = writeln!(out, "  width ratio vs baseline median {:.4}  (sqrt(chi2_1({}) / chi2_1({})) = {:.4})", f.median, b.alphas.1, alpha, (b2 / a).sqrt());
            }
        }
        let _ = writeln!(out, "  selected cells ({} distinct):", b.cells.len());
        for (code, count) in b.cells.iter().take(10) {
            let mark = if *code == s.true_cell { "  <- true cell" } else { "" };
            let _ = writeln!(out, "    {count:>6}  {code}{mark}");
        }
    }
    if !s.excluded.is_empty() {
        out.push_str("\nexcluded replications:\n");
        for (r, why) in &s.excluded {
            let _ = writeln!(out, "  {r}: {why}");
        }
    }
    out
}

/// `replication,status,budget,region_hit,z_hits,x_hits,cell`; excluded
/// replications get one row with the reason in the cell column.
pub fn raw_csv(records: &[ReplicationRecord]) -> String {
    let mut out = String::from("# saaci replications v1\nreplication,status,budget,region_hit,z_hits,x_hits,cell\n");
    let mut ordered: Vec<&ReplicationRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.index);
    for rec in ordered {
        match &rec.outcome {
            Ok(d) => {
                for (k, b) in d.budgets.iter().enumerate() {
                    let zh = b.z_hit.iter().filter(|h| **h).count();
                    let xh = b.x_hit.iter().filter(|h| **h).count();
                    let _ = writeln!(out, "{},ok,{},{},{},{},{}", rec.index, k + 1, b.region_hit as u8, zh, xh, cell_code(&b.cell));
                }
            }
            Err(why) => {
                let _ = writeln!(out, "{},excluded,,,,,{}", rec.index, why.replace([',', '\n'], ";"));
            }
        }
    }
    out
}

/// Write the chosen format (and optionally the raw CSV) into `dir`.
pub fn emit(summary: &CoverageSummary, records: Option<&[ReplicationRecord]>, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let (name, body) = match format {
        Format::Csv => ("coverage.csv", coverage_csv(summary)),
        Format::Table => ("coverage.txt", coverage_table(summary)),
    };
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    written.push(path);
    if let Some(recs) = records {
        let path = dir.join("replications.csv");
        std::fs::write(&path, raw_csv(recs))?;
        written.push(path);
    }
    Ok(written)
}
