//! Serialization and the write-time consistency checks. Every emitted total
//! is re-added from its components before any bytes leave the process.

use std::io::Write;
use std::path::{Path, PathBuf};

use semiflex::geo::{GroupSummary, ModeTotals};
use semiflex::{CaseStudySummary, CostBreakdown};
use serde::Serialize;

use crate::commands::{AnalyzeReport, CaseStudyReport, OptimizeReport, SweepRow, VehicleRow};
use crate::error::{CliError, CliResult};

/// Relative tolerance on re-added totals.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn rel_gap(total: f64, sum: f64) -> f64 {
    (total - sum).abs() / sum.abs().max(total.abs()).max(1e-12)
}

fn check_sum(what: &str, total: f64, sum: f64) -> CliResult<()> {
    let gap = rel_gap(total, sum);
    if gap <= SUM_TOLERANCE && total.is_finite() {
        Ok(())
    } else {
        Err(CliError::Internal(format!(
            "{what}: total {total} vs component sum {sum} (gap {gap:.3e})"
        )))
    }
}

pub fn check_breakdown(what: &str, b: &CostBreakdown) -> CliResult<()> {
    let sum: f64 = b.components().iter().sum();
    check_sum(what, b.total, sum)?;
    check_sum(what, b.total, b.user() + b.operator())
}

pub fn check_row(what: &str, r: &VehicleRow) -> CliResult<()> {
    let (Some(total), Some(sum)) = (r.total, r.component_sum()) else {
        return Ok(());
    };
    check_sum(what, total, sum)?;
    if let (Some(u), Some(o)) = (r.user_cost, r.operator_cost) {
        check_sum(what, total, u + o)?;
    }
    Ok(())
}

fn check_mode(what: &str, m: &ModeTotals) -> CliResult<()> {
    let user = m.access_cost + m.waiting_cost + m.riding_cost;
    if user != 0.0 || m.user_cost != 0.0 {
        check_sum(what, m.user_cost, user)?;
    }
    if let (Some(op), Some(veh), Some(operator)) = (m.operating_cost, m.vehicle_cost, m.operator_cost) {
        if operator != 0.0 || op + veh != 0.0 {
            check_sum(what, operator, op + veh)?;
        }
    }
    if let (Some(g), Some(operator)) = (m.generalized_cost, m.operator_cost) {
        if g != 0.0 {
            check_sum(what, g, m.user_cost + operator)?;
        }
    }
    Ok(())
}

fn check_group(what: &str, g: &GroupSummary) -> CliResult<()> {
    check_mode(&format!("{what}.fixed_route"), &g.fixed_route)?;
    check_mode(&format!("{what}.semi_on_demand"), &g.semi_on_demand)
}

pub fn check_summary(s: &CaseStudySummary) -> CliResult<()> {
    check_group("all_feeders", &s.all_feeders)?;
    check_group("routes_with_flexible_portion", &s.routes_with_flexible_portion)?;
    check_group("flexible_area", &s.flexible_area)
}

pub fn check_analyze(r: &AnalyzeReport) -> CliResult<()> {
    check_breakdown("optimum", &r.summary.breakdown)?;
    check_breakdown("fixed route", &r.summary.fixed_route_breakdown)?;
    for p in &r.curve {
        let sum = p.access + p.waiting + p.riding_x + p.riding_y + p.operating_x + p.operating_y + p.vehicle;
        check_sum(&format!("curve at x_f = {}", p.x_f_km), p.total, sum)?;
    }
    Ok(())
}

pub fn check_optimize(r: &OptimizeReport) -> CliResult<()> {
    r.rows.iter().try_for_each(|row| check_row(&row.vehicle, row))
}

pub fn check_sweep(rows: &[SweepRow]) -> CliResult<()> {
    rows.iter().try_for_each(|r| {
        check_row(
            &format!("{} = {} / {}", r.parameter, r.parameter_value, r.row.vehicle),
            &r.row,
        )
    })
}

pub fn check_casestudy(r: &CaseStudyReport) -> CliResult<()> {
    for b in &r.breakdowns {
        check_breakdown("corridor", b)?;
    }
    check_summary(&r.summary)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Serialize)]
struct SweepKey {
    parameter: &'static str,
    parameter_value: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> CliResult<Vec<u8>> {
    to_csv(rows.iter().map(|r| {
        (
            SweepKey {
                parameter: r.parameter,
                parameter_value: r.parameter_value,
            },
            &r.row,
        )
    }))
}

/// Where data goes: files under a directory, or stdout.
#[derive(Debug, Clone)]
pub enum Sink {
    Stdout,
    Dir(PathBuf),
}

impl Sink {
    pub fn new(out: Option<&Path>) -> CliResult<Self> {
        match out {
            None => Ok(Sink::Stdout),
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                Ok(Sink::Dir(dir.to_path_buf()))
            }
        }
    }

    /// Writes `bytes` to `<dir>/<stem>.<ext>`, or to stdout.
    pub fn emit(&self, stem: &str, format: Format, bytes: &[u8]) -> CliResult<Option<PathBuf>> {
        self.emit_named(&format!("{stem}.{}", format.extension()), bytes)
    }

    /// Like [`Sink::emit`] but only written when the sink is a directory.
    pub fn emit_file(&self, name: &str, bytes: &[u8]) -> CliResult<Option<PathBuf>> {
        match self {
            Sink::Stdout => Ok(None),
            Sink::Dir(_) => self.emit_named(name, bytes),
        }
    }

    fn emit_named(&self, name: &str, bytes: &[u8]) -> CliResult<Option<PathBuf>> {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
                Ok(None)
            }
            Sink::Dir(dir) => {
                let path = dir.join(name);
                std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Ok(Some(path))
            }
        }
    }
}
