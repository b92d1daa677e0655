//! Command-line front end for the semi-on-demand route design model.
//!
//! Data goes to stdout, or to `<out>/<command>.<csv|json>` with `--out`.
//! The human-readable summary always goes to stderr.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use commands::{SweepMode, SweepParam, SweepRange};
use config::{DemandShape, Overrides, RunConfig};
use error::{invalid, CliResult};
use output::{Format, Sink};

#[derive(Debug, Parser)]
#[command(name = "semiflex", version, about = "Design semi-on-demand hybrid feeder routes")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in parameter set: cta126 or cta84.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Directory for output files; stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Fixed headway, minutes.
    #[arg(long, global = true, value_name = "MIN")]
    pub headway_min: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub demand_dist: Option<DemandShape>,
    /// Total demand, pax/h.
    #[arg(long, global = true, value_name = "PAX_H")]
    pub total_demand: Option<f64>,
    /// Vehicle catalog CSV: name,capacity,operating_cost_per_km,vehicle_cost_per_h.
    #[arg(long, global = true, value_name = "PATH")]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-headway analysis: route form, optimal flexible portion and cost curves.
    Analyze {
        /// Points on the sampled curves.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Joint optimization of flexible portion, fleet and vehicle size.
    Optimize,
    /// Re-runs analyze or optimize over a parameter grid.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Grid points, both ends included.
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = SweepMode::Optimize)]
        mode: SweepMode,
    },
    /// Classifies demand points around rail stations into fixed and flexible areas.
    Casestudy {
        /// Stations as CSV (id,x_km,y_km) or GeoJSON points.
        #[arg(long, value_name = "PATH")]
        stations: Option<PathBuf>,
        /// Demand points CSV: id,x_km,y_km,trips_per_h.
        #[arg(long, value_name = "PATH")]
        demand: Option<PathBuf>,
        /// Also write assignments.geojson.
        #[arg(long)]
        geojson: bool,
        /// Corridors per side of each station.
        #[arg(long)]
        max_corridors: Option<usize>,
    },
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let c = &cli.common;
    let mut ov = Overrides {
        preset: c.preset.clone(),
        headway_min: c.headway_min,
        demand_shape: c.demand_dist,
        total_demand: c.total_demand,
        catalog: c.catalog.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Analyze { samples } => ov.samples = *samples,
        Command::Casestudy {
            stations,
            demand,
            geojson,
            max_corridors,
        } => {
            ov.stations = stations.clone();
            ov.demand_points = demand.clone();
            ov.geojson = *geojson;
            ov.max_corridors = *max_corridors;
        }
        _ => {}
    }
    let needs_corridor = !matches!(cli.command, Command::Casestudy { .. });
    match &c.config {
        Some(path) => {
            let file = config::read_file_config(path)?;
            let base = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            config::resolve(Some((&file, Some(base))), &ov, needs_corridor)
        }
        None => config::resolve(None, &ov, needs_corridor),
    }
}

fn note_written(path: Option<PathBuf>) {
    if let Some(p) = path {
        eprintln!("wrote {}", p.display());
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.digits$}"))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    let m = &cfg.model;
    let format = cli.common.format;
    let sink = Sink::new(cli.common.out.as_deref())?;
    match &cli.command {
        Command::Analyze { .. } => {
            let r = commands::analyze(m)?;
            output::check_analyze(&r)?;
            let s = &r.summary;
            eprintln!(
                "{} ({}, H = {:.2} min): {} route, x_f* = {:.3} km, s* = {:.3} veh, total = {:.2} $/h",
                s.preset, s.demand_shape, s.headway_min, s.form, s.x_f_km, s.fleet, s.breakdown.total
            );
            match format {
                Format::Json => note_written(sink.emit("analyze", format, &output::to_json(&r)?)?),
                Format::Csv => {
                    note_written(sink.emit("analyze", format, &output::to_csv(&r.curve)?)?);
                    note_written(sink.emit_file("analyze_summary.json", &output::to_json(&r.summary)?)?);
                }
            }
        }
        Command::Optimize => {
            let r = commands::optimize(m)?;
            output::check_optimize(&r)?;
            eprintln!(
                "{} ({}): optimal vehicle {}",
                r.preset, r.demand_shape, r.optimal_vehicle
            );
            for row in &r.rows {
                eprintln!(
                    "  {:<12} x_f = {:>7} km  s = {:>7}  h = {:>7} min  total = {:>9} $/h{}",
                    row.vehicle,
                    fmt_opt(row.x_f_km, 3),
                    fmt_opt(row.fleet, 3),
                    fmt_opt(row.headway_min, 3),
                    fmt_opt(row.total, 2),
                    if row.optimal { "  *" } else { "" }
                );
            }
            let bytes = match format {
                Format::Json => output::to_json(&r)?,
                Format::Csv => output::to_csv(&r.rows)?,
            };
            note_written(sink.emit("optimize", format, &bytes)?);
        }
        Command::Sweep {
            param,
            from,
            to,
            steps,
            mode,
        } => {
            let range = SweepRange {
                param: *param,
                from: *from,
                to: *to,
                steps: *steps,
                mode: *mode,
            };
            let rows = commands::sweep(m, &range)?;
            output::check_sweep(&rows)?;
            eprintln!(
                "{}: swept {} over {} values, {} rows",
                m.name,
                param.name(),
                steps,
                rows.len()
            );
            let bytes = match format {
                Format::Json => output::to_json(&rows)?,
                Format::Csv => output::sweep_csv(&rows)?,
            };
            note_written(sink.emit("sweep", format, &bytes)?);
        }
        Command::Casestudy { .. } => {
            let inputs = cfg
                .casestudy
                .as_ref()
                .ok_or_else(|| invalid("casestudy: --stations and --demand are required"))?;
            let r = commands::casestudy(m, inputs)?;
            output::check_casestudy(&r)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            let s = &r.summary;
            eprintln!(
                "{} active routes, {} with a flexible portion; threshold F* = {} pax/h ({} pax/trip)",
                s.all_feeders.routes,
                s.routes_with_flexible_portion.routes,
                fmt_opt(s.threshold_at_max_width, 1),
                fmt_opt(s.threshold_per_trip_at_max_width, 2),
            );
            let summary = output::to_json(s)?;
            match &sink {
                Sink::Stdout => note_written(sink.emit("summary", Format::Json, &summary)?),
                Sink::Dir(_) => {
                    let mut assignments = Vec::new();
                    semiflex::io::write_assignments_csv(&mut assignments, &r.pipeline.assignments)
                        .map_err(|e| error::CliError::Internal(e.to_string()))?;
                    note_written(sink.emit_file("assignments.csv", &assignments)?);
                    note_written(sink.emit_file("summary.json", &summary)?);
                    let corridors = match format {
                        Format::Json => output::to_json(&r.corridors)?,
                        Format::Csv => output::to_csv(&r.corridors)?,
                    };
                    note_written(sink.emit("corridors", format, &corridors)?);
                    if inputs.geojson {
                        let fc = semiflex::io::assignments_geojson(&r.pipeline.assignments, &r.points);
                        note_written(sink.emit_file("assignments.geojson", &output::to_json(&fc)?)?);
                    }
                }
            }
        }
    }
    Ok(())
}
