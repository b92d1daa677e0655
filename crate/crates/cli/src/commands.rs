//! The four subcommands as pure functions from a resolved configuration to
//! serializable reports. Nothing here touches stdout or the filesystem
//! except `casestudy`, which has to read its inputs.

use rayon::prelude::*;
use semiflex::geo::{corridor_fleets, CorridorStatus, PipelineOutput};
use semiflex::{
    classify_route_form, cost_breakdown, fleet_size, optimal_flexible_demand, optimal_flexible_portion,
    optimize_over_fleet, run_pipeline, summarize_case_study, CaseStudySummary, CostBreakdown, DemandPoint,
    DesignSolution, ModelError, RouteForm,
};
use serde::Serialize;

use crate::config::{CaseStudyInputs, DemandSpec, ModelSpec};
use crate::error::{invalid, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub preset: String,
    pub demand_shape: &'static str,
    pub total_demand: f64,
    pub headway_min: f64,
    pub form: RouteForm,
    /// `t̄a / d̄`, h/km.
    pub ratio: f64,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    /// Unclamped optimal flexible demand, pax/h; absent when detours are free.
    pub flexible_demand: Option<f64>,
    pub x_f_km: f64,
    pub fleet: f64,
    pub fleet_ceil: f64,
    pub fleet_fixed_route: f64,
    pub breakdown: CostBreakdown,
    pub fixed_route_breakdown: CostBreakdown,
}

/// One sample of the cost and fleet curves over the flexible portion.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub x_f_km: f64,
    pub total: f64,
    pub fleet: f64,
    pub access: f64,
    pub waiting: f64,
    pub riding_x: f64,
    pub riding_y: f64,
    pub operating_x: f64,
    pub operating_y: f64,
    pub vehicle: f64,
    /// Total per passenger, $.
    pub total_per_pax: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub summary: AnalyzeSummary,
    pub curve: Vec<CurvePoint>,
}

pub fn analyze(m: &ModelSpec) -> CliResult<AnalyzeReport> {
    let corridor = m.corridor()?;
    let demand = m.demand_distribution()?;
    let h = m.headway;
    let class = classify_route_form(&corridor, &demand, &m.params, h)?;
    let (x_f, form) = optimal_flexible_portion(&corridor, &demand, &m.params, h)?;
    let fleet = fleet_size(&corridor, &demand, h, x_f)?;
    let flexible_demand = match optimal_flexible_demand(&corridor, &m.params, h) {
        Ok(f) => Some(f),
        Err(ModelError::Domain(_)) if class.degenerate_geometry => None,
        Err(e) => return Err(e.into()),
    };
    let total = demand.total();
    let n = m.samples;
    let curve = (0..n)
        .map(|i| {
            let x = corridor.route_length * i as f64 / (n - 1) as f64;
            let b = cost_breakdown(&corridor, &demand, &m.params, h, x)?;
            Ok(CurvePoint {
                x_f_km: x,
                total: b.total,
                fleet: fleet_size(&corridor, &demand, h, x)?,
                access: b.access,
                waiting: b.waiting,
                riding_x: b.riding_x,
                riding_y: b.riding_y,
                operating_x: b.operating_x,
                operating_y: b.operating_y,
                vehicle: b.vehicle,
                total_per_pax: per_pax(b.total, total),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(AnalyzeReport {
        summary: AnalyzeSummary {
            preset: m.name.clone(),
            demand_shape: m.shape_name(),
            total_demand: total,
            headway_min: h * 60.0,
            form,
            ratio: class.ratio,
            lower_threshold: class.lower_threshold,
            upper_threshold: class.upper_threshold,
            flexible_demand,
            x_f_km: x_f,
            fleet,
            fleet_ceil: semiflex::fleet_size_ceil(fleet),
            fleet_fixed_route: fleet_size(&corridor, &demand, h, 0.0)?,
            breakdown: cost_breakdown(&corridor, &demand, &m.params, h, x_f)?,
            fixed_route_breakdown: cost_breakdown(&corridor, &demand, &m.params, h, 0.0)?,
        },
        curve,
    })
}

fn per_pax(cost: f64, pax: f64) -> f64 {
    if pax > 0.0 {
        cost / pax
    } else {
        0.0
    }
}

/// One vehicle's row of the joint-optimization table. Infeasible rows keep
/// the vehicle columns and leave the design columns empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleRow {
    pub vehicle: String,
    pub capacity: Option<f64>,
    pub feasible: bool,
    pub optimal: bool,
    pub x_f_km: Option<f64>,
    pub fleet: Option<f64>,
    pub headway_min: Option<f64>,
    pub fleet_lower_bound: Option<f64>,
    pub avg_access_min: Option<f64>,
    pub avg_wait_min: Option<f64>,
    pub avg_ride_min: Option<f64>,
    pub std_access_min: Option<f64>,
    pub std_wait_min: Option<f64>,
    pub std_ride_min: Option<f64>,
    pub access: Option<f64>,
    pub waiting: Option<f64>,
    pub riding_x: Option<f64>,
    pub riding_y: Option<f64>,
    pub operating_x: Option<f64>,
    pub operating_y: Option<f64>,
    pub vehicle_cost: Option<f64>,
    pub user_cost: Option<f64>,
    pub operator_cost: Option<f64>,
    pub total: Option<f64>,
    pub note: Option<String>,
}

impl VehicleRow {
    fn feasible(s: &DesignSolution, optimal: bool) -> Self {
        let b = &s.breakdown;
        let m = &s.metrics;
        Self {
            vehicle: s.vehicle.name.clone(),
            capacity: Some(s.vehicle.capacity),
            feasible: true,
            optimal,
            x_f_km: Some(s.x_f),
            fleet: Some(s.fleet),
            headway_min: Some(s.headway * 60.0),
            fleet_lower_bound: Some(s.fleet_lower_bound),
            avg_access_min: Some(m.avg_access),
            avg_wait_min: Some(m.avg_wait),
            avg_ride_min: Some(m.avg_ride),
            std_access_min: Some(m.std_access),
            std_wait_min: Some(m.std_wait),
            std_ride_min: Some(m.std_ride),
            access: Some(b.access),
            waiting: Some(b.waiting),
            riding_x: Some(b.riding_x),
            riding_y: Some(b.riding_y),
            operating_x: Some(b.operating_x),
            operating_y: Some(b.operating_y),
            vehicle_cost: Some(b.vehicle),
            user_cost: Some(b.user()),
            operator_cost: Some(b.operator()),
            total: Some(b.total),
            note: None,
        }
    }

    fn infeasible(name: &str, capacity: Option<f64>, why: String) -> Self {
        Self {
            vehicle: name.to_string(),
            capacity,
            feasible: false,
            optimal: false,
            x_f_km: None,
            fleet: None,
            headway_min: None,
            fleet_lower_bound: None,
            avg_access_min: None,
            avg_wait_min: None,
            avg_ride_min: None,
            std_access_min: None,
            std_wait_min: None,
            std_ride_min: None,
            access: None,
            waiting: None,
            riding_x: None,
            riding_y: None,
            operating_x: None,
            operating_y: None,
            vehicle_cost: None,
            user_cost: None,
            operator_cost: None,
            total: None,
            note: Some(why),
        }
    }

    /// Recomputes the component sum of a feasible row, if any.
    pub fn component_sum(&self) -> Option<f64> {
        Some(
            self.access?
                + self.waiting?
                + self.riding_x?
                + self.riding_y?
                + self.operating_x?
                + self.operating_y?
                + self.vehicle_cost?,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub preset: String,
    pub demand_shape: &'static str,
    pub capacity_buffer: f64,
    pub optimal_vehicle: String,
    pub rows: Vec<VehicleRow>,
}

pub fn optimize(m: &ModelSpec) -> CliResult<OptimizeReport> {
    let corridor = m.corridor()?;
    let demand = m.demand_distribution()?;
    let result = optimize_over_fleet(&corridor, &demand, &m.params, &m.catalog, &m.policy()?)?;
    let rows = result
        .table
        .iter()
        .enumerate()
        .map(|(i, o)| match &o.result {
            Ok(s) => VehicleRow::feasible(s, i == result.best),
            Err(e) => VehicleRow::infeasible(&o.vehicle.name, Some(o.vehicle.capacity), e.to_string()),
        })
        .collect();
    Ok(OptimizeReport {
        preset: m.name.clone(),
        demand_shape: m.shape_name(),
        capacity_buffer: m.capacity_buffer,
        optimal_vehicle: result.best_solution().vehicle.name.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    /// Multiplier on operating and vehicle costs.
    #[value(name = "operator_cost_scale", alias = "operator-cost-scale")]
    OperatorCostScale,
    /// Minutes; fixed-headway mode only.
    Headway,
    /// Total demand, pax/h.
    Demand,
    /// Mean detour distance, km.
    Detour,
    /// Mean access time, minutes.
    #[value(name = "access_time", alias = "access-time")]
    AccessTime,
    /// $/h.
    #[value(name = "value_of_time", alias = "value-of-time")]
    ValueOfTime,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::OperatorCostScale => "operator_cost_scale",
            SweepParam::Headway => "headway",
            SweepParam::Demand => "demand",
            SweepParam::Detour => "detour",
            SweepParam::AccessTime => "access_time",
            SweepParam::ValueOfTime => "value_of_time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepMode {
    Analyze,
    Optimize,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRange {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    /// Inclusive of both ends.
    pub steps: usize,
    pub mode: SweepMode,
}

impl SweepRange {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(invalid("sweep range: --from and --to must be finite"));
        }
        match self.steps {
            0 => Err(invalid("sweep range: --steps must be at least 1")),
            1 if self.from != self.to => Err(invalid("sweep range: one step needs --from equal to --to")),
            1 => Ok(vec![self.from]),
            n => Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.to
                    } else {
                        self.from + (self.to - self.from) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub parameter_value: f64,
    #[serde(flatten)]
    pub row: VehicleRow,
}

/// The model with one parameter replaced.
pub fn apply_sweep_value(m: &ModelSpec, p: SweepParam, value: f64, mode: SweepMode) -> CliResult<ModelSpec> {
    let mut out = m.clone();
    match p {
        SweepParam::OperatorCostScale => {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(format!("operator_cost_scale: must be positive, got {value}")));
            }
            out.params = m
                .params
                .with_operator_costs(m.params.operating_cost * value, m.params.vehicle_cost * value);
            out.catalog = m.catalog.iter().map(|v| v.with_cost_scale(value)).collect();
        }
        SweepParam::Headway => {
            if mode == SweepMode::Optimize {
                return Err(invalid(
                    "headway: the joint optimizer chooses the headway; sweep it with --mode analyze",
                ));
            }
            out.headway = value / 60.0;
        }
        SweepParam::Demand => match m.demand {
            DemandSpec::Empirical(_) if value == 0.0 => {
                return Err(invalid("demand: cannot rescale an empirical profile to zero"));
            }
            _ => out.total_demand = Some(value),
        },
        SweepParam::Detour => out.mean_detour = value,
        SweepParam::AccessTime => out.mean_access_time = value / 60.0,
        SweepParam::ValueOfTime => out.params.value_of_time = value,
    }
    out.validate()
        .map_err(|e| invalid(format!("{} = {value}: {e}", p.name())))?;
    Ok(out)
}

fn sweep_point(m: &ModelSpec, r: &SweepRange, value: f64) -> CliResult<Vec<SweepRow>> {
    let spec = apply_sweep_value(m, r.param, value, r.mode)?;
    let rows = match r.mode {
        SweepMode::Optimize => match optimize(&spec) {
            Ok(rep) => rep.rows,
            Err(crate::error::CliError::Infeasible(why)) => spec
                .catalog
                .iter()
                .map(|v| VehicleRow::infeasible(&v.name, Some(v.capacity), why.clone()))
                .collect(),
            Err(e) => return Err(e),
        },
        SweepMode::Analyze => {
            let s = analyze(&spec)?.summary;
            let b = s.breakdown;
            vec![VehicleRow {
                vehicle: "fixed-headway".to_string(),
                capacity: None,
                feasible: true,
                optimal: true,
                x_f_km: Some(s.x_f_km),
                fleet: Some(s.fleet),
                headway_min: Some(s.headway_min),
                fleet_lower_bound: None,
                note: Some(s.form.to_string()),
                ..VehicleRow::feasible_from_breakdown(&b)
            }]
        }
    };
    Ok(rows
        .into_iter()
        .map(|row| SweepRow {
            parameter: r.param.name(),
            parameter_value: value,
            row,
        })
        .collect())
}

impl VehicleRow {
    fn feasible_from_breakdown(b: &CostBreakdown) -> Self {
        Self {
            access: Some(b.access),
            waiting: Some(b.waiting),
            riding_x: Some(b.riding_x),
            riding_y: Some(b.riding_y),
            operating_x: Some(b.operating_x),
            operating_y: Some(b.operating_y),
            vehicle_cost: Some(b.vehicle),
            user_cost: Some(b.user()),
            operator_cost: Some(b.operator()),
            total: Some(b.total),
            ..Self::infeasible("", None, String::new())
        }
    }
}

/// Grid values run in parallel; rows come back in grid order.
pub fn sweep(m: &ModelSpec, r: &SweepRange) -> CliResult<Vec<SweepRow>> {
    let values = r.values()?;
    let chunks: Vec<CliResult<Vec<SweepRow>>> = values.par_iter().map(|&v| sweep_point(m, r, v)).collect();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CorridorRow {
    pub station_id: String,
    pub corridor_id: String,
    pub status: CorridorStatus,
    pub length_km: f64,
    pub points: usize,
    pub trips: f64,
    pub width_km: f64,
    pub form: Option<RouteForm>,
    pub flexible_demand: f64,
    pub cutoff_km: f64,
    pub flexible_points: usize,
    pub flexible_trips: f64,
    pub fleet_fixed_route: Option<f64>,
    pub fleet_semi_on_demand: Option<f64>,
    pub total_fixed_route: Option<f64>,
    pub total_semi_on_demand: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CaseStudyReport {
    pub points: Vec<DemandPoint>,
    pub pipeline: PipelineOutput,
    pub corridors: Vec<CorridorRow>,
    pub summary: CaseStudySummary,
    /// Breakdowns behind the corridor totals, for the write-time check.
    pub breakdowns: Vec<CostBreakdown>,
    pub warnings: Vec<String>,
}

pub fn casestudy(m: &ModelSpec, inputs: &CaseStudyInputs) -> CliResult<CaseStudyReport> {
    let stations = semiflex::io::read_stations(&inputs.stations)?;
    let points = semiflex::io::read_demand_points(&inputs.demand)?;
    let mut warnings = Vec::new();
    if points.is_empty() {
        warnings.push(format!(
            "{}: no demand points; summary covers zero routes",
            inputs.demand.display()
        ));
    }
    let cfg = &inputs.pipeline;
    let pipeline = run_pipeline(&stations, &points, &m.params, cfg)?;
    let summary = summarize_case_study(&pipeline.corridors, &m.params, cfg.headway, cfg)?;
    let mut breakdowns = Vec::new();
    let mut corridors = Vec::with_capacity(pipeline.corridors.len());
    for c in &pipeline.corridors {
        let fleets = corridor_fleets(c, cfg.headway)?;
        let (form, totals) = match &c.model {
            Some((corridor, demand)) => {
                let form = classify_route_form(corridor, demand, &m.params, cfg.headway)?.form;
                let base = cost_breakdown(corridor, demand, &m.params, cfg.headway, 0.0)?;
                let semi = cost_breakdown(corridor, demand, &m.params, cfg.headway, c.cutoff)?;
                breakdowns.push(base);
                breakdowns.push(semi);
                (Some(form), Some((base.total, semi.total)))
            }
            None => (None, None),
        };
        corridors.push(CorridorRow {
            station_id: c.station_id.clone(),
            corridor_id: c.corridor_id.clone(),
            status: c.status,
            length_km: c.length,
            points: c.points,
            trips: c.trips,
            width_km: c.width,
            form,
            flexible_demand: c.flexible_demand,
            cutoff_km: c.cutoff,
            flexible_points: c.flexible_points,
            flexible_trips: c.flexible_trips,
            fleet_fixed_route: fleets.map(|f| f.0),
            fleet_semi_on_demand: fleets.map(|f| f.1),
            total_fixed_route: totals.map(|t| t.0),
            total_semi_on_demand: totals.map(|t| t.1),
        });
    }
    let beyond = pipeline.assignments.iter().filter(|a| a.beyond_walk_coverage).count();
    if beyond > 0 {
        warnings.push(format!(
            "{beyond} demand points lie beyond walking coverage of their corridor"
        ));
    }
    Ok(CaseStudyReport {
        points,
        pipeline,
        corridors,
        summary,
        breakdowns,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_inclusive() {
        let r = SweepRange {
            param: SweepParam::OperatorCostScale,
            from: 1.0,
            to: 3.0,
            steps: 3,
            mode: SweepMode::Optimize,
        };
        assert_eq!(r.values().unwrap(), vec![1.0, 2.0, 3.0]);
        let r = SweepRange { steps: 0, ..r };
        assert!(r.values().is_err());
        let r = SweepRange { steps: 1, ..r };
        assert!(r.values().is_err());
        let r = SweepRange { to: 1.0, ..r };
        assert_eq!(r.values().unwrap(), vec![1.0]);
    }
}
