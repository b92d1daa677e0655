//! Variable-headway design: the headway follows from the fleet size, the
//! fleet is bounded below by a capacity requirement, and the flexible
//! portion and fleet are minimized jointly for each vehicle type.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{flexible_demand, CostBreakdown, CostParams};
use crate::demand::{Corridor, DemandDistribution};
use crate::error::{ensure, ModelError, Result};
use crate::minimize::{nelder_mead_box, PolishOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleType {
    pub name: String,
    /// Capacity b, pax/veh.
    pub capacity: f64,
    /// γ_o(b), $/km.
    pub operating_cost: f64,
    /// γ_v(b), $/veh-h.
    pub vehicle_cost: f64,
}

impl VehicleType {
    pub fn new(name: impl Into<String>, capacity: f64, operating_cost: f64, vehicle_cost: f64) -> Result<Self> {
        let v = Self {
            name: name.into(),
            capacity,
            operating_cost,
            vehicle_cost,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, x) in [
            ("capacity", self.capacity),
            ("operating cost", self.operating_cost),
            ("vehicle cost", self.vehicle_cost),
        ] {
            ensure(x.is_finite() && x > 0.0, || {
                format!("vehicle '{}': {what} must be positive, got {x}", self.name)
            })?;
        }
        Ok(())
    }

    /// Same vehicle with both operator cost rates multiplied by `factor`.
    pub fn with_cost_scale(&self, factor: f64) -> Self {
        Self {
            operating_cost: self.operating_cost * factor,
            vehicle_cost: self.vehicle_cost * factor,
            ..self.clone()
        }
    }
}

/// Car, van, 20-seater, minibus and standard bus at automated-operation costs.
pub fn default_catalog() -> Vec<VehicleType> {
    [
        ("car", 5.0, 0.6187, 2.53),
        ("van", 8.0, 0.6370, 3.63),
        ("20-seater", 20.0, 0.6938, 7.59),
        ("minibus", 44.0, 0.7507, 11.55),
        ("bus", 70.0, 0.8900, 15.73),
    ]
    .into_iter()
    .map(|(n, b, o, v)| VehicleType {
        name: n.to_string(),
        capacity: b,
        operating_cost: o,
        vehicle_cost: v,
    })
    .collect()
}

/// Share of nominal capacity planned to be used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPolicy {
    pub buffer: f64,
}

impl CapacityPolicy {
    pub fn new(buffer: f64) -> Result<Self> {
        ensure(buffer > 0.0 && buffer <= 1.0, || {
            format!("capacity buffer must lie in (0, 1], got {buffer}")
        })?;
        Ok(Self { buffer })
    }
}

impl Default for CapacityPolicy {
    fn default() -> Self {
        Self { buffer: 0.7 }
    }
}

/// Per-passenger times, minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceMetrics {
    pub avg_access: f64,
    pub avg_wait: f64,
    pub avg_ride: f64,
    pub std_access: f64,
    pub std_wait: f64,
    pub std_ride: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub vehicle: VehicleType,
    /// Flexible portion, km.
    pub x_f: f64,
    /// Fleet size, veh (real-valued).
    pub fleet: f64,
    /// Headway, hours.
    pub headway: f64,
    /// Fleet lower bound at `x_f`.
    pub fleet_lower_bound: f64,
    pub breakdown: CostBreakdown,
    pub metrics: ServiceMetrics,
}

impl DesignSolution {
    /// `ρb/h − Λ` relative to Λ; non-negative when capacity is sufficient.
    pub fn capacity_slack(&self, policy: &CapacityPolicy, total_demand: f64) -> f64 {
        let cap = policy.buffer * self.vehicle.capacity / self.headway;
        (cap - total_demand) / total_demand.max(f64::MIN_POSITIVE)
    }
}

/// Headway implied by running `fleet` vehicles with flexible portion `x_f`.
pub fn headway(corridor: &Corridor, demand: &DemandDistribution, x_f: f64, fleet: f64) -> Result<f64> {
    let f = flexible_demand(corridor, demand, x_f)?;
    let v = corridor.vehicle_speed;
    let denom = fleet * v / 2.0 - corridor.mean_detour() * f;
    if !(denom > 0.0) || !fleet.is_finite() {
        return Err(ModelError::Infeasible(format!(
            "{fleet} vehicles cannot complete cycles with x_f = {x_f} km"
        )));
    }
    Ok((corridor.route_length + corridor.layover_time * v) / denom)
}

/// Smallest fleet meeting `ρb/h ≥ Λ` at flexible portion `x_f`.
pub fn fleet_lower_bound(
    corridor: &Corridor,
    demand: &DemandDistribution,
    policy: &CapacityPolicy,
    vehicle: &VehicleType,
    x_f: f64,
) -> Result<f64> {
    let f = flexible_demand(corridor, demand, x_f)?;
    let v = corridor.vehicle_speed;
    let cycle_km = corridor.route_length + corridor.layover_time * v;
    Ok(2.0 / v * (demand.total() / (policy.buffer * vehicle.capacity) * cycle_km + corridor.mean_detour() * f))
}

pub fn total_cost_variable(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params_base: &CostParams,
    vehicle: &VehicleType,
    x_f: f64,
    fleet: f64,
) -> Result<CostBreakdown> {
    let h = headway(corridor, demand, x_f, fleet)?;
    let f = flexible_demand(corridor, demand, x_f)?;
    let lambda = demand.total();
    let v = corridor.vehicle_speed;
    let d = corridor.mean_detour();
    let gt = params_base.value_of_time;
    Ok(CostBreakdown::from_components(
        gt * params_base.access_factor * corridor.mean_access_time() * (lambda - f),
        gt * params_base.waiting_factor * lambda * h / 2.0,
        gt / v * demand.riding_integral(),
        gt * d / (2.0 * v) * f * f * h,
        vehicle.operating_cost * corridor.route_length / h,
        vehicle.operating_cost * d * f,
        vehicle.vehicle_cost * fleet,
    ))
}

/// Quadrature points for the riding-time spread.
const RIDE_QUADRATURE: usize = 4000;

/// Access, waiting and riding time statistics for a design running at
/// `headway` with flexible portion `x_f`.
///
/// Access offsets are taken as uniform, so fixed-portion walks are uniform
/// on `[0, 2t̄_a]`; flexible passengers walk zero. Waiting assumes uniform
/// arrivals. Ride time of a passenger boarding at `x` is `(L_x − x)/V_d`
/// plus the detours still to come behind them in the flexible portion; its
/// spread is integrated over the demand quantiles.
pub fn service_metrics(
    corridor: &Corridor,
    demand: &DemandDistribution,
    x_f: f64,
    headway: f64,
) -> Result<ServiceMetrics> {
    let f_star = flexible_demand(corridor, demand, x_f)?;
    let lambda = demand.total();
    let to_min = 60.0;
    let std_wait = headway / 12f64.sqrt() * to_min;
    let avg_wait = headway / 2.0 * to_min;
    if lambda <= 0.0 {
        return Ok(ServiceMetrics {
            avg_access: 0.0,
            avg_wait,
            avg_ride: 0.0,
            std_access: 0.0,
            std_wait,
            std_ride: 0.0,
        });
    }
    let v = corridor.vehicle_speed;
    let l = corridor.route_length;
    let ta = corridor.mean_access_time();
    let fixed_share = ((lambda - f_star) / lambda).clamp(0.0, 1.0);
    let avg_access = ta * fixed_share;
    let access_second = fixed_share * ta * ta * 4.0 / 3.0;
    let std_access = (access_second - avg_access * avg_access).max(0.0).sqrt();

    let per_pax_detour = headway * corridor.mean_detour() / v;
    let avg_ride = demand.riding_integral() / (lambda * v) + per_pax_detour * f_star * f_star / (2.0 * lambda);

    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..RIDE_QUADRATURE {
        let u = (i as f64 + 0.5) / RIDE_QUADRATURE as f64;
        let q = u * lambda;
        let x = demand.inverse_cumulative(q)?;
        let ride = (l - x) / v + per_pax_detour * (f_star - q).max(0.0);
        m1 += ride;
        m2 += ride * ride;
    }
    m1 /= RIDE_QUADRATURE as f64;
    m2 /= RIDE_QUADRATURE as f64;
    let std_ride = (m2 - m1 * m1).max(0.0).sqrt();

    Ok(ServiceMetrics {
        avg_access: avg_access * to_min,
        avg_wait,
        avg_ride: avg_ride * to_min,
        std_access: std_access * to_min,
        std_wait,
        std_ride: std_ride * to_min,
    })
}

/// Search settings for [`optimize_for_vehicle_with`].
#[derive(Debug, Clone, Copy)]
pub struct SearchSettings {
    /// Grid points per axis of the coarse scan.
    pub grid: usize,
    /// Best grid cells polished locally.
    pub starts: usize,
    /// Fleet search ceiling as a multiple of the bound at `x_f = L_x`.
    pub fleet_ceiling_factor: f64,
    pub polish: PolishOptions,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            grid: 64,
            starts: 5,
            fleet_ceiling_factor: 4.0,
            polish: PolishOptions {
                initial_step: 1.0 / 63.0,
                ..PolishOptions::default()
            },
        }
    }
}

/// The feasible set `0 ≤ x_f ≤ L_x`, `lb(x_f) ≤ s ≤ s_max` mapped onto the unit square.
struct FeasibleBox<'a> {
    corridor: &'a Corridor,
    demand: &'a DemandDistribution,
    policy: &'a CapacityPolicy,
    vehicle: &'a VehicleType,
    fleet_max: f64,
}

impl FeasibleBox<'_> {
    fn to_design(&self, p: &[f64]) -> (f64, f64, f64) {
        let x = (p[0] * self.corridor.route_length).clamp(0.0, self.corridor.route_length);
        let lb = fleet_lower_bound(self.corridor, self.demand, self.policy, self.vehicle, x).unwrap_or(f64::INFINITY);
        let s = lb + p[1] * (self.fleet_max - lb).max(0.0);
        (x, s, lb)
    }
}

pub fn optimize_for_vehicle(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params_base: &CostParams,
    vehicle: &VehicleType,
    policy: &CapacityPolicy,
) -> Result<DesignSolution> {
    optimize_for_vehicle_with(
        corridor,
        demand,
        params_base,
        vehicle,
        policy,
        &SearchSettings::default(),
    )
}

/// Minimizes the total cost over `(x_f, s)` for one vehicle type.
///
/// A coarse grid over the feasible set seeds bounded Nelder–Mead runs from
/// the best cells; coordinates within reach of a bound are then snapped
/// onto it when that does not raise the cost.
pub fn optimize_for_vehicle_with(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params_base: &CostParams,
    vehicle: &VehicleType,
    policy: &CapacityPolicy,
    settings: &SearchSettings,
) -> Result<DesignSolution> {
    corridor.check_demand(demand)?;
    vehicle.validate()?;
    ensure(settings.grid >= 2 && settings.starts >= 1, || {
        "search grid needs at least 2 points per axis and one start".to_string()
    })?;
    let l = corridor.route_length;
    let lb_full = fleet_lower_bound(corridor, demand, policy, vehicle, l)?;
    if !(lb_full > 0.0) || !lb_full.is_finite() {
        return Err(ModelError::Infeasible(format!(
            "vehicle '{}': capacity bound is {lb_full}; no demand to size a fleet for",
            vehicle.name
        )));
    }
    let region = FeasibleBox {
        corridor,
        demand,
        policy,
        vehicle,
        fleet_max: settings.fleet_ceiling_factor * lb_full,
    };
    let objective = |p: &[f64]| -> f64 {
        let (x, s, _) = region.to_design(p);
        total_cost_variable(corridor, demand, params_base, vehicle, x, s)
            .map(|b| b.total)
            .unwrap_or(f64::INFINITY)
    };

    let n = settings.grid;
    let step = 1.0 / (n - 1) as f64;
    let mut cells: Vec<(f64, [f64; 2])> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = [i as f64 * step, j as f64 * step];
            cells.push((objective(&p), p));
        }
    }
    // stable sort keeps grid order among equal values
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    if !cells[0].0.is_finite() {
        return Err(ModelError::Infeasible(format!(
            "vehicle '{}': no feasible fleet on the search grid",
            vehicle.name
        )));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, start) in cells.iter().take(settings.starts) {
        let r = nelder_mead_box(objective, start, settings.polish);
        if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
            best = Some((r.value, r.point));
        }
    }
    let (mut value, mut point) = best.expect("at least one start");

    for k in 0..2 {
        for bound in [0.0, 1.0] {
            if (point[k] - bound).abs() < 1e-5 && point[k] != bound {
                let mut q = point.clone();
                q[k] = bound;
                let fq = objective(&q);
                if fq <= value {
                    value = fq;
                    point = q;
                }
            }
        }
    }

    let (x, s, lb) = region.to_design(&point);
    let h = headway(corridor, demand, x, s)?;
    let breakdown = total_cost_variable(corridor, demand, params_base, vehicle, x, s)?;
    let metrics = service_metrics(corridor, demand, x, h)?;
    Ok(DesignSolution {
        vehicle: vehicle.clone(),
        x_f: x,
        fleet: s,
        headway: h,
        fleet_lower_bound: lb,
        breakdown,
        metrics,
    })
}

/// One row of the per-vehicle results table.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleOutcome {
    pub vehicle: VehicleType,
    pub result: Result<DesignSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetOptimization {
    /// Index into `table` of the cheapest feasible design.
    pub best: usize,
    pub table: Vec<VehicleOutcome>,
}

impl FleetOptimization {
    pub fn best_solution(&self) -> &DesignSolution {
        self.table[self.best]
            .result
            .as_ref()
            .expect("best always points at a feasible row")
    }

    pub fn solutions(&self) -> impl Iterator<Item = &DesignSolution> {
        self.table.iter().filter_map(|o| o.result.as_ref().ok())
    }
}

/// Runs [`optimize_for_vehicle`] for every vehicle in parallel and picks
/// the cheapest; equal totals go to the smaller vehicle.
pub fn optimize_over_fleet(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params_base: &CostParams,
    vehicles: &[VehicleType],
    policy: &CapacityPolicy,
) -> Result<FleetOptimization> {
    ensure(!vehicles.is_empty(), || "vehicle catalog is empty".to_string())?;
    let table: Vec<VehicleOutcome> = vehicles
        .par_iter()
        .map(|v| VehicleOutcome {
            vehicle: v.clone(),
            result: optimize_for_vehicle(corridor, demand, params_base, v, policy),
        })
        .collect();
    let best = table
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.result.as_ref().ok().map(|s| (i, s)))
        .min_by(|(_, a), (_, b)| {
            a.breakdown
                .total
                .total_cmp(&b.breakdown.total)
                .then(a.vehicle.capacity.total_cmp(&b.vehicle.capacity))
        })
        .map(|(i, _)| i);
    match best {
        Some(best) => Ok(FleetOptimization { best, table }),
        None => {
            let causes: Vec<String> = table
                .iter()
                .filter_map(|o| o.result.as_ref().err().map(|e| format!("{}: {e}", o.vehicle.name)))
                .collect();
            Err(ModelError::Infeasible(format!(
                "no vehicle type is feasible ({})",
                causes.join("; ")
            )))
        }
    }
}
