//! Fixed-headway cost model: hourly cost components as functions of the
//! flexible portion `x_f`, the route-form classifier and the closed-form
//! optimum for the flexible demand and fleet size.
//!
//! Units: $/h for costs, km for distances, hours for times.

use serde::{Deserialize, Serialize};

use crate::demand::{Corridor, DemandDistribution};
use crate::error::{domain, ensure, Result};

/// Monetary coefficients shared by users and operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Value of time γ_t, $/h.
    pub value_of_time: f64,
    /// Access (walking) cost factor γ_a, multiple of riding time.
    pub access_factor: f64,
    /// Waiting cost factor γ_w, multiple of riding time.
    pub waiting_factor: f64,
    /// Distance-based operating cost γ_o, $/km.
    pub operating_cost: f64,
    /// Time-based vehicle cost γ_v, $/veh-h.
    pub vehicle_cost: f64,
}

impl CostParams {
    pub fn new(
        value_of_time: f64,
        access_factor: f64,
        waiting_factor: f64,
        operating_cost: f64,
        vehicle_cost: f64,
    ) -> Result<Self> {
        let p = Self {
            value_of_time,
            access_factor,
            waiting_factor,
            operating_cost,
            vehicle_cost,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("value of time", self.value_of_time),
            ("access factor", self.access_factor),
            ("waiting factor", self.waiting_factor),
            ("operating cost", self.operating_cost),
            ("vehicle cost", self.vehicle_cost),
        ] {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))?;
        }
        Ok(())
    }

    /// Same user coefficients with the operator's costs replaced.
    pub fn with_operator_costs(&self, operating_cost: f64, vehicle_cost: f64) -> Self {
        Self {
            operating_cost,
            vehicle_cost,
            ..*self
        }
    }
}

/// The seven hourly cost components and their sum, $/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub access: f64,
    pub waiting: f64,
    pub riding_x: f64,
    pub riding_y: f64,
    pub operating_x: f64,
    pub operating_y: f64,
    pub vehicle: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn from_components(
        access: f64,
        waiting: f64,
        riding_x: f64,
        riding_y: f64,
        operating_x: f64,
        operating_y: f64,
        vehicle: f64,
    ) -> Self {
        Self {
            access,
            waiting,
            riding_x,
            riding_y,
            operating_x,
            operating_y,
            vehicle,
            total: access + waiting + riding_x + riding_y + operating_x + operating_y + vehicle,
        }
    }

    pub fn components(&self) -> [f64; 7] {
        [
            self.access,
            self.waiting,
            self.riding_x,
            self.riding_y,
            self.operating_x,
            self.operating_y,
            self.vehicle,
        ]
    }

    pub fn user(&self) -> f64 {
        self.access + self.waiting + self.riding_x + self.riding_y
    }

    pub fn operator(&self) -> f64 {
        self.operating_x + self.operating_y + self.vehicle
    }

    /// Relative gap between `total` and the sum of the components.
    pub fn sum_residual(&self) -> f64 {
        let sum: f64 = self.components().iter().sum();
        (self.total - sum).abs() / sum.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteForm {
    Fixed,
    Hybrid,
    Flexible,
}

impl std::fmt::Display for RouteForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RouteForm::Fixed => "fixed",
            RouteForm::Hybrid => "hybrid",
            RouteForm::Flexible => "flexible",
        })
    }
}

/// Outcome of the analytic route-form test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub form: RouteForm,
    /// `t̄_a / d̄`; infinite when the detour is zero.
    pub ratio: f64,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    /// Set when the mean detour is zero, so detours cost nothing.
    pub degenerate_geometry: bool,
}

fn check_headway(headway: f64) -> Result<()> {
    ensure(headway.is_finite() && headway > 0.0, || {
        format!("headway must be positive, got {headway} h")
    })
}

fn check_portion(corridor: &Corridor, x_f: f64) -> Result<f64> {
    let l = corridor.route_length;
    if !x_f.is_finite() || x_f < -1e-12 * l || x_f > l * (1.0 + 1e-12) {
        return Err(domain(format!("flexible portion {x_f} km outside [0, {l}]")));
    }
    Ok(x_f.clamp(0.0, l))
}

/// Flexible demand F(x_f) after validating the inputs.
pub(crate) fn flexible_demand(corridor: &Corridor, demand: &DemandDistribution, x_f: f64) -> Result<f64> {
    corridor.check_demand(demand)?;
    let x_f = check_portion(corridor, x_f)?;
    demand.cumulative(x_f)
}

/// Total y-directional detour time per vehicle trip, hours.
pub fn detour_time(corridor: &Corridor, demand: &DemandDistribution, headway: f64, x_f: f64) -> Result<f64> {
    check_headway(headway)?;
    let f = flexible_demand(corridor, demand, x_f)?;
    Ok(headway * corridor.mean_detour() / corridor.vehicle_speed * f)
}

/// Fleet needed to run a round-trip cycle every `headway` hours.
pub fn fleet_size(corridor: &Corridor, demand: &DemandDistribution, headway: f64, x_f: f64) -> Result<f64> {
    let detour = detour_time(corridor, demand, headway, x_f)?;
    let run = corridor.route_length / corridor.vehicle_speed;
    Ok(2.0 / headway * (run + detour + corridor.layover_time))
}

/// Fleet size rounded up to whole vehicles, for reporting.
pub fn fleet_size_ceil(fleet: f64) -> f64 {
    // guard against 5.0000000001 from accumulated rounding
    (fleet - 1e-9).ceil().max(0.0)
}

pub fn cost_breakdown(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params: &CostParams,
    headway: f64,
    x_f: f64,
) -> Result<CostBreakdown> {
    check_headway(headway)?;
    let f = flexible_demand(corridor, demand, x_f)?;
    let lambda = demand.total();
    let v = corridor.vehicle_speed;
    let d = corridor.mean_detour();
    let gt = params.value_of_time;
    let fleet = fleet_size(corridor, demand, headway, x_f)?;
    Ok(CostBreakdown::from_components(
        gt * params.access_factor * corridor.mean_access_time() * (lambda - f),
        gt * params.waiting_factor * lambda * headway / 2.0,
        gt / v * demand.riding_integral(),
        gt * headway * d * f * f / (2.0 * v),
        params.operating_cost * corridor.route_length / headway,
        params.operating_cost * d * f,
        params.vehicle_cost * fleet,
    ))
}

pub fn total_cost(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params: &CostParams,
    headway: f64,
    x_f: f64,
) -> Result<f64> {
    cost_breakdown(corridor, demand, params, headway, x_f).map(|b| b.total)
}

/// dc/dx_f, $/h per km.
pub fn cost_derivative(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params: &CostParams,
    headway: f64,
    x_f: f64,
) -> Result<f64> {
    check_headway(headway)?;
    let f_cum = flexible_demand(corridor, demand, x_f)?;
    let density = demand.density(x_f.clamp(0.0, corridor.route_length))?;
    let v = corridor.vehicle_speed;
    let d = corridor.mean_detour();
    let gt = params.value_of_time;
    Ok(density
        * (-gt * params.access_factor * corridor.mean_access_time()
            + gt * headway * d / v * f_cum
            + params.operating_cost * d
            + 2.0 * params.vehicle_cost * d / v))
}

/// `T_lo = γ_o/(γ_tγ_a) + 2γ_v/(γ_tγ_aV_d)`.
fn lower_threshold(corridor: &Corridor, params: &CostParams) -> f64 {
    let gta = params.value_of_time * params.access_factor;
    params.operating_cost / gta + 2.0 * params.vehicle_cost / (gta * corridor.vehicle_speed)
}

/// Classifies the cost-minimizing route form from the `t̄_a / d̄` ratio.
///
/// A ratio exactly on a threshold resolves to the non-hybrid form.
pub fn classify_route_form(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params: &CostParams,
    headway: f64,
) -> Result<Classification> {
    check_headway(headway)?;
    corridor.check_demand(demand)?;
    let lambda = demand.total();
    ensure(lambda > 0.0, || "route form is undefined without demand".to_string())?;
    let lo = lower_threshold(corridor, params);
    let hi = headway * lambda / (params.access_factor * corridor.vehicle_speed) + lo;
    let d = corridor.mean_detour();
    if d == 0.0 {
        return Ok(Classification {
            form: RouteForm::Flexible,
            ratio: f64::INFINITY,
            lower_threshold: lo,
            upper_threshold: hi,
            degenerate_geometry: true,
        });
    }
    let ratio = corridor.mean_access_time() / d;
    let form = if ratio <= lo {
        RouteForm::Fixed
    } else if ratio >= hi {
        RouteForm::Flexible
    } else {
        RouteForm::Hybrid
    };
    Ok(Classification {
        form,
        ratio,
        lower_threshold: lo,
        upper_threshold: hi,
        degenerate_geometry: false,
    })
}

/// Cost-optimal demand to serve on demand, F(x_f*), in pax/h.
///
/// Unclamped: negative means "serve nobody flexibly", above Λ means
/// "serve everybody".
pub fn optimal_flexible_demand(corridor: &Corridor, params: &CostParams, headway: f64) -> Result<f64> {
    check_headway(headway)?;
    let d = corridor.mean_detour();
    ensure(d > 0.0, || {
        "optimal flexible demand needs a positive mean detour".to_string()
    })?;
    let v = corridor.vehicle_speed;
    let gt = params.value_of_time;
    Ok((params.access_factor * v * corridor.mean_access_time() / d
        - params.operating_cost * v / gt
        - 2.0 * params.vehicle_cost / gt)
        / headway)
}

/// Optimal flexible portion and the route form it implies.
pub fn optimal_flexible_portion(
    corridor: &Corridor,
    demand: &DemandDistribution,
    params: &CostParams,
    headway: f64,
) -> Result<(f64, RouteForm)> {
    let class = classify_route_form(corridor, demand, params, headway)?;
    let x_f = match class.form {
        RouteForm::Fixed => 0.0,
        RouteForm::Flexible => corridor.route_length,
        RouteForm::Hybrid => {
            let target = optimal_flexible_demand(corridor, params, headway)?;
            demand.inverse_cumulative(target.clamp(0.0, demand.total()))?
        }
    };
    Ok((x_f, class.form))
}

/// Fleet size at the hybrid optimum; independent of the demand shape.
pub fn optimal_fleet_size(corridor: &Corridor, params: &CostParams, headway: f64) -> Result<f64> {
    check_headway(headway)?;
    let v = corridor.vehicle_speed;
    let d = corridor.mean_detour();
    let gt = params.value_of_time;
    let cycle_half = corridor.route_length / v + params.access_factor * corridor.mean_access_time()
        - params.operating_cost / gt * d
        - 2.0 * params.vehicle_cost / gt * d / v
        + corridor.layover_time;
    if cycle_half < 0.0 {
        return Err(domain(format!(
            "optimal fleet expression is negative ({cycle_half:.6} h); parameters are inconsistent"
        )));
    }
    Ok(2.0 / headway * cycle_half)
}
