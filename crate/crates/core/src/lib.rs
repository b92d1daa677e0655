//! Continuous-approximation design of semi-on-demand hybrid transit routes.
//!
//! A route of length `L_x` runs on demand over its far portion `[0, x_f]`
//! and as a fixed route over `[x_f, L_x]` toward the station. Distances are
//! km, times hours, costs $ per hour of operation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod demand;
pub mod error;
pub mod geo;
pub mod io;
pub mod joint;
pub mod minimize;
pub mod presets;

pub use cost::{
    classify_route_form, cost_breakdown, cost_derivative, detour_time, fleet_size, fleet_size_ceil, optimal_fleet_size,
    optimal_flexible_demand, optimal_flexible_portion, total_cost, Classification, CostBreakdown, CostParams,
    RouteForm,
};
pub use demand::{Corridor, CrossSection, DemandDistribution, DemandKind, DEFAULT_BINS};
pub use error::{ModelError, Result};
pub use geo::{
    assign_to_nearest_station, classify_flexible, define_corridor_axis, extract_corridor_parameters, project_and_split,
    run_pipeline, summarize_case_study, CaseStudySummary, ClassifiedCorridor, CorridorAssignment, CorridorAxis,
    CorridorStatus, DemandPoint, PipelineConfig, PipelineOutput, Point2, ServiceArea, Station,
};
pub use joint::{
    default_catalog, fleet_lower_bound, headway, optimize_for_vehicle, optimize_over_fleet, service_metrics,
    total_cost_variable, CapacityPolicy, DesignSolution, FleetOptimization, ServiceMetrics, VehicleOutcome,
    VehicleType,
};
