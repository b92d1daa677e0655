//! Run configuration: a named preset, overlaid by a TOML file, overlaid by
//! command-line flags. Minutes and hours are accepted through explicit key
//! suffixes and converted to hours here, once.

use std::path::{Path, PathBuf};

use semiflex::geo::PipelineConfig;
use semiflex::{
    default_catalog, presets, CapacityPolicy, Corridor, CostParams, CrossSection, DemandDistribution, VehicleType,
    DEFAULT_BINS,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DemandShape {
    Uniform,
    Triangular,
    Empirical,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub corridor: CorridorSection,
    #[serde(default)]
    pub demand: DemandSection,
    #[serde(default)]
    pub costs: CostSection,
    #[serde(default)]
    pub service: ServiceSection,
    #[serde(default)]
    pub casestudy: CaseStudySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSection {
    pub route_length_km: Option<f64>,
    pub vehicle_speed_kmh: Option<f64>,
    pub layover_min: Option<f64>,
    pub layover_h: Option<f64>,
    pub access_time_min: Option<f64>,
    pub access_time_h: Option<f64>,
    pub detour_km: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub shape: Option<DemandShape>,
    pub total_pax_h: Option<f64>,
    /// `x_km,trips_per_h` CSV for the empirical shape.
    pub file: Option<PathBuf>,
    pub bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub value_of_time: Option<f64>,
    pub access_factor: Option<f64>,
    pub waiting_factor: Option<f64>,
    pub operating_cost_per_km: Option<f64>,
    pub vehicle_cost_per_h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    pub headway_min: Option<f64>,
    pub headway_h: Option<f64>,
    pub capacity_buffer: Option<f64>,
    /// `name,capacity,operating_cost_per_km,vehicle_cost_per_h` CSV.
    pub catalog: Option<PathBuf>,
    pub samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudySection {
    pub stations: Option<PathBuf>,
    pub demand: Option<PathBuf>,
    pub walk_speed_kmh: Option<f64>,
    pub max_access_min: Option<f64>,
    pub max_corridors: Option<usize>,
    pub geojson: Option<bool>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub preset: Option<String>,
    pub headway_min: Option<f64>,
    pub demand_shape: Option<DemandShape>,
    pub total_demand: Option<f64>,
    pub catalog: Option<PathBuf>,
    pub samples: Option<usize>,
    pub stations: Option<PathBuf>,
    pub demand_points: Option<PathBuf>,
    pub geojson: bool,
    pub max_corridors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    Uniform,
    Triangular,
    Empirical(Vec<(f64, f64)>),
}

/// Fully resolved model inputs in km, h and $/h.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub route_length: f64,
    pub vehicle_speed: f64,
    pub layover_time: f64,
    pub mean_access_time: f64,
    pub mean_detour: f64,
    pub demand: DemandSpec,
    /// For the empirical shape, `None` keeps the file's own total.
    pub total_demand: Option<f64>,
    pub bins: usize,
    pub params: CostParams,
    pub headway: f64,
    pub capacity_buffer: f64,
    pub catalog: Vec<VehicleType>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyInputs {
    pub stations: PathBuf,
    pub demand: PathBuf,
    pub pipeline: PipelineConfig,
    pub geojson: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub casestudy: Option<CaseStudyInputs>,
}

impl ModelSpec {
    pub fn corridor(&self) -> CliResult<Corridor> {
        let cs = CrossSection::new(self.mean_access_time, self.mean_detour)?;
        Ok(Corridor::new(
            self.route_length,
            self.vehicle_speed,
            self.layover_time,
            cs,
        )?)
    }

    pub fn demand_distribution(&self) -> CliResult<DemandDistribution> {
        let l = self.route_length;
        Ok(match &self.demand {
            DemandSpec::Uniform => DemandDistribution::uniform(self.total_demand.unwrap_or(80.0), l)?,
            DemandSpec::Triangular => DemandDistribution::triangular(self.total_demand.unwrap_or(80.0), l)?,
            DemandSpec::Empirical(points) => {
                let d = DemandDistribution::empirical(points, l, self.bins)?;
                match self.total_demand {
                    Some(t) if d.total() > 0.0 => d.scaled(t / d.total())?,
                    Some(t) if t > 0.0 => return Err(invalid("cannot rescale an empirical profile with no trips")),
                    _ => d,
                }
            }
        })
    }

    pub fn policy(&self) -> CliResult<CapacityPolicy> {
        Ok(CapacityPolicy::new(self.capacity_buffer)?)
    }

    pub fn shape_name(&self) -> &'static str {
        match self.demand {
            DemandSpec::Uniform => "uniform",
            DemandSpec::Triangular => "triangular",
            DemandSpec::Empirical(_) => "empirical",
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        self.corridor()?;
        self.demand_distribution()?;
        self.policy()?;
        positive("service.headway", self.headway)?;
        if self.samples < 2 {
            return Err(invalid("service.samples: need at least 2 sample points"));
        }
        if self.catalog.is_empty() {
            return Err(invalid("service.catalog: vehicle catalog is empty"));
        }
        for v in &self.catalog {
            v.validate()?;
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{field}: must be positive, got {v}")))
    }
}

fn hours(field: &str, minutes: Option<f64>, hours: Option<f64>) -> CliResult<Option<f64>> {
    match (minutes, hours) {
        (Some(_), Some(_)) => Err(invalid(format!(
            "{field}: give either {field}_min or {field}_h, not both"
        ))),
        (Some(m), None) => Ok(Some(m / 60.0)),
        (None, h) => Ok(h),
    }
}

fn resolve_path(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

pub fn read_file_config(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_file_config(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_file_config(text: &str) -> CliResult<FileConfig> {
    toml::from_str(text).map_err(|e| invalid(e.to_string()))
}

/// Builds the run configuration from an optional file and the flag overrides.
///
/// Without `needs_corridor` (the case study derives its own corridors) the
/// single-corridor fields may be absent and fall back to the cta126 values.
pub fn resolve(
    file: Option<(&FileConfig, Option<&Path>)>,
    ov: &Overrides,
    needs_corridor: bool,
) -> CliResult<RunConfig> {
    let empty = FileConfig::default();
    let (f, base_dir) = file.unwrap_or((&empty, None));
    let preset_name = ov.preset.clone().or_else(|| f.preset.clone());
    let preset = match preset_name.as_deref() {
        Some(n) => Some(
            presets::by_name(n)
                .ok_or_else(|| invalid(format!("preset: unknown preset '{n}' (expected cta126 or cta84)")))?,
        ),
        None => None,
    };
    let d = presets::CTA126;

    let c = &f.corridor;
    let route_length = c.route_length_km.or(preset.map(|p| p.route_length));
    let access =
        hours("corridor.access_time", c.access_time_min, c.access_time_h)?.or(preset.map(|p| p.mean_access_time));
    let detour = c.detour_km.or(preset.map(|p| p.mean_detour));
    let missing: Vec<&str> = [
        ("corridor.route_length_km", route_length.is_none()),
        ("corridor.access_time_min", access.is_none()),
        ("corridor.detour_km", detour.is_none()),
    ]
    .iter()
    .filter(|(_, m)| *m)
    .map(|(n, _)| *n)
    .collect();
    let (route_length, access, detour) = if needs_corridor {
        (route_length, access, detour)
    } else {
        (
            route_length.or(Some(d.route_length)),
            access.or(Some(d.mean_access_time)),
            detour.or(Some(d.mean_detour)),
        )
    };
    if needs_corridor && !missing.is_empty() {
        return Err(invalid(format!(
            "missing fields without a preset: {}",
            missing.join(", ")
        )));
    }

    let shape = ov.demand_shape.or(f.demand.shape).unwrap_or(DemandShape::Uniform);
    let demand = match shape {
        DemandShape::Uniform => DemandSpec::Uniform,
        DemandShape::Triangular => DemandSpec::Triangular,
        DemandShape::Empirical => {
            let p = f
                .demand
                .file
                .as_ref()
                .ok_or_else(|| invalid("demand.file: required for the empirical shape"))?;
            DemandSpec::Empirical(semiflex::io::read_empirical_csv(&resolve_path(base_dir, p))?)
        }
    };
    let total_demand = ov.total_demand.or(f.demand.total_pax_h).or(match shape {
        DemandShape::Empirical => None,
        _ => Some(preset.map_or(d.total_demand, |p| p.total_demand)),
    });

    let base_params = preset.map_or(d.params, |p| p.params);
    let k = &f.costs;
    let params = CostParams {
        value_of_time: k.value_of_time.unwrap_or(base_params.value_of_time),
        access_factor: k.access_factor.unwrap_or(base_params.access_factor),
        waiting_factor: k.waiting_factor.unwrap_or(base_params.waiting_factor),
        operating_cost: k.operating_cost_per_km.unwrap_or(base_params.operating_cost),
        vehicle_cost: k.vehicle_cost_per_h.unwrap_or(base_params.vehicle_cost),
    };

    let s = &f.service;
    let headway = match ov.headway_min {
        Some(m) => m / 60.0,
        None => hours("service.headway", s.headway_min, s.headway_h)?.unwrap_or(d.headway),
    };
    let catalog = match ov
        .catalog
        .clone()
        .or_else(|| s.catalog.as_ref().map(|p| resolve_path(base_dir, p)))
    {
        Some(p) => semiflex::io::read_catalog_csv(&p)?,
        None => default_catalog(),
    };

    let model = ModelSpec {
        name: preset.map_or("custom".to_string(), |p| p.name.to_string()),
        route_length: route_length.unwrap(),
        vehicle_speed: c.vehicle_speed_kmh.unwrap_or(d.vehicle_speed),
        layover_time: hours("corridor.layover", c.layover_min, c.layover_h)?.unwrap_or(d.layover_time),
        mean_access_time: access.unwrap(),
        mean_detour: detour.unwrap(),
        demand,
        total_demand,
        bins: f.demand.bins.unwrap_or(DEFAULT_BINS),
        params,
        headway,
        capacity_buffer: s.capacity_buffer.unwrap_or(CapacityPolicy::default().buffer),
        catalog,
        samples: ov.samples.or(s.samples).unwrap_or(200),
    };
    model.validate()?;

    let cs = &f.casestudy;
    let stations = ov
        .stations
        .clone()
        .or_else(|| cs.stations.as_ref().map(|p| resolve_path(base_dir, p)));
    let points = ov
        .demand_points
        .clone()
        .or_else(|| cs.demand.as_ref().map(|p| resolve_path(base_dir, p)));
    let casestudy = match (stations, points) {
        (Some(stations), Some(demand)) => {
            let defaults = PipelineConfig::default();
            let pipeline = PipelineConfig {
                vehicle_speed: model.vehicle_speed,
                layover_time: model.layover_time,
                headway: model.headway,
                walk_speed: cs.walk_speed_kmh.unwrap_or(defaults.walk_speed),
                max_access_time: cs.max_access_min.map_or(defaults.max_access_time, |m| m / 60.0),
                bins: model.bins,
                max_corridors: ov.max_corridors.or(cs.max_corridors).unwrap_or(1),
            };
            pipeline.validate()?;
            Some(CaseStudyInputs {
                stations,
                demand,
                pipeline,
                geojson: ov.geojson || cs.geojson.unwrap_or(false),
            })
        }
        (None, None) => None,
        (Some(_), None) => return Err(invalid("casestudy.demand: stations given without demand points")),
        (None, Some(_)) => return Err(invalid("casestudy.stations: demand points given without stations")),
    };
    Ok(RunConfig { model, casestudy })
}
