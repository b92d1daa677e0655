//! Station catchments to corridor models: nearest-station assignment, corridor
//! axes, projection, parameter extraction and fixed/flexible labelling.
//!
//! Coordinates are planar km. Every station zone is processed independently
//! and results are sorted by id before they leave this module.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_breakdown, fleet_size, optimal_flexible_demand, CostBreakdown, CostParams};
use crate::demand::{Corridor, CrossSection, DemandDistribution, DEFAULT_BINS};
use crate::error::{domain, ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Equirectangular projection of `(lon, lat)` degrees around a reference
/// point. Adequate over a few tens of km.
pub fn equirectangular_km(lon: f64, lat: f64, ref_lon: f64, ref_lat: f64) -> Point2 {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    Point2::new((lon - ref_lon) * k * ref_lat.to_radians().cos(), (lat - ref_lat) * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub id: String,
    pub position: Point2,
    /// pax/h
    pub trips: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceArea {
    Fixed,
    Flexible,
}

impl std::fmt::Display for ServiceArea {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ServiceArea::Fixed => "fixed",
            ServiceArea::Flexible => "flexible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorAssignment {
    pub point_id: String,
    pub station_id: String,
    pub corridor_id: String,
    /// 0 at the far end, corridor length at the station.
    pub x_along_axis: f64,
    pub y_offset: f64,
    pub trips: f64,
    pub service: ServiceArea,
    pub beyond_walk_coverage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorAxis {
    pub station: Point2,
    pub far_end: Point2,
    /// Unit vector from the far end toward the station.
    pub direction: Point2,
    pub length: f64,
}

impl CorridorAxis {
    /// `(x, y)` of a point: `x` along the axis from the far end, clamped to
    /// `[0, L]`; `y` signed, positive to the left when facing the station.
    pub fn project(&self, p: Point2) -> (f64, f64) {
        let d = self.direction;
        // measured from the far end so that point itself sits exactly on the axis
        let r = p.sub(self.far_end);
        let x = r.dot(d).clamp(0.0, self.length);
        let y = d.x * r.y - d.y * r.x;
        (x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// km/h
    pub vehicle_speed: f64,
    /// h
    pub layover_time: f64,
    /// h
    pub headway: f64,
    /// km/h
    pub walk_speed: f64,
    /// h
    pub max_access_time: f64,
    pub bins: usize,
    /// Corridors per side of the station axis.
    pub max_corridors: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vehicle_speed: 30.0,
            layover_time: 1.0 / 6.0,
            headway: 0.25,
            walk_speed: 4.0,
            max_access_time: 0.25,
            bins: DEFAULT_BINS,
            max_corridors: 1,
        }
    }
}

impl PipelineConfig {
    /// Widest catchment reachable on foot, both sides of the route.
    pub fn max_walk_width(&self) -> f64 {
        2.0 * self.walk_speed * self.max_access_time
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("vehicle speed", self.vehicle_speed),
            ("headway", self.headway),
            ("walk speed", self.walk_speed),
            ("max access time", self.max_access_time),
        ] {
            ensure(v.is_finite() && v > 0.0, || format!("{what} must be positive, got {v}"))?;
        }
        ensure(self.layover_time.is_finite() && self.layover_time >= 0.0, || {
            format!("layover time must be non-negative, got {}", self.layover_time)
        })?;
        ensure(self.bins >= 1, || "bin count must be at least 1".to_string())?;
        ensure(self.max_corridors >= 1, || {
            "max corridors must be at least 1".to_string()
        })?;
        Ok(())
    }
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(domain(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

fn check_inputs(stations: &[Station], points: &[DemandPoint]) -> Result<()> {
    ensure(!stations.is_empty(), || "at least one station is required".to_string())?;
    check_unique("station", stations.iter().map(|s| s.id.as_str()))?;
    check_unique("demand point", points.iter().map(|p| p.id.as_str()))?;
    for s in stations {
        ensure(s.position.is_finite(), || {
            format!("station '{}' has non-finite coordinates", s.id)
        })?;
    }
    for p in points {
        ensure(p.position.is_finite(), || {
            format!("point '{}' has non-finite coordinates", p.id)
        })?;
        ensure(p.trips.is_finite() && p.trips >= 0.0, || {
            format!("point '{}' has invalid trips {}", p.id, p.trips)
        })?;
    }
    Ok(())
}

/// Index of the nearest station for each point; equal distances go to the
/// lowest station id.
pub fn assign_to_nearest_station(stations: &[Station], points: &[DemandPoint]) -> Result<Vec<usize>> {
    ensure(!stations.is_empty(), || "at least one station is required".to_string())?;
    let mut order: Vec<usize> = (0..stations.len()).collect();
    order.sort_by(|&a, &b| stations[a].id.cmp(&stations[b].id));
    Ok(points
        .par_iter()
        .map(|p| {
            let mut best = order[0];
            let mut best_d = p.position.distance(stations[best].position);
            for &i in &order[1..] {
                let d = p.position.distance(stations[i].position);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

/// Axis from `station` to its farthest zone point, ties to the lowest point
/// id. `None` when every point sits on the station.
pub fn define_corridor_axis(station: Point2, zone_points: &[&DemandPoint]) -> Result<Option<CorridorAxis>> {
    ensure(!zone_points.is_empty(), || {
        "a corridor axis needs at least one point".to_string()
    })?;
    let mut far = zone_points[0];
    let mut far_d = far.position.distance(station);
    for &p in &zone_points[1..] {
        let d = p.position.distance(station);
        if d > far_d || (d == far_d && p.id < far.id) {
            far = p;
            far_d = d;
        }
    }
    if !(far_d > 0.0) {
        return Ok(None);
    }
    let v = station.sub(far.position);
    Ok(Some(CorridorAxis {
        station,
        far_end: far.position,
        direction: Point2::new(v.x / far_d, v.y / far_d),
        length: far_d,
    }))
}

/// Projects zone points on `axis` and splits them by the sign of `y`
/// (`y = 0` joins `"+"`). Labels start out fixed.
pub fn project_and_split(
    axis: &CorridorAxis,
    station_id: &str,
    zone_points: &[&DemandPoint],
    max_walk_width: f64,
) -> Vec<CorridorAssignment> {
    zone_points
        .iter()
        .map(|p| {
            let (x, y) = axis.project(p.position);
            CorridorAssignment {
                point_id: p.id.clone(),
                station_id: station_id.to_string(),
                corridor_id: if y >= 0.0 { "+" } else { "-" }.to_string(),
                x_along_axis: x,
                y_offset: y,
                trips: p.trips,
                service: ServiceArea::Fixed,
                beyond_walk_coverage: y.abs() > max_walk_width / 2.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorParameters {
    pub demand: DemandDistribution,
    pub cross_section: CrossSection,
    /// Catchment width used for the cross-section, km.
    pub width: f64,
}

/// Empirical demand over `[0, length]` and a uniform-width cross-section.
///
/// The width is four times the trip-weighted mean `|y|`, which recovers the
/// full width of a uniform strip centred on the axis, capped at the walk
/// coverage width. `None` when the corridor carries no trips.
pub fn extract_corridor_parameters(
    assignments: &[&CorridorAssignment],
    length: f64,
    config: &PipelineConfig,
) -> Result<Option<CorridorParameters>> {
    ensure(!assignments.is_empty(), || "corridor has no points".to_string())?;
    let total: f64 = assignments.iter().map(|a| a.trips).sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    let pts: Vec<(f64, f64)> = assignments.iter().map(|a| (a.x_along_axis, a.trips)).collect();
    let demand = DemandDistribution::empirical(&pts, length, config.bins)?;
    let mean_abs_y = assignments.iter().map(|a| a.trips * a.y_offset.abs()).sum::<f64>() / total;
    let width = (4.0 * mean_abs_y).min(config.max_walk_width());
    let cross_section = CrossSection::from_uniform_width(width, config.walk_speed)?;
    Ok(Some(CorridorParameters {
        demand,
        cross_section,
        width,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexibleLabels {
    /// F*, clamped to `[0, Λ]`.
    pub flexible_demand: f64,
    /// Cutoff x_f, km.
    pub cutoff: f64,
    /// Labels in the order of the input assignments.
    pub labels: Vec<ServiceArea>,
}

/// Labels points flexible from the far end until the cumulative trips
/// before a point reach F*; all points are flexible when `F* ≥ Λ`.
pub fn classify_flexible(
    corridor: &Corridor,
    demand: &DemandDistribution,
    assignments: &[&CorridorAssignment],
    params: &CostParams,
    headway: f64,
) -> Result<FlexibleLabels> {
    corridor.check_demand(demand)?;
    let lambda = demand.total();
    let raw = if corridor.mean_detour() > 0.0 {
        optimal_flexible_demand(corridor, params, headway)?
    } else {
        lambda
    };
    let f_star = raw.clamp(0.0, lambda);
    let cutoff = demand.inverse_cumulative(f_star)?;

    let mut order: Vec<usize> = (0..assignments.len()).collect();
    order.sort_by(|&a, &b| {
        assignments[a]
            .x_along_axis
            .total_cmp(&assignments[b].x_along_axis)
            .then_with(|| assignments[a].point_id.cmp(&assignments[b].point_id))
    });
    let everything = lambda > 0.0 && f_star >= lambda;
    let mut labels = vec![ServiceArea::Fixed; assignments.len()];
    let mut before = 0.0;
    for i in order {
        if everything || before < f_star {
            labels[i] = ServiceArea::Flexible;
        }
        before += assignments[i].trips;
    }
    Ok(FlexibleLabels {
        flexible_demand: f_star,
        cutoff,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorridorStatus {
    Active,
    /// No trips; excluded from summaries.
    Empty,
    /// Every zone point sits on the station; served fixed-only, excluded.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedCorridor {
    pub station_id: String,
    pub corridor_id: String,
    pub status: CorridorStatus,
    pub length: f64,
    pub points: usize,
    pub trips: f64,
    /// Present for active corridors.
    pub model: Option<(Corridor, DemandDistribution)>,
    pub width: f64,
    pub flexible_demand: f64,
    pub cutoff: f64,
    pub flexible_points: usize,
    pub flexible_trips: f64,
    /// Σ trips·(L − x) over flexible-area points, pax·km/h.
    pub flexible_ride_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Sorted by point id.
    pub assignments: Vec<CorridorAssignment>,
    /// Sorted by station id, then corridor id.
    pub corridors: Vec<ClassifiedCorridor>,
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::TAU;
    d.min(std::f64::consts::TAU - d)
}

/// Groups one side of a zone into at most `k` directions by farthest-point
/// seeding on the bearing from the station. Returns one group per seed.
fn split_directions<'a>(station: Point2, side: &[&'a DemandPoint], k: usize) -> Vec<Vec<&'a DemandPoint>> {
    let bearing = |p: &DemandPoint| {
        let r = p.position.sub(station);
        (r.norm() > 0.0).then(|| r.y.atan2(r.x))
    };
    let mut sorted: Vec<&DemandPoint> = side.to_vec();
    sorted.sort_by(|a, b| {
        b.position
            .distance(station)
            .total_cmp(&a.position.distance(station))
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut seeds: Vec<f64> = Vec::new();
    if let Some(b0) = sorted.first().and_then(|p| bearing(p)) {
        seeds.push(b0);
    }
    while seeds.len() < k {
        let mut best: Option<(f64, f64)> = None;
        for p in &sorted {
            let Some(b) = bearing(p) else { continue };
            let gap = seeds.iter().map(|&s| angle_gap(b, s)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(g, _)| gap > g) {
                best = Some((gap, b));
            }
        }
        match best {
            Some((gap, b)) if gap > 1e-9 => seeds.push(b),
            _ => break,
        }
    }
    if seeds.is_empty() {
        return vec![sorted];
    }
    let mut groups: Vec<Vec<&DemandPoint>> = vec![Vec::new(); seeds.len()];
    for p in sorted {
        let g = match bearing(p) {
            None => 0,
            Some(b) => {
                let mut gi = 0;
                for (i, &s) in seeds.iter().enumerate() {
                    if angle_gap(b, s) < angle_gap(b, seeds[gi]) {
                        gi = i;
                    }
                }
                gi
            }
        };
        groups[g].push(p);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

type ZoneCorridor = (ClassifiedCorridor, Vec<CorridorAssignment>);

struct DraftCorridor {
    corridor_id: String,
    length: f64,
    assignments: Vec<CorridorAssignment>,
}

fn draft_zone(station: &Station, zone: &[&DemandPoint], config: &PipelineConfig) -> Result<Vec<DraftCorridor>> {
    let Some(axis) = define_corridor_axis(station.position, zone)? else {
        let assignments = zone
            .iter()
            .map(|p| CorridorAssignment {
                point_id: p.id.clone(),
                station_id: station.id.clone(),
                corridor_id: "+".to_string(),
                x_along_axis: 0.0,
                y_offset: 0.0,
                trips: p.trips,
                service: ServiceArea::Fixed,
                beyond_walk_coverage: false,
            })
            .collect();
        return Ok(vec![DraftCorridor {
            corridor_id: "+".to_string(),
            length: 0.0,
            assignments,
        }]);
    };
    let w_max = config.max_walk_width();
    let split = project_and_split(&axis, &station.id, zone, w_max);
    let mut drafts = Vec::new();
    for side in ["+", "-"] {
        let members: Vec<&DemandPoint> = zone
            .iter()
            .zip(&split)
            .filter(|(_, a)| a.corridor_id == side)
            .map(|(p, _)| *p)
            .collect();
        if members.is_empty() {
            continue;
        }
        if config.max_corridors == 1 {
            let assignments = split.iter().filter(|a| a.corridor_id == side).cloned().collect();
            drafts.push(DraftCorridor {
                corridor_id: side.to_string(),
                length: axis.length,
                assignments,
            });
            continue;
        }
        for (n, group) in split_directions(station.position, &members, config.max_corridors)
            .into_iter()
            .enumerate()
        {
            let id = format!("{side}{}", n + 1);
            let sub = match define_corridor_axis(station.position, &group)? {
                Some(a) => a,
                None => axis,
            };
            let mut assignments = project_and_split(&sub, &station.id, &group, w_max);
            for a in &mut assignments {
                a.corridor_id = id.clone();
            }
            drafts.push(DraftCorridor {
                corridor_id: id,
                length: sub.length,
                assignments,
            });
        }
    }
    Ok(drafts)
}

fn finish_corridor(
    station_id: &str,
    draft: &mut DraftCorridor,
    params: &CostParams,
    config: &PipelineConfig,
) -> Result<ClassifiedCorridor> {
    let trips: f64 = draft.assignments.iter().map(|a| a.trips).sum();
    let mut out = ClassifiedCorridor {
        station_id: station_id.to_string(),
        corridor_id: draft.corridor_id.clone(),
        status: CorridorStatus::Degenerate,
        length: draft.length,
        points: draft.assignments.len(),
        trips,
        model: None,
        width: 0.0,
        flexible_demand: 0.0,
        cutoff: 0.0,
        flexible_points: 0,
        flexible_trips: 0.0,
        flexible_ride_distance: 0.0,
    };
    if !(draft.length > 0.0) {
        return Ok(out);
    }
    let refs: Vec<&CorridorAssignment> = draft.assignments.iter().collect();
    let Some(cp) = extract_corridor_parameters(&refs, draft.length, config)? else {
        out.status = CorridorStatus::Empty;
        return Ok(out);
    };
    let corridor = Corridor::new(
        draft.length,
        config.vehicle_speed,
        config.layover_time,
        cp.cross_section,
    )?;
    let cls = classify_flexible(&corridor, &cp.demand, &refs, params, config.headway)?;
    for (a, &label) in draft.assignments.iter_mut().zip(&cls.labels) {
        a.service = label;
        if label == ServiceArea::Flexible {
            out.flexible_points += 1;
            out.flexible_trips += a.trips;
            out.flexible_ride_distance += a.trips * (draft.length - a.x_along_axis);
        }
    }
    out.status = CorridorStatus::Active;
    out.model = Some((corridor, cp.demand));
    out.width = cp.width;
    out.flexible_demand = cls.flexible_demand;
    out.cutoff = cls.cutoff;
    Ok(out)
}

/// Runs assignment, axis definition, projection, extraction and labelling
/// for every station zone.
pub fn run_pipeline(
    stations: &[Station],
    points: &[DemandPoint],
    params: &CostParams,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    check_inputs(stations, points)?;
    params.validate()?;
    config.validate()?;
    let nearest = assign_to_nearest_station(stations, points)?;
    let mut zones: BTreeMap<&str, (usize, Vec<&DemandPoint>)> = BTreeMap::new();
    for (p, &s) in points.iter().zip(&nearest) {
        zones
            .entry(stations[s].id.as_str())
            .or_insert((s, Vec::new()))
            .1
            .push(p);
    }
    // sums below run in id order so the output does not depend on input order
    let zones: Vec<(usize, Vec<&DemandPoint>)> = zones
        .into_values()
        .map(|(s, mut z)| {
            z.sort_by(|a, b| a.id.cmp(&b.id));
            (s, z)
        })
        .collect();

    let per_zone: Vec<Result<Vec<ZoneCorridor>>> = zones
        .par_iter()
        .map(|(s, zone)| {
            let station = &stations[*s];
            draft_zone(station, zone, config)?
                .into_iter()
                .map(|mut d| {
                    let c = finish_corridor(&station.id, &mut d, params, config)?;
                    Ok((c, d.assignments))
                })
                .collect()
        })
        .collect();

    let mut corridors = Vec::new();
    let mut assignments = Vec::new();
    for zone in per_zone {
        for (c, a) in zone? {
            corridors.push(c);
            assignments.extend(a);
        }
    }
    corridors.sort_by(|a, b| {
        a.station_id
            .cmp(&b.station_id)
            .then_with(|| a.corridor_id.cmp(&b.corridor_id))
    });
    assignments.sort_by(|a, b| a.point_id.cmp(&b.point_id));
    Ok(PipelineOutput { assignments, corridors })
}

/// Totals for one service mode over a group of passengers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTotals {
    pub access_cost: f64,
    pub waiting_cost: f64,
    pub riding_cost: f64,
    pub user_cost: f64,
    /// Operator figures are not attributable to a subset of passengers.
    pub operating_cost: Option<f64>,
    pub vehicle_cost: Option<f64>,
    pub operator_cost: Option<f64>,
    pub generalized_cost: Option<f64>,
    /// Per passenger, minutes.
    pub avg_access_time: f64,
    pub avg_waiting_time: f64,
    pub avg_riding_time: f64,
    /// Per passenger, $.
    pub avg_user_cost: f64,
    pub avg_operator_cost: Option<f64>,
    pub avg_generalized_cost: Option<f64>,
}

/// Relative change from the fixed-route baseline, percent; `None` where
/// the baseline is zero or not attributable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeChange {
    pub access_cost: Option<f64>,
    pub waiting_cost: Option<f64>,
    pub riding_cost: Option<f64>,
    pub user_cost: Option<f64>,
    pub operating_cost: Option<f64>,
    pub vehicle_cost: Option<f64>,
    pub operator_cost: Option<f64>,
    pub generalized_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub routes: usize,
    pub points: usize,
    /// pax/h
    pub passengers: f64,
    pub fixed_route: ModeTotals,
    pub semi_on_demand: ModeTotals,
    pub change_pct: ModeChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudySummary {
    /// h
    pub headway: f64,
    /// F* at the walk-coverage width, pax/h.
    pub threshold_at_max_width: Option<f64>,
    /// Same, pax per vehicle trip.
    pub threshold_per_trip_at_max_width: Option<f64>,
    pub all_feeders: GroupSummary,
    /// Corridors with at least one flexible-area point.
    pub routes_with_flexible_portion: GroupSummary,
    /// Passengers at flexible-area points only.
    pub flexible_area: GroupSummary,
    pub empty_corridors: usize,
    pub degenerate_corridors: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    access: f64,
    waiting: f64,
    riding: f64,
    operating: f64,
    vehicle: f64,
}

impl Acc {
    fn add(&mut self, b: &CostBreakdown) {
        self.access += b.access;
        self.waiting += b.waiting;
        self.riding += b.riding_x + b.riding_y;
        self.operating += b.operating_x + b.operating_y;
        self.vehicle += b.vehicle;
    }

    fn totals(&self, pax: f64, params: &CostParams, with_operator: bool) -> ModeTotals {
        let per = |v: f64| if pax > 0.0 { v / pax } else { 0.0 };
        let gt = params.value_of_time;
        let user = self.access + self.waiting + self.riding;
        let operator = self.operating + self.vehicle;
        let op = |v: f64| with_operator.then_some(v);
        ModeTotals {
            access_cost: self.access,
            waiting_cost: self.waiting,
            riding_cost: self.riding,
            user_cost: user,
            operating_cost: op(self.operating),
            vehicle_cost: op(self.vehicle),
            operator_cost: op(operator),
            generalized_cost: op(user + operator),
            avg_access_time: per(self.access) / (gt * params.access_factor) * 60.0,
            avg_waiting_time: per(self.waiting) / (gt * params.waiting_factor) * 60.0,
            avg_riding_time: per(self.riding) / gt * 60.0,
            avg_user_cost: per(user),
            avg_operator_cost: op(per(operator)),
            avg_generalized_cost: op(per(user + operator)),
        }
    }
}

fn pct(base: Option<f64>, new: Option<f64>) -> Option<f64> {
    match (base, new) {
        (Some(b), Some(n)) if b != 0.0 => Some((n - b) / b * 100.0),
        _ => None,
    }
}

fn group(routes: usize, points: usize, pax: f64, base: Acc, semi: Acc, params: &CostParams, op: bool) -> GroupSummary {
    let b = base.totals(pax, params, op);
    let s = semi.totals(pax, params, op);
    GroupSummary {
        routes,
        points,
        passengers: pax,
        fixed_route: b,
        semi_on_demand: s,
        change_pct: ModeChange {
            access_cost: pct(Some(b.access_cost), Some(s.access_cost)),
            waiting_cost: pct(Some(b.waiting_cost), Some(s.waiting_cost)),
            riding_cost: pct(Some(b.riding_cost), Some(s.riding_cost)),
            user_cost: pct(Some(b.user_cost), Some(s.user_cost)),
            operating_cost: pct(b.operating_cost, s.operating_cost),
            vehicle_cost: pct(b.vehicle_cost, s.vehicle_cost),
            operator_cost: pct(b.operator_cost, s.operator_cost),
            generalized_cost: pct(b.generalized_cost, s.generalized_cost),
        },
    }
}

/// Baseline (`x_f = 0`) and semi-on-demand (`x_f` = cutoff) costs per
/// active corridor at fixed headway, aggregated three ways.
///
/// Flexible-area passengers are charged their own access, waiting and
/// in-vehicle distance at point level, plus the corridor's entire detour
/// riding cost, which only they incur. Fleets are not shared between
/// corridors.
pub fn summarize_case_study(
    corridors: &[ClassifiedCorridor],
    params: &CostParams,
    headway: f64,
    config: &PipelineConfig,
) -> Result<CaseStudySummary> {
    let mut all = (0usize, 0usize, 0.0f64, Acc::default(), Acc::default());
    let mut hyb = (0usize, 0usize, 0.0f64, Acc::default(), Acc::default());
    let mut fla = (0usize, 0usize, 0.0f64, Acc::default(), Acc::default());
    let gt = params.value_of_time;
    for c in corridors {
        let Some((corridor, demand)) = &c.model else { continue };
        let base = cost_breakdown(corridor, demand, params, headway, 0.0)?;
        let semi = cost_breakdown(corridor, demand, params, headway, c.cutoff)?;
        all.0 += 1;
        all.1 += c.points;
        all.2 += c.trips;
        all.3.add(&base);
        all.4.add(&semi);
        if c.flexible_points == 0 {
            continue;
        }
        hyb.0 += 1;
        hyb.1 += c.points;
        hyb.2 += c.trips;
        hyb.3.add(&base);
        hyb.4.add(&semi);

        let pax = c.flexible_trips;
        let waiting = gt * params.waiting_factor * pax * headway / 2.0;
        let ride = gt * c.flexible_ride_distance / corridor.vehicle_speed;
        fla.0 += 1;
        fla.1 += c.flexible_points;
        fla.2 += pax;
        fla.3.access += gt * params.access_factor * corridor.mean_access_time() * pax;
        fla.3.waiting += waiting;
        fla.3.riding += ride;
        fla.4.waiting += waiting;
        fla.4.riding += ride + semi.riding_y;
    }
    let threshold = {
        let cs = CrossSection::from_uniform_width(config.max_walk_width(), config.walk_speed)?;
        let probe = Corridor::new(1.0, config.vehicle_speed, config.layover_time, cs)?;
        optimal_flexible_demand(&probe, params, headway).ok()
    };
    Ok(CaseStudySummary {
        headway,
        threshold_at_max_width: threshold,
        threshold_per_trip_at_max_width: threshold.map(|f| f * headway),
        all_feeders: group(all.0, all.1, all.2, all.3, all.4, params, true),
        routes_with_flexible_portion: group(hyb.0, hyb.1, hyb.2, hyb.3, hyb.4, params, true),
        flexible_area: group(fla.0, fla.1, fla.2, fla.3, fla.4, params, false),
        empty_corridors: corridors.iter().filter(|c| c.status == CorridorStatus::Empty).count(),
        degenerate_corridors: corridors
            .iter()
            .filter(|c| c.status == CorridorStatus::Degenerate)
            .count(),
    })
}

/// Real-valued fixed-route and semi-on-demand fleets of an active corridor.
pub fn corridor_fleets(c: &ClassifiedCorridor, headway: f64) -> Result<Option<(f64, f64)>> {
    let Some((corridor, demand)) = &c.model else {
        return Ok(None);
    };
    Ok(Some((
        fleet_size(corridor, demand, headway, 0.0)?,
        fleet_size(corridor, demand, headway, c.cutoff)?,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(id: &str, x: f64, y: f64) -> Station {
        Station {
            id: id.into(),
            position: Point2::new(x, y),
        }
    }

    fn pt(id: &str, x: f64, y: f64, trips: f64) -> DemandPoint {
        DemandPoint {
            id: id.into(),
            position: Point2::new(x, y),
            trips,
        }
    }

    fn params() -> CostParams {
        CostParams::new(16.5, 2.0, 1.5, 0.5, 12.0).unwrap()
    }

    #[test]
    fn nearest_and_tie_break() {
        let s = [st("b", 10.0, 0.0), st("a", 0.0, 0.0)];
        let p = [pt("p", 3.0, 1.0, 1.0), pt("q", 5.0, 0.0, 1.0)];
        let a = assign_to_nearest_station(&s, &p).unwrap();
        assert_eq!(s[a[0]].id, "a");
        assert_eq!(s[a[1]].id, "a");
        assert!(assign_to_nearest_station(&[], &p).is_err());
    }

    #[test]
    fn axis_and_projection() {
        let p1 = pt("1", 5.0, 0.0, 1.0);
        let axis = define_corridor_axis(Point2::new(0.0, 0.0), &[&p1]).unwrap().unwrap();
        assert_eq!(axis.length, 5.0);
        let (x, y) = axis.project(Point2::new(2.5, 0.0));
        assert!((x - 2.5).abs() < 1e-12 && y == 0.0);
        let (xa, ya) = axis.project(Point2::new(2.0, 0.7));
        let (xb, yb) = axis.project(Point2::new(2.0, -0.7));
        assert_eq!(xa, xb);
        assert!(ya * yb < 0.0 && (ya + yb).abs() < 1e-12);
        // behind the station clamps to L
        assert_eq!(axis.project(Point2::new(-1.0, 0.0)).0, 5.0);
    }

    #[test]
    fn farthest_tie_goes_to_lowest_id() {
        let a = pt("z", 3.0, 0.0, 1.0);
        let b = pt("k", 0.0, 3.0, 1.0);
        let axis = define_corridor_axis(Point2::new(0.0, 0.0), &[&a, &b]).unwrap().unwrap();
        assert_eq!(axis.far_end, b.position);
    }

    #[test]
    fn all_points_on_station_is_degenerate() {
        let s = [st("s", 1.0, 1.0)];
        let p = [pt("a", 1.0, 1.0, 5.0)];
        let out = run_pipeline(&s, &p, &params(), &PipelineConfig::default()).unwrap();
        assert_eq!(out.corridors[0].status, CorridorStatus::Degenerate);
        assert_eq!(out.assignments[0].service, ServiceArea::Fixed);
    }

    #[test]
    fn zero_trip_corridor_is_empty() {
        let s = [st("s", 0.0, 0.0)];
        let p = [pt("a", 4.0, 0.0, 0.0), pt("b", 2.0, 1.0, 3.0), pt("c", 2.0, -1.0, 0.0)];
        let out = run_pipeline(&s, &p, &params(), &PipelineConfig::default()).unwrap();
        let status: Vec<CorridorStatus> = out.corridors.iter().map(|c| c.status).collect();
        assert_eq!(status, [CorridorStatus::Empty, CorridorStatus::Active]);
        let summary = summarize_case_study(&out.corridors, &params(), 0.25, &PipelineConfig::default()).unwrap();
        assert_eq!(summary.empty_corridors, 1);
        assert_eq!(summary.all_feeders.routes, 1);
    }

    #[test]
    fn width_capped_by_walk_coverage() {
        let mk = |x: f64, y: f64| CorridorAssignment {
            point_id: format!("{x}{y}"),
            station_id: "s".into(),
            corridor_id: "+".into(),
            x_along_axis: x,
            y_offset: y,
            trips: 1.0,
            service: ServiceArea::Fixed,
            beyond_walk_coverage: false,
        };
        let a = [mk(1.0, 0.9), mk(2.0, 1.0), mk(3.0, 0.8)];
        let refs: Vec<&CorridorAssignment> = a.iter().collect();
        let cp = extract_corridor_parameters(&refs, 4.0, &PipelineConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(cp.width, 2.0);
        assert!(cp.cross_section.mean_detour <= 2.0 / 3.0 + 1e-12);
    }

    #[test]
    fn labels_are_prefix_reaching_threshold() {
        let cs = CrossSection::new(0.125, 2.0 / 3.0).unwrap();
        let corridor = Corridor::new(10.0, 30.0, 1.0 / 6.0, cs).unwrap();
        let a: Vec<CorridorAssignment> = (0..10)
            .map(|i| CorridorAssignment {
                point_id: format!("p{i}"),
                station_id: "s".into(),
                corridor_id: "+".into(),
                x_along_axis: i as f64 + 0.5,
                y_offset: 0.1,
                trips: 10.0,
                service: ServiceArea::Fixed,
                beyond_walk_coverage: false,
            })
            .collect();
        let refs: Vec<&CorridorAssignment> = a.iter().collect();
        let pts: Vec<(f64, f64)> = a.iter().map(|a| (a.x_along_axis, a.trips)).collect();
        let demand = DemandDistribution::empirical(&pts, 10.0, 10).unwrap();
        let c = classify_flexible(&corridor, &demand, &refs, &params(), 0.25).unwrap();
        assert!((c.flexible_demand - 35.545).abs() < 1e-2);
        let n_flex = c.labels.iter().filter(|l| **l == ServiceArea::Flexible).count();
        assert_eq!(n_flex, 4);
        assert!(c.labels[..4].iter().all(|l| *l == ServiceArea::Flexible));
        assert!((c.cutoff - 3.5545).abs() < 1e-3);
    }

    #[test]
    fn equirectangular_scale() {
        let p = equirectangular_km(0.0, 1.0, 0.0, 0.0);
        assert!((p.y - 111.195).abs() < 1e-2);
        let q = equirectangular_km(1.0, 60.0, 0.0, 60.0);
        assert!((q.x - 111.195 / 2.0).abs() < 1e-2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = [st("s", 0.0, 0.0)];
        let p = [pt("a", 1.0, 0.0, 1.0), pt("a", 2.0, 0.0, 1.0)];
        assert!(run_pipeline(&s, &p, &params(), &PipelineConfig::default()).is_err());
    }

    #[test]
    fn multiple_directions_per_side() {
        let s = [st("s", 0.0, 0.0)];
        let p = [
            pt("a", 10.0, 0.0, 5.0),
            pt("b", 0.0, 6.0, 5.0),
            pt("c", 0.5, 5.0, 5.0),
            pt("d", 6.0, 0.3, 5.0),
        ];
        let cfg = PipelineConfig {
            max_corridors: 2,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&s, &p, &params(), &cfg).unwrap();
        let ids: Vec<&str> = out.corridors.iter().map(|c| c.corridor_id.as_str()).collect();
        assert_eq!(ids, ["+1", "-1", "-2"]);
        assert_eq!(out.assignments.len(), 4);
    }
}
