//! CSV and GeoJSON readers and writers. Row numbers in errors are 1-based
//! file lines, the header being line 1.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{ModelError, Result};
use crate::geo::{CorridorAssignment, DemandPoint, Point2, Station};
use crate::joint::VehicleType;

fn io_err(path: &Path, e: impl std::fmt::Display) -> ModelError {
    ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(source: &str, row: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        source_name: source.to_string(),
        row,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| io_err(path, e))?;
    Ok(s)
}

/// Deserializes every data row of CSV text, checking each with `check`.
pub fn parse_csv<T, F>(source: &str, text: &str, mut check: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> std::result::Result<(), String>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<T>().enumerate() {
        let fallback = i + 2;
        let row = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(fallback, |p| p.line() as usize);
                let msg = match e.kind() {
                    csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                    _ => e.to_string(),
                };
                return Err(parse_err(source, line, msg));
            }
        };
        check(&row).map_err(|m| parse_err(source, fallback, m))?;
        out.push(row);
    }
    Ok(out)
}

fn finite(what: &str, v: f64) -> std::result::Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{what} must be finite, got {v}"))
    }
}

fn non_negative(what: &str, v: f64) -> std::result::Result<(), String> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(format!("{what} must be non-negative, got {v}"))
    }
}

#[derive(Debug, Deserialize)]
struct EmpiricalRow {
    x_km: f64,
    trips_per_h: f64,
}

/// `x_km,trips_per_h` rows for an empirical demand distribution.
pub fn read_empirical_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_to_string(path)?;
    let rows: Vec<EmpiricalRow> = parse_csv(&path.display().to_string(), &text, |r: &EmpiricalRow| {
        non_negative("x_km", r.x_km)?;
        non_negative("trips_per_h", r.trips_per_h)
    })?;
    Ok(rows.into_iter().map(|r| (r.x_km, r.trips_per_h)).collect())
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    name: String,
    capacity: f64,
    operating_cost_per_km: f64,
    vehicle_cost_per_h: f64,
}

/// `name,capacity,operating_cost_per_km,vehicle_cost_per_h` rows.
pub fn read_catalog_csv(path: &Path) -> Result<Vec<VehicleType>> {
    let text = read_to_string(path)?;
    let rows: Vec<CatalogRow> = parse_csv(&path.display().to_string(), &text, |r: &CatalogRow| {
        for (what, v) in [
            ("capacity", r.capacity),
            ("operating_cost_per_km", r.operating_cost_per_km),
            ("vehicle_cost_per_h", r.vehicle_cost_per_h),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{what} must be positive, got {v}"));
            }
        }
        Ok(())
    })?;
    Ok(rows
        .into_iter()
        .map(|r| VehicleType {
            name: r.name,
            capacity: r.capacity,
            operating_cost: r.operating_cost_per_km,
            vehicle_cost: r.vehicle_cost_per_h,
        })
        .collect())
}

#[derive(Debug, Deserialize)]
struct StationRow {
    id: String,
    x_km: f64,
    y_km: f64,
}

fn is_geojson(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("geojson") | Some("json")
    )
}

/// Stations from `id,x_km,y_km` CSV, or from GeoJSON point features whose
/// coordinates are already planar km; the id comes from the feature id or
/// an `id` property.
pub fn read_stations(path: &Path) -> Result<Vec<Station>> {
    let text = read_to_string(path)?;
    let source = path.display().to_string();
    if is_geojson(path) {
        return parse_station_geojson(&source, &text);
    }
    let rows: Vec<StationRow> = parse_csv(&source, &text, |r: &StationRow| {
        finite("x_km", r.x_km)?;
        finite("y_km", r.y_km)
    })?;
    Ok(rows
        .into_iter()
        .map(|r| Station {
            id: r.id,
            position: Point2::new(r.x_km, r.y_km),
        })
        .collect())
}

fn json_label(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub fn parse_station_geojson(source: &str, text: &str) -> Result<Vec<Station>> {
    let gj: GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| parse_err(source, 0, e.to_string()))?;
    let features = match gj {
        GeoJson::FeatureCollection(fc) => fc.features,
        GeoJson::Feature(f) => vec![f],
        GeoJson::Geometry(_) => return Err(parse_err(source, 0, "expected features with ids")),
    };
    features
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let row = i + 1;
            let id =
                f.id.as_ref()
                    .map(|id| match id {
                        geojson::feature::Id::String(s) => s.clone(),
                        geojson::feature::Id::Number(n) => n.to_string(),
                    })
                    .or_else(|| f.property("id").and_then(json_label))
                    .ok_or_else(|| parse_err(source, row, "feature has no id"))?;
            let position = match f.geometry.map(|g| g.value) {
                Some(Value::Point(c)) if c.len() >= 2 && c[0].is_finite() && c[1].is_finite() => {
                    Point2::new(c[0], c[1])
                }
                _ => return Err(parse_err(source, row, format!("station '{id}' is not a finite point"))),
            };
            Ok(Station { id, position })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    id: String,
    x_km: f64,
    y_km: f64,
    trips_per_h: f64,
}

/// Demand points from `id,x_km,y_km,trips_per_h`. An empty file yields no points.
pub fn read_demand_points(path: &Path) -> Result<Vec<DemandPoint>> {
    let text = read_to_string(path)?;
    let rows: Vec<DemandRow> = parse_csv(&path.display().to_string(), &text, |r: &DemandRow| {
        finite("x_km", r.x_km)?;
        finite("y_km", r.y_km)?;
        non_negative("trips_per_h", r.trips_per_h)
    })?;
    Ok(rows
        .into_iter()
        .map(|r| DemandPoint {
            id: r.id,
            position: Point2::new(r.x_km, r.y_km),
            trips: r.trips_per_h,
        })
        .collect())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Six decimals, never `-0.000000`.
fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// `point_id,station_id,corridor_id,x_km,y_km,service,beyond_walk_coverage`,
/// with `x_km`/`y_km` in corridor coordinates.
pub fn write_assignments_csv<W: Write>(out: W, assignments: &[CorridorAssignment]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "point_id",
        "station_id",
        "corridor_id",
        "x_km",
        "y_km",
        "service",
        "beyond_walk_coverage",
    ])?;
    for a in assignments {
        w.write_record([
            a.point_id.as_str(),
            a.station_id.as_str(),
            a.corridor_id.as_str(),
            &fixed6(a.x_along_axis),
            &fixed6(a.y_offset),
            &a.service.to_string(),
            if a.beyond_walk_coverage { "true" } else { "false" },
        ])?;
    }
    w.flush()
}

pub fn save_assignments_csv(path: &Path, assignments: &[CorridorAssignment]) -> Result<()> {
    write_assignments_csv(create(path)?, assignments).map_err(|e| io_err(path, e))
}

/// Labelled points at their input coordinates.
pub fn assignments_geojson(assignments: &[CorridorAssignment], points: &[DemandPoint]) -> FeatureCollection {
    let pos: HashMap<&str, Point2> = points.iter().map(|p| (p.id.as_str(), p.position)).collect();
    let features = assignments
        .iter()
        .filter_map(|a| {
            let p = pos.get(a.point_id.as_str())?;
            let mut props = JsonObject::new();
            props.insert("station_id".into(), a.station_id.clone().into());
            props.insert("corridor_id".into(), a.corridor_id.clone().into());
            props.insert("service".into(), a.service.to_string().into());
            props.insert("trips_per_h".into(), a.trips.into());
            props.insert("beyond_walk_coverage".into(), a.beyond_walk_coverage.into());
            Some(Feature {
                bbox: None,
                geometry: Some(Geometry::new(Value::Point(vec![p.x, p.y]))),
                id: Some(geojson::feature::Id::String(a.point_id.clone())),
                properties: Some(props),
                foreign_members: None,
            })
        })
        .collect();
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    }
}

pub fn save_assignments_geojson(path: &Path, assignments: &[CorridorAssignment], points: &[DemandPoint]) -> Result<()> {
    let fc = assignments_geojson(assignments, points);
    let mut w = create(path)?;
    let text = GeoJson::FeatureCollection(fc).to_string();
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::ServiceArea;

    #[test]
    fn demand_rows_and_row_numbers() {
        let text = "id,x_km,y_km,trips_per_h\na,1,2,3\nb,1,2,x\n";
        let err = parse_csv("d.csv", text, |_: &DemandRow| Ok(())).unwrap_err();
        assert!(matches!(err, ModelError::Parse { row: 3, .. }), "{err}");
        let neg = "id,x_km,y_km,trips_per_h\na,1,2,3\nb,1,2,-1\n";
        let err = parse_csv("d.csv", neg, |r: &DemandRow| non_negative("trips_per_h", r.trips_per_h)).unwrap_err();
        assert!(matches!(err, ModelError::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn empty_text_has_no_rows() {
        let rows: Vec<DemandRow> = parse_csv("d.csv", "", |_| Ok(())).unwrap();
        assert!(rows.is_empty());
        let rows: Vec<DemandRow> = parse_csv("d.csv", "id,x_km,y_km,trips_per_h\n", |_| Ok(())).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn geojson_stations() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"s1","geometry":{"type":"Point","coordinates":[1.0,2.0]},"properties":{}},
            {"type":"Feature","geometry":{"type":"Point","coordinates":[3.0,4.0]},"properties":{"id":7}}]}"#;
        let s = parse_station_geojson("s.geojson", text).unwrap();
        assert_eq!(s[0].id, "s1");
        assert_eq!(s[1].id, "7");
        assert_eq!(s[1].position, Point2::new(3.0, 4.0));
        let bad = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"s1","geometry":{"type":"LineString","coordinates":[[1,2],[3,4]]},"properties":{}}]}"#;
        assert!(matches!(
            parse_station_geojson("s.geojson", bad),
            Err(ModelError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn assignment_csv_layout() {
        let a = CorridorAssignment {
            point_id: "p".into(),
            station_id: "s".into(),
            corridor_id: "-".into(),
            x_along_axis: 1.5,
            y_offset: -0.25,
            trips: 2.0,
            service: ServiceArea::Flexible,
            beyond_walk_coverage: false,
        };
        let mut buf = Vec::new();
        write_assignments_csv(&mut buf, &[a]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "point_id,station_id,corridor_id,x_km,y_km,service,beyond_walk_coverage\n\
             p,s,-,1.500000,-0.250000,flexible,false\n"
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_demand_points(Path::new("/nonexistent/demand.csv")),
            Err(ModelError::Io { .. })
        ));
    }
}
