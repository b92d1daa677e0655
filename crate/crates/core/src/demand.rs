//! Demand along the corridor (x-direction) and the cross-section statistics
//! (y-direction) the cost formulas consume.
//!
//! Positions run from the far, low-density end of the corridor (`x = 0`)
//! to the station (`x = L_x`). Demand is hourly: densities are in pax/km-h
//! and cumulative values in pax/h.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure, Result};

/// Number of equal-width bins used for empirical profiles unless overridden.
pub const DEFAULT_BINS: usize = 50;

const POSITION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandKind {
    Uniform,
    Triangular,
    Empirical,
}

/// Piecewise-constant density over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
struct Binned {
    width: f64,
    /// Trips per bin (pax/h).
    mass: Vec<f64>,
    /// `cum[i]` is the cumulative demand at the left edge of bin `i`;
    /// `cum[n]` is the total.
    cum: Vec<f64>,
    points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Uniform,
    Triangular,
    Empirical(Binned),
}

/// Hourly demand distribution along a corridor of length `L_x`.
///
/// Immutable once built. Uniform and triangular profiles are parameterized
/// by the total demand, so the triangular peak density is `2Λ/L_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandDistribution {
    total: f64,
    route_length: f64,
    profile: Profile,
}

impl DemandDistribution {
    pub fn uniform(total: f64, route_length: f64) -> Result<Self> {
        Self::check_common(total, route_length)?;
        Ok(Self {
            total,
            route_length,
            profile: Profile::Uniform,
        })
    }

    /// Density rising linearly from zero at the far end to `2Λ/L_x` at the station.
    pub fn triangular(total: f64, route_length: f64) -> Result<Self> {
        Self::check_common(total, route_length)?;
        Ok(Self {
            total,
            route_length,
            profile: Profile::Triangular,
        })
    }

    /// Bins point demand `(x_km, trips_per_h)` into `bins` equal-width cells.
    ///
    /// A point sitting exactly on an interior bin edge belongs to the bin on
    /// its right; a point at `L_x` belongs to the last bin.
    pub fn empirical(points: &[(f64, f64)], route_length: f64, bins: usize) -> Result<Self> {
        ensure(route_length.is_finite() && route_length > 0.0, || {
            format!("route length must be positive, got {route_length}")
        })?;
        ensure(bins > 0, || "bin count must be at least 1".to_string())?;
        let width = route_length / bins as f64;
        let mut mass = vec![0.0; bins];
        for (i, &(x, trips)) in points.iter().enumerate() {
            ensure(x.is_finite() && (0.0..=route_length).contains(&x), || {
                format!("point {i} at x = {x} lies outside [0, {route_length}]")
            })?;
            ensure(trips.is_finite() && trips >= 0.0, || {
                format!("point {i} has invalid trips {trips}")
            })?;
            let idx = ((x / width).floor() as usize).min(bins - 1);
            mass[idx] += trips;
        }
        let mut cum = Vec::with_capacity(bins + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for m in &mass {
            acc += m;
            cum.push(acc);
        }
        Ok(Self {
            total: acc,
            route_length,
            profile: Profile::Empirical(Binned {
                width,
                mass,
                cum,
                points: points.to_vec(),
            }),
        })
    }

    fn check_common(total: f64, route_length: f64) -> Result<()> {
        ensure(total.is_finite() && total >= 0.0, || {
            format!("total demand must be non-negative, got {total}")
        })?;
        ensure(route_length.is_finite() && route_length > 0.0, || {
            format!("route length must be positive, got {route_length}")
        })
    }

    pub fn kind(&self) -> DemandKind {
        match self.profile {
            Profile::Uniform => DemandKind::Uniform,
            Profile::Triangular => DemandKind::Triangular,
            Profile::Empirical(_) => DemandKind::Empirical,
        }
    }

    /// Total hourly demand Λ.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn route_length(&self) -> f64 {
        self.route_length
    }

    /// Source points of an empirical profile; empty for analytic kinds.
    pub fn empirical_points(&self) -> &[(f64, f64)] {
        match &self.profile {
            Profile::Empirical(b) => &b.points,
            _ => &[],
        }
    }

    /// Number of bins of an empirical profile.
    pub fn bin_count(&self) -> Option<usize> {
        match &self.profile {
            Profile::Empirical(b) => Some(b.mass.len()),
            _ => None,
        }
    }

    /// Same shape with every trip count scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ensure(factor.is_finite() && factor >= 0.0, || {
            format!("scale factor must be non-negative, got {factor}")
        })?;
        let profile = match &self.profile {
            Profile::Empirical(b) => Profile::Empirical(Binned {
                width: b.width,
                mass: b.mass.iter().map(|m| m * factor).collect(),
                cum: b.cum.iter().map(|c| c * factor).collect(),
                points: b.points.iter().map(|&(x, t)| (x, t * factor)).collect(),
            }),
            p => p.clone(),
        };
        Ok(Self {
            total: self.total * factor,
            route_length: self.route_length,
            profile,
        })
    }

    fn check_position(&self, x: f64) -> Result<f64> {
        let l = self.route_length;
        let slack = POSITION_SLACK * l;
        if !x.is_finite() || x < -slack || x > l + slack {
            return Err(domain(format!("position {x} km outside [0, {l}]")));
        }
        Ok(x.clamp(0.0, l))
    }

    /// Demand density f(x) in pax/km-h.
    pub fn density(&self, x: f64) -> Result<f64> {
        let x = self.check_position(x)?;
        let l = self.route_length;
        Ok(match &self.profile {
            Profile::Uniform => self.total / l,
            Profile::Triangular => 2.0 * self.total * x / (l * l),
            Profile::Empirical(b) => b.mass[b.bin_of(x)] / b.width,
        })
    }

    /// Cumulative demand F(x) from the far end, in pax/h.
    pub fn cumulative(&self, x: f64) -> Result<f64> {
        let x = self.check_position(x)?;
        let l = self.route_length;
        Ok(match &self.profile {
            Profile::Uniform => self.total * x / l,
            Profile::Triangular => self.total * (x / l).powi(2),
            Profile::Empirical(b) => {
                if x >= l {
                    self.total
                } else {
                    let i = b.bin_of(x);
                    let left = i as f64 * b.width;
                    b.cum[i] + b.mass[i] * (x - left) / b.width
                }
            }
        })
    }

    /// Smallest position whose cumulative demand reaches `q`.
    ///
    /// On a zero-density plateau this returns the plateau's left edge.
    pub fn inverse_cumulative(&self, q: f64) -> Result<f64> {
        let total = self.total;
        let slack = 1e-12 * total.max(1.0);
        if !q.is_finite() || q < -slack || q > total + slack {
            return Err(domain(format!("demand level {q} outside [0, {total}]")));
        }
        let q = q.clamp(0.0, total);
        if q <= 0.0 {
            return Ok(0.0);
        }
        let l = self.route_length;
        Ok(match &self.profile {
            Profile::Uniform => l * q / total,
            Profile::Triangular => l * (q / total).sqrt(),
            Profile::Empirical(b) => {
                // first bin whose right-edge cumulative reaches q
                let i = b.cum[1..].partition_point(|&c| c < q).min(b.mass.len() - 1);
                let left = i as f64 * b.width;
                if b.mass[i] > 0.0 {
                    (left + (q - b.cum[i]) / b.mass[i] * b.width).min(l)
                } else {
                    left
                }
            }
        })
    }

    /// ∫₀^{L_x} F(x) dx, the total x-directional passenger-km per hour.
    pub fn riding_integral(&self) -> f64 {
        let l = self.route_length;
        match &self.profile {
            Profile::Uniform => self.total * l / 2.0,
            Profile::Triangular => self.total * l / 3.0,
            Profile::Empirical(b) => b.cum.windows(2).map(|w| 0.5 * (w[0] + w[1]) * b.width).sum(),
        }
    }
}

impl Binned {
    fn bin_of(&self, x: f64) -> usize {
        ((x / self.width).floor() as usize).min(self.mass.len() - 1)
    }
}

/// Mean fixed-route access time and mean perpendicular detour of the
/// catchment cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    /// Mean access time t̄_a, hours.
    pub mean_access_time: f64,
    /// Mean detour d̄_{d,y}, km.
    pub mean_detour: f64,
}

impl CrossSection {
    pub fn new(mean_access_time: f64, mean_detour: f64) -> Result<Self> {
        ensure(mean_access_time.is_finite() && mean_access_time >= 0.0, || {
            format!("mean access time must be non-negative, got {mean_access_time}")
        })?;
        ensure(mean_detour.is_finite() && mean_detour >= 0.0, || {
            format!("mean detour must be non-negative, got {mean_detour}")
        })?;
        Ok(Self {
            mean_access_time,
            mean_detour,
        })
    }

    /// Cross-section for demand spread uniformly across a catchment of
    /// width `width` km centred on the route.
    ///
    /// The mean detour is the mean absolute difference of two uniform
    /// offsets (`W/3`); the access time is the mean walk `W/4` at
    /// `walk_speed` km/h.
    pub fn from_uniform_width(width: f64, walk_speed: f64) -> Result<Self> {
        ensure(width.is_finite() && width >= 0.0, || {
            format!("catchment width must be non-negative, got {width}")
        })?;
        ensure(walk_speed.is_finite() && walk_speed > 0.0, || {
            format!("walk speed must be positive, got {walk_speed}")
        })?;
        Self::new(width / (4.0 * walk_speed), width / 3.0)
    }
}

/// Corridor geometry and operating constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    /// Route length L_x, km.
    pub route_length: f64,
    /// Vehicle speed V_d, km/h.
    pub vehicle_speed: f64,
    /// Layover time T_l, hours.
    pub layover_time: f64,
    pub cross_section: CrossSection,
}

impl Corridor {
    pub fn new(route_length: f64, vehicle_speed: f64, layover_time: f64, cross_section: CrossSection) -> Result<Self> {
        ensure(route_length.is_finite() && route_length > 0.0, || {
            format!("route length must be positive, got {route_length}")
        })?;
        ensure(vehicle_speed.is_finite() && vehicle_speed > 0.0, || {
            format!("vehicle speed must be positive, got {vehicle_speed}")
        })?;
        ensure(layover_time.is_finite() && layover_time >= 0.0, || {
            format!("layover time must be non-negative, got {layover_time}")
        })?;
        CrossSection::new(cross_section.mean_access_time, cross_section.mean_detour)?;
        Ok(Self {
            route_length,
            vehicle_speed,
            layover_time,
            cross_section,
        })
    }

    pub fn mean_access_time(&self) -> f64 {
        self.cross_section.mean_access_time
    }

    pub fn mean_detour(&self) -> f64 {
        self.cross_section.mean_detour
    }

    /// Checks that `demand` was built over this corridor's length.
    pub fn check_demand(&self, demand: &DemandDistribution) -> Result<()> {
        let a = self.route_length;
        let b = demand.route_length();
        ensure((a - b).abs() <= 1e-9 * a.max(b), || {
            format!("demand defined over {b} km but corridor is {a} km")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn uniform_density_matches_total_over_length() {
        let d = DemandDistribution::uniform(80.0, 10.9).unwrap();
        assert!(close(d.density(5.0).unwrap(), 7.3394, 1e-4));
        assert!(close(d.cumulative(10.9).unwrap(), 80.0, 1e-12));
        assert!(close(d.cumulative(7.91).unwrap(), 58.06, 1e-4));
        assert!(close(d.inverse_cumulative(80.0).unwrap(), 10.9, 1e-12));
    }

    #[test]
    fn triangular_vanishes_at_far_end() {
        let d = DemandDistribution::triangular(80.0, 10.9).unwrap();
        assert_eq!(d.density(0.0).unwrap(), 0.0);
        let d = DemandDistribution::triangular(80.0, 13.4).unwrap();
        assert!(close(d.cumulative(6.7).unwrap(), 20.0, 1e-12));
        assert!(close(d.inverse_cumulative(20.0).unwrap(), 6.7, 1e-12));
    }

    #[test]
    fn empirical_binning_by_hand() {
        // 10 pax in [0,5), 30 pax in [5,10]
        let d = DemandDistribution::empirical(&[(2.0, 10.0), (8.0, 30.0)], 10.0, 2).unwrap();
        assert!(close(d.density(1.0).unwrap(), 2.0, 1e-12));
        assert!(close(d.density(9.0).unwrap(), 6.0, 1e-12));
        assert!(close(d.inverse_cumulative(10.0).unwrap(), 5.0, 1e-12));
        assert!(close(d.total(), 40.0, 1e-12));
        // exact piecewise integral: bin0 ∫ 2x = 25, bin1 ∫ (10 + 6(x-5)) = 50 + 75
        assert!(close(d.riding_integral(), 150.0, 1e-12));
    }

    #[test]
    fn riding_integrals_closed_form() {
        let u = DemandDistribution::uniform(80.0, 10.9).unwrap();
        assert!(close(u.riding_integral(), 436.0, 1e-12));
        let t = DemandDistribution::triangular(80.0, 10.9).unwrap();
        assert!(close(t.riding_integral(), 290.6667, 1e-6));
        let z = DemandDistribution::uniform(0.0, 10.9).unwrap();
        assert_eq!(z.riding_integral(), 0.0);
    }

    #[test]
    fn plateau_inverse_returns_left_edge() {
        // bins: [0,2) 5 pax, [2,4) empty, [4,6) 5 pax
        let d = DemandDistribution::empirical(&[(1.0, 5.0), (5.0, 5.0)], 6.0, 3).unwrap();
        assert!(close(d.inverse_cumulative(5.0).unwrap(), 2.0, 1e-12));
        assert!(close(d.cumulative(3.0).unwrap(), 5.0, 1e-12));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let d = DemandDistribution::uniform(80.0, 10.9).unwrap();
        assert!(d.density(-0.1).is_err());
        assert!(d.cumulative(11.0).is_err());
        assert!(d.inverse_cumulative(81.0).is_err());
        assert!(DemandDistribution::empirical(&[(11.0, 1.0)], 10.0, 5).is_err());
        assert!(DemandDistribution::empirical(&[(1.0, -1.0)], 10.0, 5).is_err());
    }

    #[test]
    fn point_on_route_end_goes_to_last_bin() {
        let d = DemandDistribution::empirical(&[(10.0, 4.0)], 10.0, 5).unwrap();
        assert!(close(d.density(9.5).unwrap(), 2.0, 1e-12));
        assert_eq!(d.cumulative(8.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_width_cross_section() {
        let c = CrossSection::from_uniform_width(2.0, 4.0).unwrap();
        assert!(close(c.mean_access_time, 0.125, 1e-12));
        assert!(close(c.mean_detour, 0.6667, 1e-4));
        let z = CrossSection::from_uniform_width(0.0, 4.0).unwrap();
        assert_eq!((z.mean_access_time, z.mean_detour), (0.0, 0.0));
        assert!(CrossSection::from_uniform_width(1.0, 0.0).is_err());
    }

    #[test]
    fn corridor_rejects_bad_constants() {
        let cs = CrossSection::new(0.0375, 0.13).unwrap();
        assert!(Corridor::new(10.9, 0.0, 1.0 / 6.0, cs).is_err());
        assert!(Corridor::new(0.0, 30.0, 1.0 / 6.0, cs).is_err());
        assert!(Corridor::new(10.9, 30.0, -1.0, cs).is_err());
        let c = Corridor::new(10.9, 30.0, 1.0 / 6.0, cs).unwrap();
        assert!(c
            .check_demand(&DemandDistribution::uniform(80.0, 13.4).unwrap())
            .is_err());
    }
}
