//! Named parameter sets for the two reference bus corridors.

use crate::cost::CostParams;
use crate::demand::{Corridor, CrossSection, DemandDistribution};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// km
    pub route_length: f64,
    /// h
    pub mean_access_time: f64,
    /// km
    pub mean_detour: f64,
    /// pax/h
    pub total_demand: f64,
    /// h
    pub headway: f64,
    /// km/h
    pub vehicle_speed: f64,
    /// h
    pub layover_time: f64,
    pub params: CostParams,
}

const BASE_PARAMS: CostParams = CostParams {
    value_of_time: 16.5,
    access_factor: 2.0,
    waiting_factor: 1.5,
    operating_cost: 0.5,
    vehicle_cost: 12.0,
};

pub const CTA126: Preset = Preset {
    name: "cta126",
    route_length: 10.9,
    mean_access_time: 2.25 / 60.0,
    mean_detour: 0.13,
    total_demand: 80.0,
    headway: 0.25,
    vehicle_speed: 30.0,
    layover_time: 10.0 / 60.0,
    params: BASE_PARAMS,
};

pub const CTA84: Preset = Preset {
    name: "cta84",
    route_length: 13.4,
    mean_access_time: 6.75 / 60.0,
    mean_detour: 0.53,
    ..CTA126
};

pub const ALL: [Preset; 2] = [CTA126, CTA84];

pub fn by_name(name: &str) -> Option<Preset> {
    ALL.into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

impl Preset {
    pub fn corridor(&self) -> Result<Corridor> {
        Corridor::new(
            self.route_length,
            self.vehicle_speed,
            self.layover_time,
            CrossSection::new(self.mean_access_time, self.mean_detour)?,
        )
    }

    pub fn uniform_demand(&self) -> Result<DemandDistribution> {
        DemandDistribution::uniform(self.total_demand, self.route_length)
    }

    pub fn triangular_demand(&self) -> Result<DemandDistribution> {
        DemandDistribution::triangular(self.total_demand, self.route_length)
    }
}
