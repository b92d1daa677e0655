//! Synthetic inputs shared by the benchmarks.

use semiflex::{DemandPoint, Point2, Station};

/// `n_stations` on a line 3 km apart with `per_station` points scattered
/// around each by a fixed linear congruential sequence.
pub fn synthetic_case(n_stations: usize, per_station: usize) -> (Vec<Station>, Vec<DemandPoint>) {
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let stations: Vec<Station> = (0..n_stations)
        .map(|i| Station {
            id: format!("s{i:03}"),
            position: Point2::new(3.0 * i as f64, 0.0),
        })
        .collect();
    let mut points = Vec::with_capacity(n_stations * per_station);
    for (i, s) in stations.iter().enumerate() {
        for j in 0..per_station {
            let x = s.position.x + 3.0 * (next() - 0.5);
            let y = 8.0 * (next() - 0.5);
            points.push(DemandPoint {
                id: format!("p{i:03}_{j:04}"),
                position: Point2::new(x, y),
                trips: 5.0 * next(),
            });
        }
    }
    (stations, points)
}
