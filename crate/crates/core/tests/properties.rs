use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiflex::geo::{DemandPoint, PipelineConfig, Point2, ServiceArea, Station};
use semiflex::{
    cost_breakdown, cost_derivative, fleet_size, headway, optimal_flexible_portion, optimize_for_vehicle, run_pipeline,
    service_metrics, summarize_case_study, total_cost, CapacityPolicy, Corridor, CostParams, CrossSection,
    DemandDistribution, RouteForm, VehicleType,
};

#[derive(Debug, Clone)]
struct Case {
    corridor: Corridor,
    demand: DemandDistribution,
    params: CostParams,
    headway: f64,
}

fn demand_strategy(l: f64, lambda: f64) -> BoxedStrategy<DemandDistribution> {
    prop_oneof![
        Just(DemandDistribution::uniform(lambda, l).unwrap()),
        Just(DemandDistribution::triangular(lambda, l).unwrap()),
        prop::collection::vec((0.0..=1.0f64, 0.0..20.0f64), 1..40).prop_map(move |pts| {
            let pts: Vec<(f64, f64)> = pts.into_iter().map(|(u, t)| (u * l, t)).collect();
            DemandDistribution::empirical(&pts, l, 20).unwrap()
        }),
    ]
    .boxed()
}

fn case_strategy() -> impl Strategy<Value = Case> {
    (
        (3.0..20.0f64, 10.0..200.0f64, 15.0..50.0f64, 0.0..0.3f64),
        (0.005..0.3f64, 0.02..1.5f64),
        (5.0..40.0f64, 1.0..3.0f64, 1.0..3.0f64, 0.2..3.0f64, 2.0..40.0f64),
        0.05..0.5f64,
    )
        .prop_flat_map(|((l, lambda, v, tl), (ta, dd), (gt, ga, gw, go, gv), h)| {
            demand_strategy(l, lambda).prop_map(move |demand| Case {
                corridor: Corridor::new(l, v, tl, CrossSection::new(ta, dd).unwrap()).unwrap(),
                demand,
                params: CostParams::new(gt, ga, gw, go, gv).unwrap(),
                headway: h,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cumulative_is_monotone_with_fixed_ends(c in case_strategy(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let d = &c.demand;
        let l = d.route_length();
        prop_assert_eq!(d.cumulative(0.0).unwrap(), 0.0);
        prop_assert!((d.cumulative(l).unwrap() - d.total()).abs() <= 1e-9 * d.total().max(1.0));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cumulative(lo * l).unwrap() <= d.cumulative(hi * l).unwrap() + 1e-12);
    }

    #[test]
    fn inverse_cumulative_round_trip(c in case_strategy(), u in 0.0..=1.0f64) {
        let d = &c.demand;
        let q = u * d.total();
        let x = d.inverse_cumulative(q).unwrap();
        prop_assert!((0.0..=d.route_length()).contains(&x));
        prop_assert!((d.cumulative(x).unwrap() - q).abs() <= 1e-9 * d.total().max(1.0));
        // no earlier position reaches q
        if x > 1e-9 {
            prop_assert!(d.cumulative(x * (1.0 - 1e-9)).unwrap() <= q + 1e-9 * d.total().max(1.0));
        }
    }

    #[test]
    fn components_sum_to_total(c in case_strategy(), u in 0.0..=1.0f64) {
        let x = u * c.corridor.route_length;
        let b = cost_breakdown(&c.corridor, &c.demand, &c.params, c.headway, x).unwrap();
        prop_assert!(b.sum_residual() <= 1e-12);
        prop_assert!(b.components().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn flexible_terms_shut_off_at_zero(c in case_strategy()) {
        let b = cost_breakdown(&c.corridor, &c.demand, &c.params, c.headway, 0.0).unwrap();
        prop_assert_eq!(b.riding_y, 0.0);
        prop_assert_eq!(b.operating_y, 0.0);
        let s = fleet_size(&c.corridor, &c.demand, c.headway, 0.0).unwrap();
        let fixed = 2.0 / c.headway * (c.corridor.route_length / c.corridor.vehicle_speed + c.corridor.layover_time);
        prop_assert!((s - fixed).abs() <= 1e-12 * fixed);
    }

    #[test]
    fn component_monotonicity(c in case_strategy(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let l = c.corridor.route_length;
        let (lo, hi) = if a <= b { (a * l, b * l) } else { (b * l, a * l) };
        let p = cost_breakdown(&c.corridor, &c.demand, &c.params, c.headway, lo).unwrap();
        let q = cost_breakdown(&c.corridor, &c.demand, &c.params, c.headway, hi).unwrap();
        let tol = 1e-9 * p.total;
        prop_assert!(q.access <= p.access + tol);
        prop_assert!(q.riding_y >= p.riding_y - tol);
        prop_assert!(q.operating_y >= p.operating_y - tol);
    }

    #[test]
    fn hybrid_optimum_is_stationary_and_convex(c in case_strategy()) {
        prop_assume!(c.demand.total() > 0.0);
        let (x, form) = optimal_flexible_portion(&c.corridor, &c.demand, &c.params, c.headway).unwrap();
        prop_assume!(form == RouteForm::Hybrid);
        // smooth profiles only: empirical densities jump at bin edges
        prop_assume!(c.demand.bin_count().is_none());
        let l = c.corridor.route_length;
        prop_assume!(x > 1e-3 * l && x < l * (1.0 - 1e-3));
        let total = total_cost(&c.corridor, &c.demand, &c.params, c.headway, x).unwrap();
        let g = cost_derivative(&c.corridor, &c.demand, &c.params, c.headway, x).unwrap();
        prop_assert!(g.abs() <= 1e-8 * total / l, "derivative {} at x {}", g, x);
        let step = 1e-4 * l;
        let f = |y: f64| total_cost(&c.corridor, &c.demand, &c.params, c.headway, y).unwrap();
        prop_assert!(f(x + step) + f(x - step) - 2.0 * f(x) >= -1e-9 * total);
    }

    #[test]
    fn headway_fleet_duality(c in case_strategy(), u in 0.0..=1.0f64, extra in 1.0..3.0f64) {
        let x = u * c.corridor.route_length;
        let s0 = fleet_size(&c.corridor, &c.demand, c.headway, x).unwrap() * extra;
        let h = headway(&c.corridor, &c.demand, x, s0).unwrap();
        let s1 = fleet_size(&c.corridor, &c.demand, h, x).unwrap();
        prop_assert!((s1 - s0).abs() <= 1e-9 * s0);
    }
}

fn reference_corridor(ta: f64, dd: f64, l: f64) -> (Corridor, DemandDistribution, CostParams) {
    (
        Corridor::new(l, 30.0, 1.0 / 6.0, CrossSection::new(ta, dd).unwrap()).unwrap(),
        DemandDistribution::uniform(80.0, l).unwrap(),
        CostParams::new(16.5, 2.0, 1.5, 0.5, 12.0).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cheaper_operator_never_costs_more(
        ta in 0.02..0.15f64, dd in 0.05..0.8f64, l in 5.0..15.0f64,
        b in 5.0..70.0f64, go in 0.3..2.0f64, gv in 2.0..20.0f64, cut in 0.5..0.99f64,
    ) {
        let (c, d, p) = reference_corridor(ta, dd, l);
        let policy = CapacityPolicy::default();
        let full = VehicleType::new("v", b, go, gv).unwrap();
        let cheap_o = VehicleType::new("v", b, go * cut, gv).unwrap();
        let cheap_v = VehicleType::new("v", b, go, gv * cut).unwrap();
        let t = optimize_for_vehicle(&c, &d, &p, &full, &policy).unwrap().breakdown.total;
        let to = optimize_for_vehicle(&c, &d, &p, &cheap_o, &policy).unwrap().breakdown.total;
        let tv = optimize_for_vehicle(&c, &d, &p, &cheap_v, &policy).unwrap().breakdown.total;
        prop_assert!(to <= t * (1.0 + 1e-9));
        prop_assert!(tv <= t * (1.0 + 1e-9));
    }

    #[test]
    fn tripled_operator_costs_never_extend_flexible_portion(
        ta in 0.02..0.15f64, dd in 0.05..0.8f64, l in 5.0..15.0f64, pick in 0usize..5,
    ) {
        let (c, d, p) = reference_corridor(ta, dd, l);
        let policy = CapacityPolicy::default();
        let v = semiflex::default_catalog().swap_remove(pick);
        let x1 = optimize_for_vehicle(&c, &d, &p, &v, &policy).unwrap().x_f;
        let x3 = optimize_for_vehicle(&c, &d, &p, &v.with_cost_scale(3.0), &policy).unwrap().x_f;
        prop_assert!(x3 <= x1 + 1e-4 * l, "{} -> {}", x1, x3);
    }

    #[test]
    fn optimum_satisfies_first_order_conditions(
        ta in 0.02..0.15f64, dd in 0.05..0.8f64, l in 5.0..15.0f64, pick in 0usize..5,
    ) {
        let (c, d, p) = reference_corridor(ta, dd, l);
        let policy = CapacityPolicy::default();
        let v = semiflex::default_catalog().swap_remove(pick);
        let sol = optimize_for_vehicle(&c, &d, &p, &v, &policy).unwrap();
        prop_assert!(sol.capacity_slack(&policy, 80.0) >= -1e-9);
        let cost = |x: f64, s: f64| semiflex::total_cost_variable(&c, &d, &p, &v, x, s).map(|b| b.total);
        let scale = sol.breakdown.total;
        let (x, s) = (sol.x_f, sol.fleet);
        let dx = 1e-5 * l;
        let ds = 1e-5 * s;
        let on_bound = (s - sol.fleet_lower_bound).abs() <= 1e-6 * s;
        if !on_bound {
            let gs = (cost(x, s + ds).unwrap() - cost(x, s - ds).unwrap()) / (2.0 * ds);
            prop_assert!(gs.abs() * s <= 1e-4 * scale, "d/ds {}", gs);
        } else {
            let gs = (cost(x, s + ds).unwrap() - cost(x, s).unwrap()) / ds;
            prop_assert!(gs * s >= -1e-4 * scale, "d/ds at bound {}", gs);
        }
        // moving x changes the bound, so probe along the bound when active
        let at = |y: f64| {
            let lb = semiflex::fleet_lower_bound(&c, &d, &policy, &v, y).unwrap();
            cost(y, if on_bound { lb } else { s.max(lb) }).unwrap()
        };
        if x < dx {
            prop_assert!((at(x + dx) - at(x)) / dx * l >= -1e-4 * scale);
        } else if x > l - dx {
            prop_assert!((at(x) - at(x - dx)) / dx * l <= 1e-4 * scale);
        } else {
            let gx = (at(x + dx) - at(x - dx)) / (2.0 * dx);
            prop_assert!(gx.abs() * l <= 1e-4 * scale, "d/dx {}", gx);
        }
    }
}

#[test]
fn ride_spread_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for demand in [
        DemandDistribution::uniform(80.0, 12.0).unwrap(),
        DemandDistribution::triangular(80.0, 12.0).unwrap(),
    ] {
        let c = Corridor::new(12.0, 30.0, 1.0 / 6.0, CrossSection::new(0.08, 0.5).unwrap()).unwrap();
        let x_f = 6.0;
        let h = 0.2;
        let m = service_metrics(&c, &demand, x_f, h).unwrap();
        let fx = demand.cumulative(x_f).unwrap();
        let k = h * 0.5 / 30.0;
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            // sample a passenger position through the quantile function
            let q: f64 = rng.gen_range(0.0..80.0);
            let x = demand.inverse_cumulative(q).unwrap();
            let ride = ((12.0 - x) / 30.0 + k * (fx - q).max(0.0)) * 60.0;
            s1 += ride;
            s2 += ride * ride;
        }
        let mean = s1 / n as f64;
        let sd = (s2 / n as f64 - mean * mean).sqrt();
        assert!((m.avg_ride - mean).abs() / mean < 1e-2, "{} vs {}", m.avg_ride, mean);
        assert!((m.std_ride - sd).abs() / sd < 2e-2, "{} vs {}", m.std_ride, sd);
    }
}

fn random_zones(seed: u64, n: usize, walk_minutes: f64) -> (Vec<Station>, Vec<DemandPoint>, PipelineConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations = (0..4)
        .map(|i| Station {
            id: format!("s{i}"),
            position: Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)),
        })
        .collect();
    let points = (0..n)
        .map(|i| DemandPoint {
            id: format!("m{i:05}"),
            position: Point2::new(rng.gen_range(-5.0..25.0), rng.gen_range(-5.0..25.0)),
            trips: rng.gen_range(0.0..8.0),
        })
        .collect();
    let cfg = PipelineConfig {
        max_access_time: walk_minutes / 60.0,
        ..PipelineConfig::default()
    };
    (stations, points, cfg)
}

#[test]
fn every_point_gets_one_label_and_flexible_serves_far_end() {
    let params = CostParams::new(16.5, 2.0, 1.5, 0.5, 12.0).unwrap();
    for (seed, k) in [(1, 1), (2, 3)] {
        let (stations, points, cfg) = random_zones(seed, 1500, 15.0);
        let cfg = PipelineConfig {
            max_corridors: k,
            ..cfg
        };
        let out = run_pipeline(&stations, &points, &params, &cfg).unwrap();
        let mut ids: Vec<&str> = out.assignments.iter().map(|a| a.point_id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), points.len());
        for c in &out.corridors {
            let members: Vec<_> = out
                .assignments
                .iter()
                .filter(|a| a.station_id == c.station_id && a.corridor_id == c.corridor_id)
                .collect();
            assert_eq!(members.len(), c.points);
            let max_flex = members
                .iter()
                .filter(|a| a.service == ServiceArea::Flexible)
                .map(|a| a.x_along_axis)
                .fold(f64::NEG_INFINITY, f64::max);
            let min_fixed = members
                .iter()
                .filter(|a| a.service == ServiceArea::Fixed)
                .map(|a| a.x_along_axis)
                .fold(f64::INFINITY, f64::min);
            assert!(
                max_flex <= min_fixed,
                "{} {}: {max_flex} > {min_fixed}",
                c.station_id,
                c.corridor_id
            );
            assert!(members.iter().all(|a| (0.0..=c.length).contains(&a.x_along_axis)));
        }
    }
}

#[test]
fn short_walks_keep_every_route_fixed() {
    // a uniform-width catchment fixes t_a/d at 3/(4 walk speed) = 0.1875 h/km;
    // vehicle costs this high lift the fixed-route threshold above it
    let params = CostParams::new(16.5, 2.0, 1.5, 0.5, 120.0).unwrap();
    let (stations, points, cfg) = random_zones(5, 800, 15.0);
    let out = run_pipeline(&stations, &points, &params, &cfg).unwrap();
    let s = summarize_case_study(&out.corridors, &params, cfg.headway, &cfg).unwrap();
    assert_eq!(s.flexible_area.points, 0);
    assert_eq!(s.routes_with_flexible_portion.routes, 0);
    let all = &s.all_feeders;
    assert_eq!(all.fixed_route.generalized_cost, all.semi_on_demand.generalized_cost);
}

#[test]
fn pipeline_output_ignores_input_order() {
    let params = CostParams::new(16.5, 2.0, 1.5, 0.5, 12.0).unwrap();
    let (mut stations, mut points, cfg) = random_zones(8, 1200, 15.0);
    let a = run_pipeline(&stations, &points, &params, &cfg).unwrap();
    stations.reverse();
    points.reverse();
    let b = run_pipeline(&stations, &points, &params, &cfg).unwrap();
    assert_eq!(a.assignments, b.assignments);
    let sa = summarize_case_study(&a.corridors, &params, cfg.headway, &cfg).unwrap();
    let sb = summarize_case_study(&b.corridors, &params, cfg.headway, &cfg).unwrap();
    assert_eq!(sa, sb);
}
