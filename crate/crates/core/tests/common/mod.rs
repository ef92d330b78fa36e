#![allow(dead_code)]

use iocc::geometry::{Area, DemandField, DemandSample, Point, Scenario};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn square_scenario(side: f64, k: usize) -> Scenario {
    Scenario {
        area: Area::Rectangle {
            width: side,
            height: side,
        },
        alpha: 3.0,
        d_min: 5.0,
        noise_power: 1e-9,
        shadow_sigma_db: 6.0,
        antennas_per_rau: 1,
        num_raus: k,
        sum_power: 1.0,
        delta: 0.0,
        demand: DemandField::LinearRamp {
            from: Point::new(0.0, 0.0),
            to: Point::new(side, side),
            from_value: 5.35,
            to_value: 3.45,
        },
    }
}

pub fn random_scenario(rng: &mut ChaCha8Rng, k: usize) -> Scenario {
    let mut s = square_scenario(rng.random_range(100.0..500.0), k);
    s.alpha = rng.random_range(2.0..5.0);
    s.d_min = rng.random_range(1.0..10.0);
    s.antennas_per_rau = rng.random_range(1..=3);
    s.delta = rng.random_range(0.0..0.5);
    s
}

pub fn random_points(rng: &mut ChaCha8Rng, area: &Area, n: usize) -> Vec<Point> {
    (0..n).map(|_| area.sample_uniform(rng)).collect()
}

pub fn samples_at(scenario: &Scenario, points: &[Point]) -> Vec<DemandSample> {
    points.iter().map(|x| scenario.demand_sample(*x).unwrap()).collect()
}
