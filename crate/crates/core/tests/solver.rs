use neighborspy_core::geo::LocalPoint;
use neighborspy_core::lbs_sim::quantize_distance;
use neighborspy_core::trilateration::{
    objective, solve_exact_three_circles, solve_least_squares, DistanceObservation, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng, half: f64) -> LocalPoint {
    LocalPoint::new(rng.random_range(-half..half), rng.random_range(-half..half))
}

fn spread(a: LocalPoint, b: LocalPoint, c: LocalPoint) -> f64 {
    ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs() / 2.0
}

#[test]
fn exact_round_trip_500() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut done = 0;
    while done < 500 {
        let victim = random_point(&mut rng, 5_000.0);
        let v = [0, 1, 2].map(|_| random_point(&mut rng, 5_000.0));
        if spread(v[0], v[1], v[2]) < 1e4 {
            continue;
        }
        let obs = v.map(|p| DistanceObservation::exact(p, p.distance_to(&victim)));
        let exact = solve_exact_three_circles(&obs).unwrap();
        let ls = solve_least_squares(&obs, SolverOptions::default()).unwrap();
        assert!(exact.distance_to(&victim) < 1e-3);
        assert!(ls.estimate.distance_to(&victim) < 1e-3, "{ls:?} vs {victim:?}");
        assert!(ls.converged);
        done += 1;
    }
}

/// On quantized instances the solver reaches the same objective value as a
/// 1 m grid search, up to the objective change a 2 m displacement can cause.
#[test]
fn quantized_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut done = 0;
    while done < 50 {
        let victim = random_point(&mut rng, 1_000.0);
        let v: Vec<LocalPoint> = (0..rng.random_range(3..=5))
            .map(|_| random_point(&mut rng, 2_000.0))
            .collect();
        if spread(v[0], v[1], v[2]) < 1e5 || v.iter().any(|p| p.distance_to(&victim) < 200.0) {
            continue;
        }
        let obs: Vec<_> = v
            .iter()
            .map(|p| DistanceObservation::quantized(*p, quantize_distance(p.distance_to(&victim), 100.0), 100.0))
            .collect();
        let ls = solve_least_squares(&obs, SolverOptions::default()).unwrap();

        let mut best = (f64::INFINITY, victim);
        for iy in -150..=150 {
            for ix in -150..=150 {
                let p = LocalPoint::new(victim.x.round() + ix as f64, victim.y.round() + iy as f64);
                let f = objective(p, &obs);
                if f < best.0 {
                    best = (f, p);
                }
            }
        }
        // Objective tolerance of a 2 m displacement: the largest increase on a
        // 2 m circle around the grid minimum.
        let tolerance = (0..16)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 16.0;
                objective(
                    LocalPoint::new(best.1.x + 2.0 * t.cos(), best.1.y + 2.0 * t.sin()),
                    &obs,
                ) - best.0
            })
            .fold(0.0, f64::max);
        let f = objective(ls.estimate, &obs);
        assert!(
            f <= best.0 + tolerance,
            "solver {f} grid {} tolerance {tolerance}",
            best.0
        );
        done += 1;
    }
}
