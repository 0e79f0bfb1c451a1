use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neighborspy_core::geo::LocalPoint;
use neighborspy_core::kyoto;
use neighborspy_core::region::{rasterize_intersection, Annulus};
use neighborspy_core::scenario::{AttackSpec, PopulationArea};
use neighborspy_core::trilateration::{solve_least_squares, DistanceObservation, SolverOptions};

fn rasterize(c: &mut Criterion) {
    let annuli = [
        Annulus::new(LocalPoint::new(0.0, 0.0), 800.0, 900.0),
        Annulus::new(LocalPoint::new(1_200.0, 100.0), 700.0, 800.0),
        Annulus::new(LocalPoint::new(400.0, 1_100.0), 650.0, 750.0),
    ];
    let mut group = c.benchmark_group("rasterize_intersection");
    for cell in [1.0, 2.0, 4.0] {
        group.bench_with_input(BenchmarkId::from_parameter(cell), &cell, |b, &cell| {
            b.iter(|| rasterize_intersection(black_box(&annuli), cell, None))
        });
    }
    group.finish();
}

fn least_squares(c: &mut Criterion) {
    let victim = LocalPoint::new(120.0, -340.0);
    let obs: Vec<_> = [(0.0, 0.0), (1_500.0, 200.0), (300.0, -1_700.0), (-900.0, -600.0)]
        .iter()
        .map(|&(x, y)| {
            let v = LocalPoint::new(x, y);
            DistanceObservation::quantized(v, (v.distance_to(&victim) / 100.0).round() * 100.0, 100.0)
        })
        .collect();
    c.bench_function("solve_least_squares/4_quantized", |b| {
        b.iter(|| solve_least_squares(black_box(&obs), SolverOptions::default()))
    });
}

fn proximity_query(c: &mut Criterion) {
    let mut group = c.benchmark_group("proximity_query");
    for count in [100, 1_000, 10_000] {
        let mut s = kyoto::demo_scenario(AttackSpec::NeighborBound {});
        let pop = s.population.as_mut().unwrap();
        pop.count = count;
        pop.area = PopulationArea::Box {
            center: kyoto::VICTIM,
            width_m: 10_000.0,
        };
        let world = s.materialize().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(count), &world, |b, world| {
            b.iter(|| world.server.proximity_query(black_box(kyoto::A1), 0))
        });
    }
    group.finish();
}

fn kyoto_attacks(c: &mut Criterion) {
    let mut group = c.benchmark_group("kyoto_demo");
    for attack in kyoto::demo_attacks() {
        let s = kyoto::demo_scenario(attack);
        group.bench_function(attack.name(), |b| b.iter(|| s.run().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, rasterize, least_squares, proximity_query, kyoto_attacks);
criterion_main!(benches);
