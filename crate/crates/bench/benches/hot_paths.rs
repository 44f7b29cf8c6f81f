use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use polyxport::kernels::{area_integral, area_integral_fast};
use polyxport::lattice::rotation_2d;
use polyxport::rng::{substream, uniform_box, uniform_sphere};
use polyxport::{
    AffineLattice, ConvexGrain, FlightProcess, Medium, MicroConfig, MicroScene, PeriodicBox,
    PolyKernel, SamplingRegime, ScaledGrainLattice, Scene, Vector,
};

type V2 = Vector<2>;

fn crystal(angle: f64) -> Medium<2> {
    Medium::Crystal(
        AffineLattice::integer(V2::new(0.31, 0.71))
            .rotated(&rotation_2d(angle))
            .unwrap(),
    )
}

fn two_squares() -> Scene<2> {
    let a = ConvexGrain::cuboid(0, &V2::new(0.0, 0.0), &V2::new(0.35, 0.35)).unwrap();
    let b = ConvexGrain::cuboid(1, &V2::new(0.35, 0.0), &V2::new(0.7, 0.35)).unwrap();
    Scene::new(
        vec![a, b],
        vec![crystal(std::f64::consts::FRAC_PI_6), crystal(1.2)],
        None,
        V2::zeros(),
    )
    .unwrap()
}

fn checkerboard() -> Scene<2> {
    let mut grains = Vec::new();
    let mut media = Vec::new();
    for (k, angle) in [0.3, 0.9, 1.4, 2.2].into_iter().enumerate() {
        let lo = V2::new(0.3 * (k % 2) as f64, 0.3 * (k / 2) as f64);
        grains.push(ConvexGrain::cuboid(k, &lo, &(lo + V2::repeat(0.3))).unwrap());
        media.push(crystal(angle));
    }
    let pb = PeriodicBox::new(V2::zeros(), V2::repeat(0.6)).unwrap();
    Scene::new(grains, media, Some(pb), V2::zeros()).unwrap()
}

fn tube_enumeration(c: &mut Criterion) {
    let lat = ScaledGrainLattice::new(
        AffineLattice::integer(V2::zeros())
            .rotated(&rotation_2d(0.4))
            .unwrap(),
        0.01,
        V2::zeros(),
    )
    .unwrap();
    let v = V2::new(0.6, 0.8);
    c.bench_function("points_in_tube eps=1e-2 len=1", |b| {
        b.iter(|| {
            lat.points_in_tube(black_box(&V2::new(0.003, 0.001)), &v, 0.0, 1.0, 1e-4)
                .unwrap()
                .len()
        })
    });
}

fn first_collision(c: &mut Criterion) {
    let scene = two_squares();
    for r in [1e-3, 1e-4] {
        let micro = MicroScene::new(
            &scene,
            &MicroConfig::new(r, 1).unwrap(),
            &V2::new(0.1, 0.15),
        )
        .unwrap();
        let mut rng = substream(5, 0);
        c.bench_function(&format!("first_collision two squares r={r}"), |b| {
            b.iter_batched(
                || {
                    (
                        uniform_box(&mut rng, &V2::zeros(), &V2::new(0.7, 0.35)),
                        uniform_sphere::<2, _>(&mut rng),
                    )
                },
                |(x, v)| micro.first_collision(&x, &v),
                BatchSize::SmallInput,
            )
        });
    }
}

fn area_function(c: &mut Criterion) {
    c.bench_function("G quadrature", |b| {
        b.iter(|| area_integral(black_box(0.37)).unwrap())
    });
    area_integral_fast(0.0);
    c.bench_function("G table", |b| {
        b.iter(|| area_integral_fast(black_box(0.37)))
    });
}

fn flight_evolution(c: &mut Criterion) {
    let process = FlightProcess::new(
        PolyKernel::new(checkerboard()).unwrap(),
        SamplingRegime::Auto,
    )
    .unwrap();
    let mut init = substream(9, 0);
    let mut rng = substream(9, 1);
    c.bench_function("flight evolve t=2.5 checkerboard", |b| {
        b.iter_batched(
            || {
                let x = uniform_box(&mut init, &V2::zeros(), &V2::repeat(0.6));
                process
                    .start(x, uniform_sphere(&mut init), &mut init)
                    .unwrap()
            },
            |s| process.evolve(&s, 2.5, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    tube_enumeration,
    first_collision,
    area_function,
    flight_evolution
);
criterion_main!(benches);
