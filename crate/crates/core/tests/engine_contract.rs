use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zndisc::ap::{max_ap_discrepancy, Coloring};
use zndisc::constructions::hereditary_coloring;
use zndisc::engine::{
    certify, full_color_iterate, partial_color, BlockFamily, DeltaSchedule, EngineConfig,
    PartialColorRequest, ScheduleKind,
};
use zndisc::ntheory::ZnContext;

fn random_subset(rng: &mut ChaCha8Rng, n: u64) -> Vec<u64> {
    let p = rng.gen_range(0.1..=1.0);
    let x: Vec<u64> = (0..n).filter(|_| rng.gen_bool(p)).collect();
    if x.is_empty() {
        vec![rng.gen_range(0..n)]
    } else {
        x
    }
}

#[test]
fn returned_partial_colorings_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..150 {
        let n = rng.gen_range(1..=300u64);
        let x = random_subset(&mut rng, n);
        let ctx = ZnContext::new(n).unwrap();
        let schedule = if rng.gen() {
            DeltaSchedule::main(n)
        } else {
            DeltaSchedule::hereditary(&ctx, 6.0).unwrap()
        };
        let cfg = EngineConfig { seed: rng.gen(), kappa: rng.gen_range(1.0..4.0), ..Default::default() };
        let req = PartialColorRequest::new(BlockFamily::new(n, &x).unwrap(), &schedule, &cfg);
        let chi = partial_color(&req).unwrap();
        certify(&req, &chi).unwrap();
        assert!(chi.colored_count() >= x.len().div_ceil(10));
        assert!(chi.support().iter().all(|v| x.binary_search(v).is_ok()));
    }
}

#[test]
fn uncolored_part_shrinks_geometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.gen_range(2..=500u64);
        let x = random_subset(&mut rng, n);
        let ctx = ZnContext::new(n).unwrap();
        let out = full_color_iterate(&ctx, &x, &EngineConfig { seed: rng.gen(), ..Default::default() }).unwrap();
        for r in &out.rounds {
            let bound = 0.9f64.powi(r.iteration as i32) * x.len() as f64;
            assert!(r.uncolored_before as f64 <= bound + 1e-9);
        }
        assert_eq!(out.coloring.support(), x);
    }
}

#[test]
fn same_seed_same_request_same_coloring() {
    let n = 210u64;
    let x: Vec<u64> = (0..n).filter(|v| v % 4 != 1).collect();
    let make = |seed| {
        let cfg = EngineConfig { seed, ..Default::default() };
        let req = PartialColorRequest::new(BlockFamily::new(n, &x).unwrap(), &DeltaSchedule::main(n), &cfg);
        partial_color(&req).unwrap()
    };
    assert_eq!(make(9), make(9));
}

#[test]
fn hereditary_coloring_colors_exactly_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = rng.gen_range(2..=400u64);
        let ctx = ZnContext::new(n).unwrap();
        let x = random_subset(&mut rng, n);
        let out = hereditary_coloring(&ctx, &x, &EngineConfig { seed: rng.gen(), ..Default::default() }).unwrap();
        assert_eq!(out.coloring.support(), x);
        let phi = ctx.phi() as usize;
        for r in &out.rounds {
            let want = if r.uncolored_before > phi { ScheduleKind::Hereditary } else { ScheduleKind::Main };
            assert_eq!(r.kind, want);
        }
    }
}

// Coloring X with the engine beats coloring it at random only on average, so
// just check against the trivial bound |X|.
#[test]
fn restricted_discrepancy_is_sane() {
    let ctx = ZnContext::new(128).unwrap();
    let x: Vec<u64> = (0..128).filter(|v| v % 3 == 0).collect();
    let out = full_color_iterate(&ctx, &x, &EngineConfig::default()).unwrap();
    let t = max_ap_discrepancy(&out.coloring).value;
    assert!(t >= 1 && t < x.len() as u64);
    assert_eq!(max_ap_discrepancy(&Coloring::empty(128)).value, 0);
}
