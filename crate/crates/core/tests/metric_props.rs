use flow_eval::calculus::{gradient, laplacian};
use flow_eval::metrics::{m1, m1_region, m2, m2_region, score};
use flow_eval::{
    evaluate_dataset, EvalConfig, FlowField, Grid, Sample, ScalarField, ScoreScale, SignedDistanceField,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid {
    Grid::unit_square(9).unwrap()
}

fn field(values: Vec<f64>) -> ScalarField {
    ScalarField::new(grid(), values).unwrap()
}

fn disc_sdf() -> SignedDistanceField {
    SignedDistanceField::from_fn(grid(), |x, y| (x - 0.5).hypot(y - 0.5) - 0.2).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, 81)
}

proptest! {
    #[test]
    fn stencils_are_linear(f in values(), g in values(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (f, g) = (field(f), field(g));
        let combo = f.zip_with(&g, |x, y| a * x + b * y).unwrap();
        let (cx, cy) = gradient(&combo);
        let (fx, fy) = gradient(&f);
        let (gx, gy) = gradient(&g);
        let (cl, fl, gl) = (laplacian(&combo), laplacian(&f), laplacian(&g));
        for k in 0..81 {
            let tol = 1e-9 * (1.0 + fl.values()[k].abs() + gl.values()[k].abs());
            prop_assert!((cx.values()[k] - (a * fx.values()[k] + b * gx.values()[k])).abs() < tol);
            prop_assert!((cy.values()[k] - (a * fy.values()[k] + b * gy.values()[k])).abs() < tol);
            prop_assert!((cl.values()[k] - (a * fl.values()[k] + b * gl.values()[k])).abs() < tol);
        }
    }

    #[test]
    fn mse_ignores_excluded_nodes(p in values(), t in values(), junk in values()) {
        let config = EvalConfig::default();
        let sdf = disc_sdf();
        let inside: Vec<bool> = sdf.values().iter().map(|&d| d <= 0.0).collect();
        let flow = |v: &[f64]| FlowField::new(field(v.to_vec()), field(v.to_vec()), field(v.to_vec())).unwrap();
        let scramble = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&junk).zip(&inside).map(|((&a, &j), &i)| if i { j } else { a }).collect()
        };
        let (pred, truth) = (flow(&p), flow(&t));
        let (pred2, truth2) = (flow(&scramble(&p)), flow(&scramble(&t)));
        prop_assert_eq!(m1(&pred, &truth, &sdf, &config).unwrap(), m1(&pred2, &truth2, &sdf, &config).unwrap());
        prop_assert_eq!(m2(&pred, &truth, &sdf, &config).unwrap(), m2(&pred2, &truth2, &sdf, &config).unwrap());
    }

    #[test]
    fn score_is_log_symmetric(e in -5.99f64..-0.01) {
        let scale = ScoreScale::default();
        let m = 10f64.powf(e);
        let mirrored = 1e-6 / m;
        prop_assert!((score(mirrored, scale) - (100.0 - score(m, scale))).abs() < 1e-9);
    }
}

#[test]
fn m2_region_nests_in_m1_region() {
    let sdf = disc_sdf();
    let m2r = m2_region(&sdf, &EvalConfig::default()).unwrap();
    assert!(m2r.is_subset_of(&m1_region(&sdf)));
}

fn random_samples(n: usize) -> (Vec<FlowField>, Vec<Sample>) {
    let g = Grid::unit_square(33).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut preds = Vec::new();
    let mut samples = Vec::new();
    for k in 0..n {
        let (cx, cy, r) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7), rng.random_range(0.05..0.2));
        let sdf = SignedDistanceField::from_fn(g, |x, y| (x - cx).hypot(y - cy) - r).unwrap();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let truth = FlowField::from_fns(g, move |x, y| a * x * y, move |x, _| b * x, move |x, y| x - y);
        let noise: Vec<f64> = (0..3 * g.len()).map(|_| rng.random_range(-0.1..0.1)).collect();
        let pred = FlowField::new(
            ScalarField::new(g, truth.u().values().iter().zip(&noise).map(|(t, e)| t + e).collect()).unwrap(),
            ScalarField::new(g, truth.v().values().iter().zip(&noise[g.len()..]).map(|(t, e)| t + e).collect())
                .unwrap(),
            ScalarField::new(g, truth.p().values().iter().zip(&noise[2 * g.len()..]).map(|(t, e)| t + e).collect())
                .unwrap(),
        )
        .unwrap();
        samples.push(Sample::new(format!("r{k}"), rng.random_range(10.0..1000.0), None, Some(sdf), truth, None).unwrap());
        preds.push(pred);
    }
    (preds, samples)
}

#[test]
fn dataset_report_is_thread_count_independent() {
    let (preds, samples) = random_samples(24);
    let config = EvalConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate_dataset(&preds, &samples, &config).unwrap())
    };
    let one = run(1);
    for threads in [2, 8] {
        assert!(one.bit_identical(&run(threads)));
    }
}
