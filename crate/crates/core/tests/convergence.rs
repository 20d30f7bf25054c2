use std::f64::consts::PI;

use flow_eval::calculus::{cell_l2_total, derivative_error, gradient, laplacian, momentum_residual};
use flow_eval::geometry::RegionMask;
use flow_eval::{FlowField, Grid, ScalarField};

fn max_err(a: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    a.grid()
        .coordinates()
        .zip(a.values())
        .map(|((x, y), v)| (v - exact(x, y)).abs())
        .fold(0.0, f64::max)
}

fn order(coarse: f64, fine: f64, n_coarse: usize, n_fine: usize) -> f64 {
    (coarse / fine).ln() / ((n_fine - 1) as f64 / (n_coarse - 1) as f64).ln()
}

fn sine(n: usize) -> ScalarField {
    ScalarField::from_fn(Grid::unit_square(n).unwrap(), |x, y| (PI * x).sin() * (PI * y).cos())
}

#[test]
fn gradient_is_second_order_everywhere() {
    let errs: Vec<f64> = [65, 129]
        .iter()
        .map(|&n| {
            let (fx, fy) = gradient(&sine(n));
            max_err(&fx, |x, y| PI * (PI * x).cos() * (PI * y).cos())
                .max(max_err(&fy, |x, y| -PI * (PI * x).sin() * (PI * y).sin()))
        })
        .collect();
    let p = order(errs[0], errs[1], 65, 129);
    assert!((1.9..=2.1).contains(&p), "order {p}, errors {errs:?}");
}

#[test]
fn laplacian_is_second_order_everywhere() {
    let errs: Vec<f64> = [65, 129]
        .iter()
        .map(|&n| max_err(&laplacian(&sine(n)), |x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).cos()))
        .collect();
    let p = order(errs[0], errs[1], 65, 129);
    assert!((1.9..=2.1).contains(&p), "order {p}, errors {errs:?}");
}

#[test]
fn quadratics_are_exact_including_boundary() {
    let g = Grid::new(9, 7, (-1.0, 1.0), (0.5, 2.0)).unwrap();
    let f = ScalarField::from_fn(g, |x, y| 3.0 * x * x - 2.0 * x * y + 0.5 * y * y + x - 4.0 * y + 7.0);
    let (fx, fy) = gradient(&f);
    assert!(max_err(&fx, |x, y| 6.0 * x - 2.0 * y + 1.0) < 1e-12);
    assert!(max_err(&fy, |x, y| -2.0 * x + y - 4.0) < 1e-12);
    assert!(max_err(&laplacian(&f), |_, _| 7.0) < 1e-10);
}

fn stagnation_m3(n: usize) -> f64 {
    let g = Grid::unit_square(n).unwrap();
    let flow = FlowField::from_fns(g, |x, _| x, |_, y| -y, |_, _| 0.0);
    let (rx, ry) = momentum_residual(&flow, 100.0).unwrap();
    let res = cell_l2_total(&rx, &ry, &RegionMask::all(g), 1).unwrap();
    res.r_total / (res.n_included() as f64 * g.cell_area())
}

#[test]
fn residual_integral_converges_to_two_thirds() {
    let m = [65, 129, 257].map(stagnation_m3);
    let errs = m.map(|v| (v - 2.0 / 3.0).abs());
    assert!(errs[2] / (2.0 / 3.0) <= 0.01, "{m:?}");
    let p = order(errs[0], errs[2], 65, 257);
    assert!(p >= 1.9, "order {p}, errors {errs:?}");
}

#[test]
fn derivative_error_scales_with_perturbation_squared() {
    let g = Grid::unit_square(33).unwrap();
    let truth = FlowField::from_fns(g, |x, y| x * y, |x, _| x * x, |_, _| 0.0);
    let fluid = RegionMask::all(g);
    let totals: Vec<f64> = [1e-2, 2e-2]
        .iter()
        .map(|&eps| {
            let pred = FlowField::from_fns(
                g,
                move |x, y| x * y + eps * (PI * x).sin(),
                move |x, y| x * x + eps * (PI * y).cos(),
                |_, _| 0.0,
            );
            let d = derivative_error(&pred, &truth, &fluid, 0).unwrap();
            d.u_total + d.v_total
        })
        .collect();
    let ratio = totals[1] / totals[0];
    assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
}
