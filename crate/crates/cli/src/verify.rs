//! Built-in self-checks against analytic answers.

use std::f64::consts::PI;

use flow_eval::calculus::{self, cell_l2_total, laplacian, momentum_residual};
use flow_eval::datasets::manufactured::{manufactured_sample, ManufacturedKind};
use flow_eval::datasets::rng::SplitRng;
use flow_eval::geometry::{sdf_from_mask, RegionMask};
use flow_eval::metrics::{m1, m2, m3};
use flow_eval::{score, EvalConfig, FlowField, GeometryMask, Grid, ScalarField, ScoreScale};

/// A deliberately broken component, to show the checks catch it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Forward differences in place of the second-order gradient.
    FirstOrderGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type GradientFn = fn(&ScalarField) -> (ScalarField, ScalarField);

struct Check {
    name: &'static str,
    run: fn(GradientFn) -> (bool, String),
}

const CHECKS: &[Check] = &[
    Check { name: "score-anchors", run: score_anchors },
    Check { name: "edt-exactness", run: edt_exactness },
    Check { name: "stencil-gradient-order", run: gradient_order },
    Check { name: "stencil-laplacian-order", run: laplacian_order },
    Check { name: "stencil-polynomial-exact", run: polynomial_exact },
    Check { name: "residual-integral", run: residual_integral },
    Check { name: "manufactured-disc", run: manufactured_disc },
    Check { name: "manufactured-shear-residual", run: manufactured_shear },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// Runs every check whose name contains `filter`.
pub fn run_checks(filter: Option<&str>, fault: Option<Fault>) -> Vec<CheckOutcome> {
    let gradient: GradientFn = match fault {
        None => calculus::gradient,
        Some(Fault::FirstOrderGradient) => forward_gradient,
    };
    CHECKS
        .iter()
        .filter(|c| filter.is_none_or(|f| c.name.contains(f)))
        .map(|c| {
            let (passed, detail) = (c.run)(gradient);
            CheckOutcome { name: c.name, passed, detail }
        })
        .collect()
}

fn forward_gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = *f.grid();
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    let v = f.values();
    let diff = |a: usize, b: usize| (v[b] - v[a]) / h;
    let mut fx = vec![0.0; g.len()];
    let mut fy = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            fx[k] = if i + 1 < nx { diff(k, k + 1) } else { diff(k - 1, k) };
            fy[k] = if j + 1 < ny { diff(k, k + nx) } else { diff(k - nx, k) };
        }
    }
    (ScalarField::new(g, fx).unwrap(), ScalarField::new(g, fy).unwrap())
}

fn score_anchors(_: GradientFn) -> (bool, String) {
    let scale = ScoreScale::default();
    let cases = [(1e-6, 100.0), (1.0, 0.0), (1e-3, 50.0), (1e-4, 200.0 / 3.0)];
    let worst = cases.iter().map(|&(m, s)| (score(m, scale) - s).abs()).fold(0.0, f64::max);
    (worst <= 1e-9, format!("max deviation {worst:.2e}"))
}

fn unit_float(rng: &mut SplitRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Union of a few random discs, in node units.
fn blob_mask(n: usize, rng: &mut SplitRng) -> GeometryMask {
    let grid = Grid::new(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let discs: Vec<(f64, f64, f64)> = (0..1 + rng.below(4))
        .map(|_| {
            let c = n as f64;
            (unit_float(rng) * c, unit_float(rng) * c, 1.0 + unit_float(rng) * c / 4.0)
        })
        .collect();
    let values = (0..n * n)
        .map(|k| {
            let (i, j) = ((k % n) as f64, (k / n) as f64);
            let inside = discs.iter().any(|&(cx, cy, r)| (i - cx).hypot(j - cy) <= r);
            if inside { GeometryMask::INSIDE } else { GeometryMask::OUTSIDE }
        })
        .collect();
    GeometryMask::new(grid, values).unwrap()
}

fn brute_force_sdf(mask: &GeometryMask) -> Vec<f64> {
    let g = mask.grid();
    let n = g.nx();
    let nodes: Vec<(i64, i64, bool)> =
        (0..g.len()).map(|k| ((k % n) as i64, (k / n) as i64, mask.is_inside(k))).collect();
    nodes
        .iter()
        .map(|&(i, j, inside)| {
            let d2 = nodes
                .iter()
                .filter(|q| q.2 != inside)
                .map(|&(a, b, _)| (a - i).pow(2) + (b - j).pow(2))
                .min()
                .unwrap();
            let d = ((d2 as f64).sqrt() - 0.5) * g.h();
            if inside { -d } else { d }
        })
        .collect()
}

fn edt_exactness(_: GradientFn) -> (bool, String) {
    let mut rng = SplitRng::new(2024);
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 20 {
        let mask = blob_mask(32, &mut rng);
        let Ok(sdf) = sdf_from_mask(&mask) else { continue };
        let oracle = brute_force_sdf(&mask);
        worst = sdf.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        tested += 1;
    }
    (worst <= 1e-12, format!("{tested} masks, max deviation {worst:.2e}"))
}

fn max_err(f: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    f.grid().coordinates().zip(f.values()).map(|((x, y), v)| (v - exact(x, y)).abs()).fold(0.0, f64::max)
}

fn sine(n: usize) -> ScalarField {
    ScalarField::from_fn(Grid::unit_square(n).unwrap(), |x, y| (PI * x).sin() * (PI * y).cos())
}

fn order_between(e: [f64; 2]) -> f64 {
    (e[0] / e[1]).log2()
}

fn gradient_order(gradient: GradientFn) -> (bool, String) {
    let errs = [65, 129].map(|n| {
        let (fx, fy) = gradient(&sine(n));
        max_err(&fx, |x, y| PI * (PI * x).cos() * (PI * y).cos())
            .max(max_err(&fy, |x, y| -PI * (PI * x).sin() * (PI * y).sin()))
    });
    let p = order_between(errs);
    ((1.9..=2.1).contains(&p), format!("order {p:.3} (max errors {:.2e}, {:.2e})", errs[0], errs[1]))
}

fn laplacian_order(_: GradientFn) -> (bool, String) {
    let errs = [65, 129].map(|n| max_err(&laplacian(&sine(n)), |x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).cos()));
    let p = order_between(errs);
    ((1.9..=2.1).contains(&p), format!("order {p:.3} (max errors {:.2e}, {:.2e})", errs[0], errs[1]))
}

fn polynomial_exact(gradient: GradientFn) -> (bool, String) {
    let g = Grid::new(9, 7, (-1.0, 1.0), (0.5, 2.0)).unwrap();
    let f = ScalarField::from_fn(g, |x, y| 3.0 * x * x - 2.0 * x * y + 0.5 * y * y + x - 4.0 * y + 7.0);
    let (fx, fy) = gradient(&f);
    let e = max_err(&fx, |x, y| 6.0 * x - 2.0 * y + 1.0)
        .max(max_err(&fy, |x, y| -2.0 * x + y - 4.0))
        .max(max_err(&laplacian(&f), |_, _| 7.0));
    (e <= 1e-12, format!("max deviation {e:.2e} including boundary nodes"))
}

fn residual_integral(_: GradientFn) -> (bool, String) {
    let m = [65, 257].map(|n| {
        let g = Grid::unit_square(n).unwrap();
        let flow = FlowField::from_fns(g, |x, _| x, |_, y| -y, |_, _| 0.0);
        let (rx, ry) = momentum_residual(&flow, 100.0).unwrap();
        let res = cell_l2_total(&rx, &ry, &RegionMask::all(g), 1).unwrap();
        res.r_total / (res.n_included() as f64 * g.cell_area())
    });
    let err = m.map(|v| (v - 2.0 / 3.0).abs());
    let rel = err[1] / (2.0 / 3.0);
    let p = (err[0] / err[1]).log2() / 2.0;
    (rel <= 0.01 && p >= 1.9, format!("m3 {:.6} at 257^2 (rel. error {rel:.2e}), order {p:.3}", m[1]))
}

fn manufactured_disc(_: GradientFn) -> (bool, String) {
    let config = EvalConfig::default();
    let grid = Grid::with_default_extents(257, 257).unwrap();
    let m = manufactured_sample(ManufacturedKind::RadialDisc, grid, 100.0, "disc").unwrap();
    let expected = m.expected_zero(&config).unwrap();
    let zero = FlowField::zeros(grid);
    let sdf = m.sample.sdf().unwrap();
    let got1 = m1(&zero, m.sample.truth(), sdf, &config).unwrap();
    let got2 = m2(&zero, m.sample.truth(), sdf, &config).unwrap();
    let r1 = (got1 - expected.m1).abs() / expected.m1;
    let r2 = (got2 - expected.m2).abs() / expected.m2;
    (
        r1 <= 5e-3 && r2 <= 5e-3 && got2 < got1,
        format!("m1 rel. error {r1:.2e}, m2 rel. error {r2:.2e}, m2 < m1: {}", got2 < got1),
    )
}

fn manufactured_shear(_: GradientFn) -> (bool, String) {
    let config = EvalConfig::default();
    let grid = Grid::with_default_extents(129, 129).unwrap();
    let m = manufactured_sample(ManufacturedKind::PolynomialShear { gamma: 1.0 }, grid, 50.0, "shear").unwrap();
    let r = m3(m.sample.truth(), 50.0, m.sample.sdf().unwrap(), &config).unwrap();
    (r <= 1e-10, format!("truth m3 {r:.2e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_by_substring() {
        let out = run_checks(Some("score"), None);
        assert_eq!(out.len(), 1);
        assert!(out[0].passed, "{}", out[0].detail);
    }

    #[test]
    fn first_order_fault_is_caught() {
        let out = run_checks(Some("gradient"), Some(Fault::FirstOrderGradient));
        assert!(!out[0].passed);
        let order: f64 = out[0].detail.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((0.8..1.2).contains(&order), "{}", out[0].detail);
    }
}
