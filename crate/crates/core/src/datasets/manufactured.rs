//! Analytic samples with known metric values.
//!
//! Expected values are continuum means. Each node stands for the `h x h`
//! square around it, so the fluid region of a grid covers the extended
//! rectangle `[x0 - h/2, x1 + h/2] x [y0 - h/2, y1 + h/2]` and node averages
//! converge to means over that rectangle. The residual of the truth field
//! is integrated with the cell quadrature, which covers `[x0, x1] x [y0, y1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::config::EvalConfig;
use crate::flow::{Channel, FlowField, Sample, SignedDistanceField};
use crate::geometry::mask_from_sdf;
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ManufacturedKind {
    /// `u = gamma * y`, `v = p = 0` above a wall half a cell below the grid.
    /// Its discrete residual vanishes.
    PolynomialShear { gamma: f64 },
    /// Disc of radius `W/4` at the centre of a square domain; the swirl
    /// `(u, v) = max(d, 0) * (-(y - cy), x - cx) / r` vanishes on the disc.
    RadialDisc,
    /// `u = sin(pi x) sin(pi y)`, `v = cos(pi x) cos(pi y)`, `p = 0` above the
    /// same wall as the shear; divergence free with an analytic residual.
    ProductSine,
}

impl ManufacturedKind {
    pub fn name(&self) -> &'static str {
        match self {
            ManufacturedKind::PolynomialShear { .. } => "polynomial-shear",
            ManufacturedKind::RadialDisc => "radial-disc",
            ManufacturedKind::ProductSine => "product-sine",
        }
    }
}

/// Metric values expected for an all-zero prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expected {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub sample: Sample,
    pub kind: ManufacturedKind,
}

/// Domain averages of the squared truth channels, ordered u, v, p.
type ChannelMeans = [f64; 3];

impl Manufactured {
    fn grid(&self) -> &Grid {
        self.sample.grid()
    }

    /// Extended rectangle `(a_x, b_x, a_y, b_y)`.
    fn extended(&self) -> (f64, f64, f64, f64) {
        let g = self.grid();
        let e = g.h() / 2.0;
        (g.x0() - e, g.x1() + e, g.y0() - e, g.y1() + e)
    }

    /// Mean squares over the fluid region.
    pub fn fluid_means(&self) -> ChannelMeans {
        let (ax, bx, ay, by) = self.extended();
        match self.kind {
            ManufacturedKind::PolynomialShear { gamma } => {
                [gamma * gamma * mean_of_square(ay, by), 0.0, 0.0]
            }
            ManufacturedKind::RadialDisc => {
                let (a, b) = ((bx - ax) / 2.0, (by - ay) / 2.0);
                let r = disc_radius(self.grid());
                let d = a.hypot(b);
                let int_r2 = 4.0 / 3.0 * (a.powi(3) * b + a * b.powi(3));
                let int_r = 4.0 / 6.0
                    * (2.0 * a * b * d + a.powi(3) * ((b + d) / a).ln() + b.powi(3) * ((a + d) / b).ln());
                let int_disc = PI * r.powi(4) / 6.0;
                let area = 4.0 * a * b - PI * r * r;
                let s2 = (int_r2 - 2.0 * r * int_r + r * r * 4.0 * a * b - int_disc) / area;
                [s2 / 2.0, s2 / 2.0, 0.0]
            }
            ManufacturedKind::ProductSine => [
                simpson_mean(|x| (PI * x).sin().powi(2), ax, bx)
                    * simpson_mean(|y| (PI * y).sin().powi(2), ay, by),
                simpson_mean(|x| (PI * x).cos().powi(2), ax, bx)
                    * simpson_mean(|y| (PI * y).cos().powi(2), ay, by),
                0.0,
            ],
        }
    }

    /// Mean squares over the fluid part of the band `lo <= d <= hi`.
    pub fn band_means(&self, lo: f64, hi: f64) -> Result<ChannelMeans, DatasetError> {
        let (ax, bx, ay, by) = self.extended();
        let lo = lo.max(0.0);
        if !(lo < hi) {
            return Err(DatasetError::InvalidParameter(format!("empty band [{lo}, {hi}]")));
        }
        match self.kind {
            ManufacturedKind::PolynomialShear { gamma } => {
                let (y_lo, y_hi) = wall_band(ay, by, lo, hi)?;
                Ok([gamma * gamma * mean_of_square(y_lo, y_hi), 0.0, 0.0])
            }
            ManufacturedKind::RadialDisc => {
                let r = disc_radius(self.grid());
                if r + hi > (bx - ax) / 2.0 - self.grid().h() / 2.0 {
                    return Err(DatasetError::InvalidParameter(format!(
                        "band up to {hi} leaves the domain around a disc of radius {r}"
                    )));
                }
                // Annulus r + lo .. r + hi in polar coordinates, weight (t + r).
                let num = |t: f64| t.powi(4) / 4.0 + r * t.powi(3) / 3.0;
                let den = |t: f64| t * t / 2.0 + r * t;
                let s2 = (num(hi) - num(lo)) / (den(hi) - den(lo));
                Ok([s2 / 2.0, s2 / 2.0, 0.0])
            }
            ManufacturedKind::ProductSine => {
                let (y_lo, y_hi) = wall_band(ay, by, lo, hi)?;
                Ok([
                    simpson_mean(|x| (PI * x).sin().powi(2), ax, bx)
                        * simpson_mean(|y| (PI * y).sin().powi(2), y_lo, y_hi),
                    simpson_mean(|x| (PI * x).cos().powi(2), ax, bx)
                        * simpson_mean(|y| (PI * y).cos().powi(2), y_lo, y_hi),
                    0.0,
                ])
            }
        }
    }

    /// M1/M2/M3 of an all-zero prediction; M3 is zero because the zero field
    /// has no residual.
    pub fn expected_zero(&self, config: &EvalConfig) -> Result<Expected, DatasetError> {
        let channels = config.ordered_channels();
        let average = |means: ChannelMeans| {
            channels.iter().map(|&c| means[channel_slot(c)]).sum::<f64>() / channels.len() as f64
        };
        Ok(Expected {
            m1: average(self.fluid_means()),
            m2: average(self.band_means(config.band_lo, config.band_hi)?),
            m3: 0.0,
        })
    }

    /// Continuum M3 of the truth field, where it has a closed form.
    pub fn truth_m3(&self) -> Option<f64> {
        let g = self.grid();
        match self.kind {
            ManufacturedKind::PolynomialShear { .. } => Some(0.0),
            ManufacturedKind::RadialDisc => None,
            ManufacturedKind::ProductSine => {
                let eta = 1.0 / self.sample.re();
                let (a, b) = (PI / 2.0, 2.0 * PI * PI * eta);
                let ix = |f: &dyn Fn(f64) -> f64| simpson_mean(f, g.x0(), g.x1());
                let iy = |f: &dyn Fn(f64) -> f64| simpson_mean(f, g.y0(), g.y1());
                let s2 = |t: f64| (2.0 * PI * t).sin();
                let s = |t: f64| (PI * t).sin();
                let c = |t: f64| (PI * t).cos();
                let one = |_: f64| 1.0;
                let rx2 = a * a * ix(&|x| s2(x).powi(2)) * iy(&one)
                    + 2.0 * a * b * ix(&|x| s2(x) * s(x)) * iy(&s)
                    + b * b * ix(&|x| s(x).powi(2)) * iy(&|y| s(y).powi(2));
                let ry2 = a * a * ix(&one) * iy(&|y| s2(y).powi(2))
                    - 2.0 * a * b * ix(&c) * iy(&|y| s2(y) * c(y))
                    + b * b * ix(&|x| c(x).powi(2)) * iy(&|y| c(y).powi(2));
                Some(rx2 + ry2)
            }
        }
    }

    /// Pointwise analytic residual `(r_x, r_y)` for the product-sine field.
    pub fn analytic_residual(&self) -> Option<(ScalarField, ScalarField)> {
        if self.kind != ManufacturedKind::ProductSine {
            return None;
        }
        let eta = 1.0 / self.sample.re();
        let g = *self.grid();
        let rx = ScalarField::from_fn(g, |x, y| {
            PI / 2.0 * (2.0 * PI * x).sin() + 2.0 * PI * PI * eta * (PI * x).sin() * (PI * y).sin()
        });
        let ry = ScalarField::from_fn(g, |x, y| {
            -PI / 2.0 * (2.0 * PI * y).sin() + 2.0 * PI * PI * eta * (PI * x).cos() * (PI * y).cos()
        });
        Some((rx, ry))
    }
}

fn channel_slot(c: Channel) -> usize {
    match c {
        Channel::U => 0,
        Channel::V => 1,
        Channel::P => 2,
    }
}

fn disc_radius(g: &Grid) -> f64 {
    (g.x1() - g.x0()) / 4.0
}

/// Mean of `y^2` over `[a, b]`.
fn mean_of_square(a: f64, b: f64) -> f64 {
    (b.powi(3) - a.powi(3)) / (3.0 * (b - a))
}

/// `y` interval of the band above a wall at `a`, clipped to the top `b`.
fn wall_band(a: f64, b: f64, lo: f64, hi: f64) -> Result<(f64, f64), DatasetError> {
    let (y_lo, y_hi) = (a + lo, (a + hi).min(b));
    if y_lo >= y_hi {
        return Err(DatasetError::InvalidParameter(format!("band [{lo}, {hi}] lies above the domain")));
    }
    Ok((y_lo, y_hi))
}

/// Composite Simpson mean of `f` over `[a, b]`.
fn simpson_mean(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 4096;
    let h = (b - a) / N as f64;
    let mut acc = f(a) + f(b);
    for k in 1..N {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0 / (b - a)
}

/// Builds the analytic sample `kind` on `grid` at Reynolds number `re`.
pub fn manufactured_sample(
    kind: ManufacturedKind,
    grid: Grid,
    re: f64,
    id: impl Into<String>,
) -> Result<Manufactured, DatasetError> {
    let wall = |_: f64, y: f64| y - grid.y0() + grid.h() / 2.0;
    let (sdf, truth) = match kind {
        ManufacturedKind::PolynomialShear { gamma } => {
            if !gamma.is_finite() {
                return Err(DatasetError::InvalidParameter(format!("shear rate {gamma}")));
            }
            let sdf = SignedDistanceField::from_fn(grid, wall)?;
            let truth = FlowField::from_fns(grid, |_, y| gamma * y, |_, _| 0.0, |_, _| 0.0);
            (sdf, truth)
        }
        ManufacturedKind::RadialDisc => {
            let (w, hgt) = (grid.x1() - grid.x0(), grid.y1() - grid.y0());
            if (w - hgt).abs() > 1e-12 * w {
                return Err(DatasetError::InvalidParameter(format!(
                    "radial-disc needs a square domain, got {w} x {hgt}"
                )));
            }
            let (cx, cy) = ((grid.x0() + grid.x1()) / 2.0, (grid.y0() + grid.y1()) / 2.0);
            let r0 = w / 4.0;
            let swirl = move |x: f64, y: f64| {
                let r = (x - cx).hypot(y - cy);
                let s = (r - r0).max(0.0);
                if r > 0.0 { (s * -(y - cy) / r, s * (x - cx) / r) } else { (0.0, 0.0) }
            };
            let sdf = SignedDistanceField::from_fn(grid, |x, y| (x - cx).hypot(y - cy) - r0)?;
            let truth = FlowField::from_fns(
                grid,
                move |x, y| swirl(x, y).0,
                move |x, y| swirl(x, y).1,
                |_, _| 0.0,
            );
            (sdf, truth)
        }
        ManufacturedKind::ProductSine => {
            let sdf = SignedDistanceField::from_fn(grid, wall)?;
            let truth = FlowField::from_fns(
                grid,
                |x, y| (PI * x).sin() * (PI * y).sin(),
                |x, y| (PI * x).cos() * (PI * y).cos(),
                |_, _| 0.0,
            );
            (sdf, truth)
        }
    };
    let mask = mask_from_sdf(&sdf);
    let sample = Sample::new(id, re, Some(mask), Some(sdf), truth, None)?;
    Ok(Manufactured { sample, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus;
    use crate::metrics;

    fn zero_metrics(m: &Manufactured, config: &EvalConfig) -> (f64, f64) {
        let zero = FlowField::zeros(*m.sample.grid());
        let sdf = m.sample.sdf().unwrap();
        (
            metrics::m1(&zero, m.sample.truth(), sdf, config).unwrap(),
            metrics::m2(&zero, m.sample.truth(), sdf, config).unwrap(),
        )
    }

    #[test]
    fn shear_on_unit_square_tends_to_a_third() {
        let config = EvalConfig { channels: vec![Channel::U], ..EvalConfig::default() };
        let g = Grid::unit_square(401).unwrap();
        let m = manufactured_sample(ManufacturedKind::PolynomialShear { gamma: 2.0 }, g, 50.0, "s").unwrap();
        let e = m.expected_zero(&config).unwrap();
        assert!((e.m1 - 4.0 / 3.0).abs() < 1e-2);
        let (m1, _) = zero_metrics(&m, &config);
        // Node mean of y^2 is the midpoint rule on the extended interval.
        assert!((m1 - e.m1).abs() / e.m1 < 1e-5, "{m1} vs {}", e.m1);
    }

    #[test]
    fn shear_residual_vanishes() {
        let g = Grid::unit_square(17).unwrap();
        let m = manufactured_sample(ManufacturedKind::PolynomialShear { gamma: 3.0 }, g, 10.0, "s").unwrap();
        let (rx, ry) = calculus::momentum_residual(m.sample.truth(), 10.0).unwrap();
        assert!(rx.max_abs() < 1e-12 && ry.max_abs() < 1e-12);
        assert_eq!(m.truth_m3(), Some(0.0));
    }

    #[test]
    fn disc_means_match_node_averages() {
        let config = EvalConfig::default();
        let g = Grid::with_default_extents(257, 257).unwrap();
        let m = manufactured_sample(ManufacturedKind::RadialDisc, g, 100.0, "d").unwrap();
        let e = m.expected_zero(&config).unwrap();
        let (m1, m2) = zero_metrics(&m, &config);
        assert!((m1 - e.m1).abs() / e.m1 < 5e-3, "m1 {m1} vs {}", e.m1);
        assert!((m2 - e.m2).abs() / e.m2 < 5e-3, "m2 {m2} vs {}", e.m2);
        assert!(e.m2 < e.m1 && m2 < m1);
    }

    #[test]
    fn disc_fluid_mean_matches_quadrature() {
        // Independent 2D midpoint quadrature of max(r - R, 0)^2 over the
        // extended square, divided by the fluid area.
        let g = Grid::with_default_extents(33, 33).unwrap();
        let m = manufactured_sample(ManufacturedKind::RadialDisc, g, 1.0, "d").unwrap();
        let (a, b) = (-0.5 * g.h() - 1.0, 1.0 + 0.5 * g.h());
        let n = 3000;
        let step = (b - a) / n as f64;
        let (mut num, mut area) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = a + (i as f64 + 0.5) * step;
                let y = a + (j as f64 + 0.5) * step;
                let d = x.hypot(y) - 0.5;
                if d > 0.0 {
                    num += d * d;
                    area += 1.0;
                }
            }
        }
        let s2 = num / area;
        let means = m.fluid_means();
        assert!((means[0] + means[1] - s2).abs() / s2 < 1e-4, "{} vs {s2}", means[0] + means[1]);
    }

    #[test]
    fn disc_requires_square_domain() {
        let g = Grid::new(9, 5, (0.0, 2.0), (0.0, 1.0)).unwrap();
        assert!(matches!(
            manufactured_sample(ManufacturedKind::RadialDisc, g, 1.0, "d"),
            Err(DatasetError::InvalidParameter(_))
        ));
    }

    #[test]
    fn product_sine_residual_converges_to_analytic() {
        let mut errs = Vec::new();
        for n in [33, 65] {
            let g = Grid::unit_square(n).unwrap();
            let m = manufactured_sample(ManufacturedKind::ProductSine, g, 20.0, "p").unwrap();
            let (rx, ry) = calculus::momentum_residual(m.sample.truth(), 20.0).unwrap();
            let (ax, ay) = m.analytic_residual().unwrap();
            let err = rx
                .values()
                .iter()
                .zip(ax.values())
                .chain(ry.values().iter().zip(ay.values()))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order} from {errs:?}");
    }

    #[test]
    fn product_sine_truth_m3_matches_discrete() {
        let config = EvalConfig { exclusion_halo: 0, ..EvalConfig::default() };
        let g = Grid::unit_square(129).unwrap();
        let m = manufactured_sample(ManufacturedKind::ProductSine, g, 20.0, "p").unwrap();
        let got = metrics::m3(m.sample.truth(), 20.0, m.sample.sdf().unwrap(), &config).unwrap();
        let want = m.truth_m3().unwrap();
        assert!((got - want).abs() / want < 1e-2, "{got} vs {want}");
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        assert!((simpson_mean(|x| x.powi(3), 0.0, 2.0) - 2.0).abs() < 1e-12);
    }
}
