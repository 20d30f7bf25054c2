use flow_eval::geometry::{band_mask, mask_from_sdf, sdf_from_mask, sdf_from_mask_with};
use flow_eval::{GeometryMask, Grid};
use proptest::prelude::*;

/// All-pairs signed EDT in grid units, calibrated like the library.
fn brute_force(mask: &GeometryMask, calibrate: bool) -> Vec<f64> {
    let g = mask.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let offset = if calibrate { 0.5 } else { 0.0 };
    (0..nx * ny)
        .map(|k| {
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            let inside = mask.is_inside(k);
            let mut best = i64::MAX;
            for q in 0..nx * ny {
                if mask.is_inside(q) != inside {
                    let (a, b) = ((q % nx) as i64 - i, (q / nx) as i64 - j);
                    best = best.min(a * a + b * b);
                }
            }
            let d = ((best as f64).sqrt() - offset) * g.h();
            if inside { -d } else { d }
        })
        .collect()
}

fn masks() -> impl Strategy<Value = GeometryMask> {
    (3usize..14, 3usize..14)
        .prop_flat_map(|(nx, ny)| (Just((nx, ny)), proptest::collection::vec(0u8..2, nx * ny)))
        .prop_filter("both phases present", |(_, v)| v.contains(&0) && v.contains(&1))
        .prop_map(|((nx, ny), v)| {
            let g = Grid::new(nx, ny, (0.0, (nx - 1) as f64 * 0.1), (0.0, (ny - 1) as f64 * 0.1)).unwrap();
            GeometryMask::new(g, v).unwrap()
        })
}

proptest! {
    #[test]
    fn edt_matches_brute_force(mask in masks(), calibrate: bool) {
        let sdf = sdf_from_mask_with(&mask, calibrate).unwrap();
        for (a, b) in sdf.values().iter().zip(brute_force(&mask, calibrate)) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn sign_follows_mask_and_round_trips(mask in masks()) {
        let sdf = sdf_from_mask(&mask).unwrap();
        for (k, &d) in sdf.values().iter().enumerate() {
            prop_assert_eq!(d < 0.0, mask.is_inside(k));
        }
        prop_assert_eq!(mask_from_sdf(&sdf), mask);
    }

    #[test]
    fn bands_nest(mask in masks(), a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let sdf = sdf_from_mask(&mask).unwrap();
        let (lo, hi) = (a.min(b), a.max(b) + 1e-3);
        if let (Ok(narrow), Ok(wide)) = (band_mask(&sdf, lo, hi), band_mask(&sdf, lo, hi + 0.2)) {
            prop_assert!(narrow.is_subset_of(&wide));
        }
    }
}
