//! Contrast sensitivity against the frozen oracle table in `common`.

mod common;

use common::{GOLDEN, RETINA_X0};
use proptest::prelude::*;
use stcsf::csf::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn sensitivity_matches_oracle() {
    let params = BartenParams::default();
    for &(u, w, l, x0, expected) in &GOLDEN {
        let s = csf(u, w, FieldGeometry::new(x0, l).unwrap(), &params).unwrap();
        assert!(
            rel(s, expected) < 1e-9,
            "S({u}, {w}; L={l}, X0={x0}) = {s}, oracle {expected}"
        );
    }
}

#[test]
fn submodels_match_oracle() {
    assert!(
        rel(
            pupil_diameter(150.0, RETINA_X0).unwrap(),
            2.9690419545217520668
        ) < 1e-12
    );
    assert!(
        rel(
            retinal_illuminance(100.0, 5.0).unwrap(),
            1493.6953590865335335
        ) < 1e-12
    );
}

#[test]
fn submodel_anchors() {
    let params = BartenParams::default();
    assert_eq!(optical_mtf(0.0, 3.0, &params), 1.0);
    assert_eq!(lateral_inhibition(0.0, params.u0), 1.0);
    assert_eq!(temporal_filter(0.0, 0.032, params.n1), 1.0);
    assert_eq!(temporal_filter(0.0, 0.018, params.n2), 1.0);
    assert!((pupil_diameter(1600.0, 1.0).unwrap() - 5.0).abs() < 1e-15);
    assert!((pupil_diameter(4.0, 20.0).unwrap() - 5.0).abs() < 1e-15);
}

#[test]
fn model_domain_is_enforced() {
    let params = BartenParams::default();
    assert!(FieldGeometry::new(0.0, 100.0).is_err());
    assert!(FieldGeometry::new(5.0, -1.0).is_err());
    let g = FieldGeometry::new(5.0, 100.0).unwrap();
    assert!(csf(-1.0, 0.0, g, &params).is_err());
    assert!(csf(1.0, -1.0, g, &params).is_err());
    assert!(detection_probability(-0.1, 10.0, 3.0).is_err());
}

#[test]
fn psychometric_threshold_and_floor() {
    assert!((detection_probability_unchecked(1.0, 3.0) - 0.5).abs() < 1e-12);
    assert!(
        rel(
            detection_probability_unchecked(0.0, 3.0),
            0.0013498980316300945267
        ) < 1e-9
    );
    assert!(
        rel(
            detection_probability(0.3, 2.0, 3.0).unwrap(),
            0.11506967022170826802
        ) < 1e-9
    );
}

#[test]
fn psychometric_monotone_on_grid() {
    let mut prev = -1.0;
    for i in 0..1000 {
        let ms = 3.0 * i as f64 / 999.0;
        let p = detection_probability_unchecked(ms, 3.0);
        assert!(p >= prev && (0.0..=1.0).contains(&p));
        prev = p;
    }
}

proptest! {
    #[test]
    fn sensitivity_is_finite_and_nonnegative(
        u in 0.0f64..60.0, w in 0.0f64..80.0, l in 0.1f64..2000.0, x0 in 0.5f64..60.0
    ) {
        let s = csf(u, w, FieldGeometry::new(x0, l).unwrap(), &BartenParams::default()).unwrap();
        prop_assert!(s.is_finite() && s >= 0.0);
    }

    #[test]
    fn detection_grows_with_modulation(m in 0.0f64..1.0, dm in 1e-6f64..0.5, s in 0.0f64..500.0) {
        let k = BartenParams::default().k_crozier;
        let lo = detection_probability(m, s, k).unwrap();
        let hi = detection_probability(m + dm, s, k).unwrap();
        prop_assert!(hi >= lo);
    }
}
