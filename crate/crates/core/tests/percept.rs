use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

use stcsf::csf::{csf, BartenParams, FieldGeometry};
use stcsf::percept::*;
use stcsf::stackgen::{
    generate_background, normalize_to_display, Dims, ImageStack, ViewingConditions,
};

fn small() -> Dims {
    Dims::new(8, 8, 8).unwrap()
}

fn displayed(dims: Dims, seed: u64, vc: &ViewingConditions) -> ImageStack {
    normalize_to_display(&generate_background(dims, 3.0, seed).unwrap(), vc).unwrap()
}

fn direct_dft(data: &[f64], d: Dims, sign: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); d.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let (kx, ky, kt) = d.coords(k);
        for (n, &v) in data.iter().enumerate() {
            let (x, y, t) = d.coords(n);
            let phase = sign
                * 2.0
                * PI
                * ((kx * x) as f64 / d.nx as f64
                    + (ky * y) as f64 / d.ny as f64
                    + (kt * t) as f64 / d.nt as f64);
            *o += v * Complex64::from_polar(1.0, phase);
        }
    }
    out
}

fn folded(k: usize, n: usize) -> f64 {
    k.min(n - k) as f64 / n as f64
}

/// PM written as a plain per-bin loop over a direct DFT.
fn reference_pm(stack: &ImageStack, vc: &ViewingConditions) -> Vec<f64> {
    let d = stack.dims();
    let n = d.len() as f64;
    let spec = direct_dft(stack.data(), d, -1.0);
    let mean = spec[0].re / n;
    let params = BartenParams::default();
    let geometry = FieldGeometry::new(d.nx as f64 / vc.ssr, mean).unwrap();
    let mut out = spec.clone();
    for k in 1..d.len() {
        let (kx, ky, kt) = d.coords(k);
        let self_conjugate = [(kx, d.nx), (ky, d.ny), (kt, d.nt)]
            .iter()
            .all(|&(i, len)| i == 0 || 2 * i == len);
        let c = if self_conjugate { 1.0 } else { 2.0 };
        let m = c * spec[k].norm() / (n * mean);
        let u = (folded(kx, d.nx) * vc.ssr).hypot(folded(ky, d.ny) * vc.ssr);
        let w = folded(kt, d.nt) * vc.browse_speed;
        let s = csf(u, w, geometry, &params).unwrap();
        let p =
            0.5 + 0.5 * statrs::function::erf::erf(params.k_crozier * (m * s - 1.0) / 2f64.sqrt());
        let phase = if self_conjugate {
            Complex64::new(spec[k].re.signum(), 0.0)
        } else {
            spec[k] / spec[k].norm()
        };
        out[k] = phase * (p * n * mean / c);
    }
    inverse_direct(&out, d)
}

fn inverse_direct(spec: &[Complex64], d: Dims) -> Vec<f64> {
    let n = d.len() as f64;
    (0..d.len())
        .map(|i| {
            let (x, y, t) = d.coords(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in spec.iter().enumerate() {
                let (kx, ky, kt) = d.coords(k);
                let phase = 2.0
                    * PI
                    * ((kx * x) as f64 / d.nx as f64
                        + (ky * y) as f64 / d.ny as f64
                        + (kt * t) as f64 / d.nt as f64);
                acc += c * Complex64::from_polar(1.0, phase);
            }
            acc.re / n
        })
        .collect()
}

#[test]
fn pm_matches_scalar_reference() {
    let vc = ViewingConditions::default();
    let stack = displayed(small(), 5, &vc);
    let fast = perceive(&stack, PerceptMethod::Pm, &vc).unwrap();
    let slow = reference_pm(&stack, &vc);
    let scale = slow.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (a, b) in fast.data().iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
    }
}

#[test]
fn forward_is_unnormalized_dft_and_parseval_holds() {
    let d = small();
    let stack = displayed(d, 2, &ViewingConditions::default());
    let spec = forward(&stack);
    let direct = direct_dft(stack.data(), d, -1.0);
    for (a, b) in spec.coeffs.iter().zip(&direct) {
        assert!((a - b).norm() < 1e-9);
    }
    let energy: f64 = stack.data().iter().map(|v| v * v).sum();
    let spectral: f64 = spec.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / d.len() as f64;
    assert!((energy - spectral).abs() < 1e-10 * energy);
    let (back, residue) = inverse(&spec);
    assert!(residue < 1e-12);
    for (a, b) in back.iter().zip(stack.data()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn lf_is_linear_for_a_fixed_sensitivity() {
    let d = Dims::new(16, 16, 8).unwrap();
    let vc = ViewingConditions::default();
    let a = displayed(d, 3, &vc);
    let b = displayed(d, 4, &vc);
    let csf_model = Perceiver::new(d, BartenParams::default())
        .unwrap()
        .csf_for(100.0, &vc)
        .unwrap();
    let grid = SensitivityGrid::build(
        d,
        &FrequencyMap::new(d, vc.ssr, vc.browse_speed),
        &csf_model,
    );
    let filtered = |data: Vec<f64>| {
        let mut spec = forward(&a.with_data(data).unwrap());
        apply_lf(&mut spec, &grid);
        inverse(&spec).0
    };
    let (alpha, beta) = (0.7, -1.9);
    let mix: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    let lhs = filtered(mix);
    let fa = filtered(a.data().to_vec());
    let fb = filtered(b.data().to_vec());
    for i in 0..lhs.len() {
        let rhs = alpha * fa[i] + beta * fb[i];
        assert!((lhs[i] - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
    }
}

#[test]
fn pm_is_not_linear() {
    let d = Dims::new(16, 16, 8).unwrap();
    let vc = ViewingConditions::default();
    let base = displayed(d, 6, &vc);
    // same mean, doubled fluctuations
    let mean = base.mean();
    let doubled = base
        .with_data(
            base.data()
                .iter()
                .map(|v| mean + 2.0 * (v - mean))
                .collect(),
        )
        .unwrap();
    let p1 = perceive(&base, PerceptMethod::Pm, &vc).unwrap();
    let p2 = perceive(&doubled, PerceptMethod::Pm, &vc).unwrap();
    let gap = p1
        .data()
        .iter()
        .zip(p2.data())
        .map(|(a, b)| ((b - mean) - 2.0 * (a - mean)).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1.0, "PM behaved linearly (max deviation {gap})");
}

#[test]
fn mc_is_reproducible_from_its_seed() {
    let d = Dims::new(16, 16, 8).unwrap();
    let vc = ViewingConditions::default();
    let s = displayed(d, 8, &vc);
    let a = perceive(&s, PerceptMethod::Mc { seed: 11 }, &vc).unwrap();
    let b = perceive(&s, PerceptMethod::Mc { seed: 11 }, &vc).unwrap();
    let c = perceive(&s, PerceptMethod::Mc { seed: 12 }, &vc).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn two_frequency_excitation_modulation_depends_only_on_contrast() {
    let d = Dims::new(16, 16, 8).unwrap();
    let (k1, k2) = ((2, 0, 0), (1, 3, 2));
    for l_max in [100.0, 800.0] {
        let c = 200.0;
        let l_min = l_max / c;
        let data = (0..d.len())
            .map(|i| {
                let (x, y, t) = d.coords(i);
                let phase = |k: (usize, usize, usize)| {
                    2.0 * PI
                        * ((k.0 * x) as f64 / d.nx as f64
                            + (k.1 * y) as f64 / d.ny as f64
                            + (k.2 * t) as f64 / d.nt as f64)
                };
                (2.0 + phase(k1).cos() + phase(k2).cos()) / 4.0 * (l_max - l_min) + l_min
            })
            .collect();
        let s = ImageStack::new(data, d, stcsf::stackgen::Label::Absent, 0).unwrap();
        let spec = forward(&s);
        for k in [k1, k2] {
            let m = modulation(&spec, k).unwrap();
            assert!(
                (m - 0.49502487562189054726).abs() < 1e-12,
                "m = {m} at L_max {l_max}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn perceived_stacks_are_real_with_the_input_mean(
        seed in any::<u64>(),
        method in 0usize..3,
        contrast in 2.0f64..1000.0,
        browse_speed in 1.0f64..100.0,
    ) {
        let vc = ViewingConditions { contrast, browse_speed, ..Default::default() };
        let s = displayed(Dims::new(16, 16, 8).unwrap(), seed, &vc);
        let method = [PerceptMethod::Lf, PerceptMethod::Pm, PerceptMethod::Mc { seed }][method];
        let out = perceive(&s, method, &vc).unwrap();
        prop_assert!((out.mean() - s.mean()).abs() <= 1e-12 * s.mean());
        let spec = forward(&out);
        prop_assert!(spec.hermitian_defect() < 1e-9);
    }
}
