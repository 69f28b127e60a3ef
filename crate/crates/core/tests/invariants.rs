//! Property tests for the model, geometry and kernel invariants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};
use trace_lab::geometry::{
    apply_rotation, cal_d, cal_d_with_basis, check_transversality, fixed_locus, kernel_basis, moment_map, psi2, Pole,
};
use trace_lab::kernels::{smoothed_projector_diag, trace_ft, Cutoff, Tolerance};
use trace_lab::model::spectral_order;
use trace_lab::quadrature::gauss_legendre;
use trace_lab::special::phase_mod_2pi;
use trace_lab::{PointM, SpectralPoint, ToricModel};

fn models() -> [ToricModel; 3] {
    [ToricModel::cp1(), ToricModel::augmented_cp1(), ToricModel::cp1_cp1()]
}

fn model_strategy() -> impl Strategy<Value = ToricModel> {
    (0usize..3).prop_map(|i| models()[i].clone())
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// A direction whose ray meets the model's polytope at moment point `s`.
fn direction_through(model: &ToricModel, s: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = model.shifts().iter().zip(s).map(|(&a, &x)| a as f64 + x).collect();
    phi.extend_from_slice(model.constants());
    unit(&phi)
}

fn all_offsets(d: usize, level: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out.into_iter().flat_map(|k| (0..=level).map(move |x| [k.clone(), vec![x]].concat())).collect();
    }
    out
}

fn brute_spectrum(model: &ToricModel, center: &[f64], radius: f64) -> Vec<SpectralPoint> {
    let norm = center.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for level in 0..=(norm + radius + 1.0).ceil() as u64 {
        for k in all_offsets(model.d, level) {
            let lam = model.joint_eigenvalue(level, &k).unwrap();
            let dist = lam.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt();
            if dist <= radius {
                out.push(SpectralPoint { level, offsets: k, eigenvalue: lam });
            }
        }
    }
    out.sort_by(spectral_order);
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn level_normalization(model in model_strategy(), level in 0u64..=200, s in prop::collection::vec(0.0f64..=1.0, 2)) {
        let point = PointM::new(s[..model.d].to_vec()).unwrap();
        let brute = model.level_diagonal_sum_brute(level, &point).unwrap();
        let want = ((level + 1) as f64 / PI).powi(model.d as i32);
        prop_assert!((brute / want - 1.0).abs() < 1e-12, "level {} sum {} want {}", level, brute, want);
    }

    #[test]
    fn amplitude_vanishes_only_on_pole_mismatch(
        model in model_strategy(),
        level in 0u64..60,
        raw in prop::collection::vec((0u8..3, 0.0f64..=1.0, 0.0f64..=1.0), 2),
    ) {
        // snap some coordinates onto the poles so the mismatch rule gets exercised
        let s: Vec<f64> = raw[..model.d].iter().map(|&(kind, x, _)| match kind { 0 => 0.0, 1 => 1.0, _ => x }).collect();
        let k: Vec<u64> = raw[..model.d].iter().map(|&(_, _, u)| (u * level as f64).round() as u64).collect();
        let point = PointM::new(s.clone()).unwrap();
        let amp = model.diagonal_amplitude(level, &k, &point).unwrap();
        let mismatch = s.iter().zip(&k).any(|(&x, &ki)| (x == 0.0 && ki != 0) || (x == 1.0 && ki != level));
        prop_assert!(amp >= 0.0);
        prop_assert_eq!(amp == 0.0, mismatch, "amp {} at s={:?} k={:?}", amp, s, k);
    }

    #[test]
    fn spectrum_enumeration_matches_brute_force(
        model in model_strategy(),
        t in 0.0f64..25.0,
        jitter in prop::collection::vec(-2.0f64..2.0, 2),
        radius in 0.0f64..4.0,
    ) {
        let dir = direction_through(&model, &vec![0.5; model.d]);
        let center: Vec<f64> = dir.iter().zip(jitter.iter().chain([0.0; 2].iter())).map(|(b, j)| t * b + j).collect();
        let mut fast = model.enumerate_spectrum(&center, radius).unwrap();
        fast.sort_by(spectral_order);
        prop_assert_eq!(fast, brute_spectrum(&model, &center, radius));
    }

    #[test]
    fn meridian_steps_add(s in 0.0f64..=1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let model = ToricModel::cp1();
        let theta = s.sqrt().asin();
        // both steps stay inside the chart [0, pi/2] for the angle
        let total = -theta + u * FRAC_PI_2;
        let h1 = -theta + v * FRAC_PI_2;
        let h2 = total - h1;
        let p = PointM::new(vec![s]).unwrap();
        let two = model.meridian_point(0, &model.meridian_point(0, &p, h1).unwrap(), h2).unwrap();
        let one = model.meridian_point(0, &p, total).unwrap();
        prop_assert!((two.s[0] - one.s[0]).abs() < 1e-12);
    }

    #[test]
    fn moment_direction_pairs_to_norm(model in model_strategy(), s in prop::collection::vec(0.0f64..=1.0, 2)) {
        let m = moment_map(&model, &PointM::new(s[..model.d].to_vec()).unwrap());
        let pair: f64 = m.phi.iter().zip(&m.xi).map(|(a, b)| a * b).sum();
        let xi_norm = m.xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((pair - m.norm).abs() < 1e-12 * m.norm);
        prop_assert!((xi_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_ignores_kernel_basis_choice(
        s in prop::collection::vec(0.05f64..0.95, 3),
        mix in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let model = ToricModel::new(&[1, 2, 3], &[1.0]).unwrap();
        let point = PointM::new(s).unwrap();
        let basis = kernel_basis(&model, &point);
        let q = DMatrix::from_row_slice(3, 3, &mix).qr().q();
        let remixed = &basis * q;
        let a = cal_d(&model, &point).unwrap();
        let b = cal_d_with_basis(&model, &point, &remixed).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn psi2_real_part_is_negative_definite(
        v in prop::collection::vec(-3.0f64..3.0, 4),
        w in prop::collection::vec(-3.0f64..3.0, 4),
        angles in prop::collection::vec(-PI..PI, 2),
    ) {
        let q = psi2(&v, &w).unwrap();
        prop_assert!(q.re <= 0.0);
        prop_assert_eq!(psi2(&v, &v).unwrap().re, 0.0);
        if v != w {
            prop_assert!(q.re < 0.0);
        }
        let rv = apply_rotation(&angles, &v).unwrap();
        let rw = apply_rotation(&angles, &w).unwrap();
        let rq = psi2(&rv, &rw).unwrap();
        prop_assert!((rq.re - q.re).abs() < 1e-12 * (1.0 + q.re.abs()));
    }

    #[test]
    fn phase_rule_agrees_with_spectrum(
        model in model_strategy(),
        draws in prop::collection::vec((0u8..3, -3i32..=3, 0.0f64..(2.0 * PI)), 2),
    ) {
        let s0: Vec<f64> = (0..model.r)
            .map(|i| {
                let (kind, m, g) = draws[i];
                let unit = if i < model.d { 2.0 * PI } else { 2.0 * PI / model.constants()[i - model.d] };
                match kind {
                    0 => unit * m as f64,
                    1 => unit * (m as f64 + 0.5),
                    _ => g,
                }
            })
            .collect();
        let info = fixed_locus(&model, &s0).unwrap();
        for c in &info.components {
            // a point of the component: poles where pinned, the middle elsewhere
            let s: Vec<f64> = c.poles.iter().map(|p| p.map_or(0.5, Pole::value)).collect();
            let point = PointM::new(s).unwrap();
            let mut worst: f64 = 0.0;
            for level in 0..=50u64 {
                for k in all_offsets(model.d, level) {
                    if model.diagonal_amplitude(level, &k, &point).unwrap() > 0.0 {
                        let lam = model.joint_eigenvalue(level, &k).unwrap();
                        worst = worst.max(phase_mod_2pi(&lam, &s0).abs());
                    }
                }
            }
            if c.phase_ok {
                prop_assert!(worst < 1e-9, "phase_ok component {:?} at s0={:?} has phase {}", c.poles, s0, worst);
            } else {
                prop_assert!(worst > 1e-9, "rejected component {:?} at s0={:?} is trivial", c.poles, s0);
            }
        }
    }

    #[test]
    fn transversality_margin_is_continuous(pick in 0usize..2, s1 in 0.1f64..0.9, dir in prop::collection::vec(-1.0f64..1.0, 2)) {
        let model = [ToricModel::augmented_cp1(), ToricModel::cp1_cp1()][pick].clone();
        let s = if pick == 0 { vec![s1] } else { vec![s1, 0.0] };
        let beta = direction_through(&model, &s);
        let nudge = unit(&dir);
        let moved = unit(&beta.iter().zip(&nudge).map(|(b, n)| b + 1e-6 * n).collect::<Vec<_>>());
        let (a, b) = (check_transversality(&model, &beta), check_transversality(&model, &moved));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.margin - b.margin).abs() <= 1e-3, "margins {} and {}", a.margin, b.margin);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn diagonal_is_positive_at_zero_period(model in model_strategy(), lambda in 1.0f64..3000.0, t in 0.0f64..=1.0) {
        let s = vec![t; model.d];
        let beta = direction_through(&model, &s);
        let cutoff = Cutoff::gaussian(0.5, model.r).unwrap();
        let point = PointM::new(s).unwrap();
        let out = smoothed_projector_diag(&model, &cutoff, &beta, &vec![0.0; model.r], lambda, &point, Tolerance::Relative(1e-10))
            .unwrap()
            .value();
        prop_assert!(out.re >= 0.0);
        prop_assert!(out.im.abs() <= 1e-14 * out.re, "value {}", out);
    }

    #[test]
    fn full_periods_only_rotate_the_trace(
        model in model_strategy(),
        lambda in 1.0f64..500.0,
        m in prop::collection::vec(-3i32..=3, 2),
        t in 0.1f64..0.9,
    ) {
        let beta = direction_through(&model, &vec![t; model.d]);
        let cutoff = Cutoff::gaussian(0.5, model.r).unwrap();
        let s0: Vec<f64> = (0..model.r)
            .map(|i| if i < model.d { 2.0 * PI * m[i] as f64 } else { 2.0 * PI * m[i] as f64 / model.constants()[i - model.d] })
            .collect();
        let tol = Tolerance::Absolute(1e-12);
        let at = trace_ft(&model, &cutoff, &beta, &s0, lambda, tol).unwrap().value();
        let zero = trace_ft(&model, &cutoff, &beta, &vec![0.0; model.r], lambda, tol).unwrap().value();
        let scaled: Vec<f64> = beta.iter().map(|b| lambda * b).collect();
        let want = zero * Complex64::from_polar(1.0, -phase_mod_2pi(&scaled, &s0));
        prop_assert!((at - want).norm() <= 1e-12 * zero.norm(), "{} vs {}", at, want);
    }

    #[test]
    fn sums_do_not_depend_on_thread_count(
        model in model_strategy(),
        lambda in 10.0f64..20000.0,
        s0 in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let s = vec![0.5; model.d];
        let beta = direction_through(&model, &s);
        let cutoff = Cutoff::gaussian(0.5, model.r).unwrap();
        let point = PointM::new(s).unwrap();
        let s0 = &s0[..model.r];
        let diag = |n| in_pool(n, || smoothed_projector_diag(&model, &cutoff, &beta, s0, lambda, &point, Tolerance::Relative(1e-10)).unwrap());
        let trace = |n| in_pool(n, || trace_ft(&model, &cutoff, &beta, s0, lambda, Tolerance::Absolute(1e-10)).unwrap());
        let (d1, d4) = (diag(1), diag(4));
        prop_assert_eq!(d1.value().re.to_bits(), d4.value().re.to_bits());
        prop_assert_eq!(d1.value().im.to_bits(), d4.value().im.to_bits());
        let (t1, t4) = (trace(1), trace(4));
        prop_assert_eq!(t1.value().re.to_bits(), t4.value().re.to_bits());
        prop_assert_eq!(t1.value().im.to_bits(), t4.value().im.to_bits());
    }
}

/// The trace is the integral of the diagonal against `prod pi ds_i`. The
/// diagonal is a polynomial in `s` of degree below the node count, so
/// Gauss-Legendre is exact up to rounding.
fn trace_by_quadrature(model: &ToricModel, beta: &[f64], lambda: f64, nodes: usize) -> (Complex64, Complex64) {
    let cutoff = Cutoff::gaussian(0.5, model.r).unwrap();
    let s0 = vec![0.0; model.r];
    let (x, w) = gauss_legendre(nodes);
    let grid: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut index = vec![0usize; model.d];
    loop {
        let s: Vec<f64> = index.iter().map(|&i| grid[i].0).collect();
        let weight: f64 = index.iter().map(|&i| PI * grid[i].1).product();
        let point = PointM::new(s).unwrap();
        let v = smoothed_projector_diag(model, &cutoff, beta, &s0, lambda, &point, Tolerance::Absolute(1e-14)).unwrap();
        total += weight * v.value();
        let mut j = 0;
        while j < model.d {
            index[j] += 1;
            if index[j] < nodes {
                break;
            }
            index[j] = 0;
            j += 1;
        }
        if j == model.d {
            break;
        }
    }
    let trace = trace_ft(model, &cutoff, beta, &s0, lambda, Tolerance::Absolute(1e-14)).unwrap().value();
    (total, trace)
}

#[test]
fn trace_is_integrated_diagonal() {
    for (model, lambda, nodes) in
        [(ToricModel::cp1(), 150.0, 140), (ToricModel::augmented_cp1(), 200.0, 140), (ToricModel::cp1_cp1(), 40.0, 50)]
    {
        let beta = direction_through(&model, &vec![0.5; model.d]);
        let (quad, trace) = trace_by_quadrature(&model, &beta, lambda, nodes);
        assert!((quad - trace).norm() <= 1e-8 * trace.norm(), "{quad} vs {trace}");
    }
}
