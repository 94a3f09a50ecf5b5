mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use common::{max_abs_eig, poly_at, taylor_expm};
use rdob_core::arch::{piezo_controller, piezo_q};
use rdob_core::models::piezo_plant;
use rdob_core::numlin::linalg::{eigenvalues, expm, spectral_radius};
use rdob_core::numlin::{log_grid, Domain, Mat, TransferFunction};
use rdob_core::reset::ResetElement;
use rdob_core::Error;

fn j(x: f64) -> Complex64 {
    Complex64::new(0.0, x)
}

fn second_order(wp: f64) -> TransferFunction {
    TransferFunction::continuous(&[1.0], &[1.0 / (wp * wp), 2.0 / wp, 1.0]).unwrap()
}

#[test]
fn first_order_realization() {
    let ss = TransferFunction::continuous(&[1.0], &[1.0, 1.0])
        .unwrap()
        .to_state_space()
        .unwrap();
    assert_eq!(ss.a, Mat::from_element(1, 1, -1.0));
    assert_eq!(ss.b, Mat::from_element(1, 1, 1.0));
    assert_eq!(ss.c, Mat::from_element(1, 1, 1.0));
    assert_eq!(ss.d, Mat::from_element(1, 1, 0.0));
}

#[test]
fn static_gain_has_no_states() {
    let ss = TransferFunction::gain(2.5, Domain::Continuous)
        .to_state_space()
        .unwrap();
    assert_eq!(ss.order(), 0);
    assert_eq!(ss.d[(0, 0)], 2.5);
    assert_eq!(ss.eval(123.0).unwrap(), Complex64::new(2.5, 0.0));
}

#[test]
fn improper_realization_rejected() {
    let tf = TransferFunction::continuous(&[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap();
    let e = tf.to_state_space().unwrap_err();
    assert!(matches!(e, Error::Improper { num: 2, den: 1 }));
    assert!(e.to_string().contains("improper"));
}

#[test]
fn second_order_at_its_corner() {
    let pn = second_order(1000.0);
    let ss = pn.to_state_space().unwrap();
    assert_eq!(ss.order(), 2);
    let v = ss.eval(1000.0).unwrap();
    assert!((v - j(-0.5)).norm() < 1e-12, "{v}");
    assert!((pn.eval(1000.0).unwrap() - j(-0.5)).norm() < 1e-12);
}

#[test]
fn second_order_dc_limit() {
    let v = second_order(1000.0).eval(1e-6 * 1000.0).unwrap();
    assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-5);
}

#[test]
fn piezo_observer_filter_near_dc() {
    // (2.31e-3 * 4.104 * 1.221) / (0.4238 * 0.0275)
    let hand = 0.011_575_373_04 / 0.011_654_5;
    let q = piezo_q().unwrap();
    assert_relative_eq!(q.dc_gain().unwrap(), hand, max_relative = 1e-9);
    assert_relative_eq!(q.eval(1e-3).unwrap().norm(), hand, max_relative = 1e-6);
}

#[test]
fn evaluation_at_pole_is_an_error() {
    let integrator = TransferFunction::continuous(&[1.0], &[1.0, 0.0]).unwrap();
    assert!(matches!(integrator.eval(0.0), Err(Error::Pole(_))));
    let osc = TransferFunction::continuous(&[1.0], &[1.0, 0.0, 4.0]).unwrap();
    assert!(matches!(osc.eval(2.0), Err(Error::Pole(_))));
    let acc = TransferFunction::discrete(&[1.0], &[1.0, -1.0], 1e-3).unwrap();
    assert!(matches!(acc.eval(0.0), Err(Error::Pole(_))));
}

#[test]
fn series_matches_pointwise_product() {
    let a = second_order(300.0);
    let b = TransferFunction::continuous(&[1.0 / 50.0, 1.0], &[1.0 / 5000.0, 1.0]).unwrap();
    let ab = a.series(&b).unwrap();
    for w in log_grid(1.0, 1e5, 10).unwrap() {
        let want = a.eval(w).unwrap() * b.eval(w).unwrap();
        assert!((ab.eval(w).unwrap() - want).norm() <= 1e-12 * want.norm().max(1e-300));
    }
    let ssab = a
        .to_state_space()
        .unwrap()
        .series(&b.to_state_space().unwrap())
        .unwrap();
    for w in [3.0, 300.0, 3e4] {
        let want = ab.eval(w).unwrap();
        assert!((ssab.eval(w).unwrap() - want).norm() <= 1e-10 * want.norm());
    }
}

#[test]
fn plant_times_properized_inverse_is_padding_lowpass() {
    use rdob_core::arch::properized_inverse_tf;
    let p = piezo_plant();
    let wa = 2e5;
    let inv = properized_inverse_tf(&p, wa).unwrap();
    let prod = p.series(&inv).unwrap();
    for w in [10.0, 1e3, 1e4, 1e5] {
        let pad = Complex64::new(1.0, w / wa).powi(-2);
        assert!((prod.eval(w).unwrap() - pad).norm() < 1e-9);
    }
}

#[test]
fn unity_feedback_of_unit_gain() {
    let one = TransferFunction::gain(1.0, Domain::Continuous);
    let s = one.feedback(&one).unwrap();
    assert_relative_eq!(s.eval(10.0).unwrap().re, 0.5, epsilon = 1e-15);
}

#[test]
fn sensitivity_vanishes_at_dc_with_integrator() {
    use rdob_core::arch::pid_series;
    let l = second_order(1e3)
        .series(&pid_series(33.6, 1e3, 3333.0, 3e4, 1e5).unwrap())
        .unwrap();
    let s = TransferFunction::gain(1.0, Domain::Continuous).feedback(&l).unwrap();
    let mags: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|w| s.eval(*w).unwrap().norm()).collect();
    assert!(
        mags[0] < 1e-2 && mags[1] < mags[0] / 5.0 && mags[2] < mags[1] / 5.0,
        "{mags:?}"
    );
}

#[test]
fn mixing_domains_is_an_error() {
    let c = second_order(10.0);
    let d = piezo_controller().unwrap();
    assert!(matches!(c.series(&d), Err(Error::DomainMismatch(_))));
    assert!(matches!(c.feedback(&d), Err(Error::DomainMismatch(_))));
    let css = c.to_state_space().unwrap();
    let dss = d.to_state_space().unwrap();
    assert!(matches!(css.series(&dss), Err(Error::DomainMismatch(_))));
}

#[test]
fn discrete_evaluation_on_unit_circle() {
    let ts = 1e-3;
    let g = TransferFunction::discrete(&[1.0], &[1.0, -0.5], ts).unwrap();
    let w = 700.0;
    let z = Complex64::from_polar(1.0, w * ts);
    assert!((g.eval(w).unwrap() - 1.0 / (z - 0.5)).norm() < 1e-14);
}

#[test]
fn expm_zero_is_identity() {
    assert_eq!(expm(&Mat::zeros(3, 3)).unwrap(), Mat::identity(3, 3));
}

#[test]
fn expm_diagonal() {
    let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.5, 2.0]));
    let e = expm(&m).unwrap();
    for (i, l) in [-1.0f64, 0.5, 2.0].iter().enumerate() {
        assert_relative_eq!(e[(i, i)], l.exp(), max_relative = 1e-14);
    }
}

#[test]
fn expm_rotation() {
    let t = 2.3;
    let m = Mat::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
    let e = expm(&m).unwrap();
    let want = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    assert!((e - want).amax() < 1e-14);
}

#[test]
fn expm_non_square_rejected() {
    assert!(matches!(expm(&Mat::zeros(2, 3)), Err(Error::Dimension(_))));
}

#[test]
fn expm_of_second_order_reset_element_matches_series() {
    let sore = ResetElement::sore(1.0, 0.7).unwrap();
    for h in [0.1, 1.0, 3.0] {
        let m = &sore.base.a * h;
        let e = expm(&m).unwrap();
        let t = taylor_expm(&m, 80);
        assert!((e - t).amax() <= 1e-9);
    }
}

#[test]
fn triangular_eigenvalues_are_its_diagonal() {
    let m = Mat::from_row_slice(3, 3, &[1.0, 5.0, -2.0, 0.0, -3.0, 7.0, 0.0, 0.0, 0.25]);
    let mut ev: Vec<f64> = eigenvalues(&m)
        .unwrap()
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-12);
            z.re
        })
        .collect();
    ev.sort_by(f64::total_cmp);
    assert_eq!(ev.len(), 3);
    for (a, b) in ev.iter().zip([-3.0, 0.25, 1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn companion_eigenvalues_are_roots() {
    let m = Mat::from_row_slice(2, 2, &[-3.0, -2.0, 1.0, 0.0]);
    let mut ev: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] + 2.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12);
}

#[test]
fn piezo_plant_poles_agree_with_reference_solver() {
    let ss = piezo_plant().to_state_space().unwrap();
    let ours = spectral_radius(&ss.a).unwrap();
    assert_relative_eq!(ours, max_abs_eig(&ss.a), max_relative = 1e-10);
}

fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn mat_strategy(n: usize, scale: f64) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Mat::from_row_slice(n, n, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realization_matches_rational_evaluation(
        den in prop::collection::vec(0.1f64..10.0, 1..6),
        num_seed in prop::collection::vec(-5.0f64..5.0, 1..6),
        wexp in -1.0f64..3.0,
    ) {
        let mut d = vec![1.0];
        d.extend(&den);
        let n: Vec<f64> = num_seed.iter().take(d.len()).cloned().collect();
        let tf = TransferFunction::continuous(&n, &d).unwrap();
        let ss = tf.to_state_space().unwrap();
        for k in 0..100 {
            let w = 10f64.powf(wexp + k as f64 * 0.01);
            let s = j(w);
            let den_v = poly_at(&d, s);
            if den_v.norm() < 1e-6 {
                continue;
            }
            let want = poly_at(&n, s) / den_v;
            let got = ss.eval(w).unwrap();
            prop_assert!((got - want).norm() <= 1e-9 * want.norm().max(1.0), "w={w} {got} vs {want}");
        }
    }

    #[test]
    fn expm_of_skew_symmetric_is_invertible_rotation(v in prop::collection::vec(-1.0f64..1.0, 6), scale in 1.0f64..1e3) {
        let k = Mat::from_row_slice(3, 3, &[0.0, v[0], v[1], -v[0], 0.0, v[2], -v[1], -v[2], 0.0]) * scale;
        let e = expm(&k).unwrap();
        let f = expm(&(-&k)).unwrap();
        let id = &e * &f;
        prop_assert!((id - Mat::identity(3, 3)).amax() < 1e-9 * scale.max(1.0));
    }

    #[test]
    fn expm_inverse_pair(m in mat_strategy(4, 2.0)) {
        let prod = expm(&m).unwrap() * expm(&(-&m)).unwrap();
        prop_assert!((prod - Mat::identity(4, 4)).amax() < 1e-9);
    }

    #[test]
    fn expm_eigenvalues_are_exponentials(d in prop::collection::vec(-3.0f64..1.0, 4), p in mat_strategy(4, 1.0)) {
        let v = Mat::identity(4, 4) + p * 0.3;
        let Some(vi) = v.clone().try_inverse() else { return Ok(()); };
        let m = &v * Mat::from_diagonal(&nalgebra::DVector::from_vec(d.clone())) * vi;
        let mut got: Vec<f64> = eigenvalues(&expm(&m).unwrap()).unwrap().iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = d.iter().map(|x| x.exp()).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-6 * w.max(1.0), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn eigenvalues_are_roots_of_characteristic_matrix(m in mat_strategy(6, 5.0)) {
        let ev = eigenvalues(&m).unwrap();
        prop_assert_eq!(ev.len(), 6);
        let mc = m.map(|x| Complex64::new(x, 0.0));
        let scale = m.amax().max(1.0);
        for l in ev {
            let shifted = &mc - DMatrix::<Complex64>::identity(6, 6) * l;
            prop_assert!(smallest_singular_value(&shifted) < 1e-8 * scale, "residual for {l}");
        }
    }
}
