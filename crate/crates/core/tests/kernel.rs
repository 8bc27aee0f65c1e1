mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use qvolterra::algebra::Monomial;
use qvolterra::kernel::{
    closed_form_kerr, closed_form_optomech, eval_kernel, symbolic_kernel, KerrParams, KernelSignature, OptomechParams, Sign,
};
use qvolterra::model::{build_bilinear, kerr_cavity, optomech, BilinearSystem, InitialState};
use rand::Rng;

fn sig(s: &str) -> KernelSignature {
    s.parse().unwrap()
}

fn kerr(chi: f64) -> BilinearSystem {
    build_bilinear(&kerr_cavity(1.0, chi, 0.2).unwrap(), &InitialState::Vacuum).unwrap()
}

fn om() -> BilinearSystem {
    build_bilinear(&optomech(1.0, 0.3, 0.05, 0.2, 0.1).unwrap(), &InitialState::Vacuum).unwrap()
}

/// Random stable system with `n` moments and one port.
fn random_system(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> BilinearSystem {
    let mut a = DMatrix::from_fn(n, n, |_, _| rand_c(r, 1.0));
    for i in 0..n {
        a[(i, i)] -= c(2.0 + r.random_range(0.0..1.0), 0.0);
    }
    BilinearSystem {
        basis: (0..n).map(|k| Monomial::single(0, k as u32, 0)).collect(),
        drift: a,
        input_minus: vec![DMatrix::from_fn(n, n, |_, _| rand_c(r, 1.0))],
        input_plus: vec![DMatrix::from_fn(n, n, |_, _| rand_c(r, 1.0))],
        readout: DMatrix::from_fn(1, n, |_, _| rand_c(r, 1.0)),
        scattering: DMatrix::identity(1, 1),
        initial: DVector::from_fn(n, |_, _| rand_c(r, 1.0)),
        mu: 0.0,
    }
}

fn all_signatures(ports: usize, max_order: usize) -> Vec<KernelSignature> {
    (1..=max_order).flat_map(|n| KernelSignature::enumerate(ports, n)).collect()
}

#[test]
fn kerr_order_one_at_zero_delay() {
    let v = eval_kernel(&kerr(0.01), &sig("-:-"), &[0.0]).unwrap();
    assert!((v - c(-0.2, 0.0)).norm() < 1e-15);
}

#[test]
fn kerr_order_one_at_five_decay_times() {
    let (w, g) = (1.0, 0.2);
    let tau = 5.0 / g;
    let v = eval_kernel(&kerr(0.01), &sig("-:-"), &[tau]).unwrap();
    let want = c(-g, 0.0) * (-2.5f64).exp() * c(0.0, -w * tau).exp();
    assert!((v - want).norm() <= 1e-10 * want.norm());
}

#[test]
fn kerr_minus_plus_minus_tabulated() {
    // Dense Taylor oracle value, frozen.
    let want = c(8.799319259820339e-4, -4.130413632186592e-4);
    let sys = kerr(0.01);
    let oracle = oracle_kernel(&sys, &sig("-:-+-"), &[1.0, 1.0, 1.0]);
    assert!((oracle - want).norm() <= 1e-14);
    let v = eval_kernel(&sys, &sig("-:-+-"), &[1.0, 1.0, 1.0]).unwrap();
    assert!((v - want).norm() <= 1e-12 * want.norm());
}

#[test]
fn linear_kerr_has_no_higher_orders() {
    let sys = kerr(0.0);
    for s in KernelSignature::enumerate(1, 3).into_iter().chain(KernelSignature::enumerate(1, 2)) {
        assert!(symbolic_kernel(&sys, &s).unwrap().is_zero(), "{s}");
        for taus in [[0.0, 0.0, 0.0], [1.0, 2.0, 0.5], [7.0, 0.1, 3.0]] {
            assert!(eval_kernel(&sys, &s, &taus[..s.order()]).unwrap().norm() <= 1e-12);
        }
    }
}

#[test]
fn order_one_symbolic_is_single_term() {
    for chi in [0.0, 0.01] {
        let k = symbolic_kernel(&kerr(chi), &sig("-:-")).unwrap();
        assert_eq!(k.terms.len(), 1);
        assert!((k.terms[0].coeff - c(-0.2, 0.0)).norm() < 1e-14);
        assert!((k.terms[0].rates[0] - c(0.1, 1.0)).norm() < 1e-14);
    }
    let lin = build_bilinear(&kerr_cavity(1.0, 0.0, 0.2).unwrap().with_truncation_degree(1), &InitialState::Vacuum).unwrap();
    let k = symbolic_kernel(&lin, &sig("-:-")).unwrap();
    for j in 0..50 {
        let t = 0.4 * j as f64;
        assert!((k.eval(&[t]) - eval_kernel(&lin, &sig("-:-"), &[t]).unwrap()).norm() < 1e-13);
    }
}

#[test]
fn linear_limit_matches_closed_form_term_by_term() {
    let p = KerrParams {
        omega_a: 1.0,
        chi: 0.0,
        gamma: 0.2,
    };
    for s in ["-:-", "+:+"] {
        let mut ours = symbolic_kernel(&kerr(0.0), &sig(s)).unwrap().terms;
        let mut closed = closed_form_kerr(&sig(s), &p).terms;
        let key = |t: &qvolterra::kernel::ExpTerm| (t.rates[0].re, t.rates[0].im);
        ours.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        closed.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(ours.len(), closed.len());
        for (a, b) in ours.iter().zip(&closed) {
            assert!((a.coeff - b.coeff).norm() < 1e-14 && (a.rates[0] - b.rates[0]).norm() < 1e-14);
        }
    }
}

#[test]
fn closed_forms_vanish_at_zero_delays() {
    let kp = KerrParams {
        omega_a: 1.0,
        chi: 0.01,
        gamma: 0.2,
    };
    for s in ["-:--+", "-:+-+"] {
        let k = closed_form_kerr(&sig(s), &kp);
        assert!(!k.is_zero());
        assert!(k.eval(&[0.0, 1.3, 0.7]).norm() < 1e-15, "{s}");
    }
    let op = OptomechParams {
        omega_a: 1.0,
        omega_b: 0.01,
        g: 1e-4,
        gamma_a: 0.2,
        gamma_b: 1e-4,
    };
    for s in ["-:-+-", "-:--+"] {
        let k = closed_form_optomech(&sig(s), &op);
        assert!(!k.is_zero());
        let scale = k.eval(&[0.5, 1.0, 2.0]).norm();
        assert!(k.eval(&[0.5, 0.0, 2.0]).norm() <= 1e-12 * scale, "{s}");
    }
}

#[test]
fn pointwise_and_symbolic_agree() {
    for (sys, gamma) in [(kerr(0.01), 0.2), (om(), 0.1)] {
        let grid: Vec<f64> = (0..5).map(|k| 2.5 * k as f64 / gamma).collect();
        for s in all_signatures(1, 3) {
            let k = symbolic_kernel(&sys, &s).unwrap();
            let n = s.order();
            let mut points = vec![vec![]];
            for _ in 0..n {
                points = points.into_iter().flat_map(|p| grid.iter().map(move |&t| [p.clone(), vec![t]].concat())).collect();
            }
            let vals: Vec<_> = points.iter().map(|p| eval_kernel(&sys, &s, p).unwrap()).collect();
            let scale = 1.0 + vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (p, v) in points.iter().zip(&vals) {
                assert!((k.eval(p) - v).norm() <= 1e-9 * scale, "{s} at {p:?}");
            }
        }
    }
}

#[test]
fn kernels_decay() {
    for (sys, gamma) in [(kerr(0.01), 0.2), (om(), 0.1)] {
        for s in all_signatures(1, 3) {
            for slot in 0..s.order() {
                let mut taus = vec![1.0; s.order()];
                taus[slot] = 50.0 / gamma;
                assert!(eval_kernel(&sys, &s, &taus).unwrap().norm() < 1e-8, "{s} slot {slot}");
            }
        }
    }
}

#[test]
fn random_systems_match_taylor_chain() {
    let mut r = rng(11);
    for trial in 0..24 {
        let n = r.random_range(1..=8);
        let sys = random_system(&mut r, n);
        let order = 1 + trial % 3;
        let signs: Vec<Sign> = (0..order).map(|_| if r.random_bool(0.5) { Sign::Plus } else { Sign::Minus }).collect();
        let out = if r.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
        let s = KernelSignature::single_port(out, &signs);
        let taus: Vec<f64> = (0..order).map(|_| r.random_range(0.0..3.0)).collect();
        let want = oracle_kernel(&sys, &s, &taus);
        let got = eval_kernel(&sys, &s, &taus).unwrap();
        assert!((got - want).norm() <= 1e-10 * (1.0 + want.norm()), "trial {trial}: {got} vs {want}");
        let sym = symbolic_kernel(&sys, &s).unwrap();
        assert!((sym.eval(&taus) - want).norm() <= 1e-9 * (1.0 + want.norm()), "symbolic trial {trial}");
    }
}

#[test]
fn conjugate_signatures_are_conjugate() {
    let sys = kerr(0.01);
    for s in KernelSignature::enumerate(1, 3) {
        let taus = [0.3, 1.1, 2.0];
        let a = eval_kernel(&sys, &s, &taus).unwrap();
        let b = eval_kernel(&sys, &s.conjugate(), &taus).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
    }
}
