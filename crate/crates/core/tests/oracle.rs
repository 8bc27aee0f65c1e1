mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qvolterra::model::kerr_cavity;
use qvolterra::oracle::{gaussian_reference, lindblad_integrate, non_gaussianity, semiclassical_response, FockDensity, FockOptions, FockSpace};
use qvolterra::response::DriveSignal;
use rand::Rng;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn opts(truncation: usize, checkpoint_every: usize) -> FockOptions {
    FockOptions {
        truncation,
        checkpoint_every,
        ..FockOptions::default()
    }
}

/// Resonantly driven linear cavity from vacuum.
fn linear_mean(eps: f64, w: f64, g: f64, t: f64) -> Complex64 {
    let lambda = g / 2.0;
    -(g.sqrt()) * eps * c(0.0, -w * t).exp() * (1.0 - (-lambda * t).exp()) / lambda
}

#[test]
fn driven_kerr_keeps_trace_and_positivity() {
    let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
    let drive = DriveSignal::rotating(0.6, 1.0, 0.01, 2001).unwrap();
    let traj = lindblad_integrate(&spec, &drive, &opts(40, 250)).unwrap();
    assert!(traj.max_trace_error <= 1e-8);
    assert!(traj.checkpoints.len() >= 8);
    for (_, rho) in &traj.checkpoints {
        assert!((rho.trace() - 1.0).norm() <= 1e-8);
        assert!(rho.min_eigenvalue() >= -1e-7);
        assert!(rho.hermiticity_error() <= 1e-12);
    }
}

#[test]
fn linear_cavity_follows_langevin_mean() {
    let (w, g, eps) = (1.0, 0.2, 0.3);
    let spec = kerr_cavity(w, 0.0, g).unwrap();
    let drive = DriveSignal::rotating(eps, w, 0.01, 3001).unwrap();
    let traj = lindblad_integrate(&spec, &drive, &opts(20, 0)).unwrap();
    let semi = semiclassical_response(&spec, &drive).unwrap();
    for (k, &t) in traj.t.iter().enumerate() {
        let want = linear_mean(eps, w, g, t);
        assert!((traj.modes[0][k] - want).norm() <= 1e-8, "oracle at t = {t}");
        assert!((semi.alpha[0][k] - want).norm() <= 1e-8, "mean field at t = {t}");
    }
}

#[test]
fn undriven_vacuum_is_stationary() {
    let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
    let drive = DriveSignal::zero(0.01, 500).unwrap();
    let traj = lindblad_integrate(&spec, &drive, &opts(10, 0)).unwrap();
    let vac = FockDensity::vacuum(FockSpace::uniform(1, 10));
    assert!((&traj.final_state.matrix - &vac.matrix).iter().all(|z| z.norm() == 0.0));
    assert!(traj.output.iter().all(|z| z.norm() == 0.0));
    let semi = semiclassical_response(&spec, &drive).unwrap();
    assert!(semi.output.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn five_photon_baseline_runs_without_the_leak_check() {
    let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
    let drive = DriveSignal::rotating(0.6, 1.0, 0.01, 2001).unwrap();
    assert!(matches!(
        lindblad_integrate(&spec, &drive, &opts(5, 0)),
        Err(qvolterra::Error::TruncationLeak { .. })
    ));
    let loose = FockOptions {
        truncation: 5,
        leak_tolerance: None,
        ..FockOptions::default()
    };
    let traj = lindblad_integrate(&spec, &drive, &loose).unwrap();
    assert!(traj.max_top_population > 1e-3);
    assert!(traj.max_trace_error <= 1e-8);
}

#[test]
fn doubling_the_truncation_changes_nothing() {
    let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
    let drive = DriveSignal::rotating(0.6, 1.0, 0.01, (20.0 * TAU / 0.01) as usize + 1).unwrap();
    let a = lindblad_integrate(&spec, &drive, &opts(40, 0)).unwrap();
    let b = lindblad_integrate(&spec, &drive, &opts(80, 0)).unwrap();
    let diff = sup(&a.modes[0], &b.modes[0]);
    assert!(diff <= 1e-8, "sup difference {diff}");
}

/// `tr(ρ − σ)² / (2 tr ρ²)` for a number state against the thermal state
/// of equal mean photon number, written out by hand.
#[test]
fn single_photon_non_gaussianity() {
    let n = 30;
    let rho = FockDensity::fock(1, n);
    let nbar: f64 = 1.0;
    let p: Vec<f64> = (0..=n).map(|k| nbar.powi(k as i32) / (1.0 + nbar).powi(k as i32 + 1)).collect();
    let tr_s2: f64 = p.iter().map(|x| x * x).sum();
    let by_hand = (1.0 + tr_s2 - 2.0 * p[1]) / 2.0;
    assert!((by_hand - 5.0 / 12.0).abs() < 1e-12);
    let delta = non_gaussianity(&rho).unwrap();
    assert!((delta - 5.0 / 12.0).abs() < 1e-9, "{delta}");
}

#[test]
fn coherent_and_gaussian_states() {
    for alpha in [c(0.0, 0.0), c(0.5, -0.3), c(1.5, 1.0)] {
        let rho = FockDensity::coherent(alpha, 40);
        assert!(non_gaussianity(&rho).unwrap() <= 1e-10, "{alpha}");
    }
    // Thermal tail beyond N = 60 weighs (2/3)^61.
    let rho = FockDensity::fock(2, 60);
    let sigma = gaussian_reference(&rho).unwrap();
    assert!((sigma.trace() - 1.0).norm() < 1e-9);
    assert!(sigma.min_eigenvalue() > -1e-10);
}

#[test]
fn non_gaussianity_of_random_states_is_bounded() {
    let mut r = rng(31);
    let n = 10;
    for _ in 0..50 {
        let rank = r.random_range(1..=3);
        let g = DMatrix::from_fn(n + 1, rank, |i, _| rand_c(&mut r, 1.0) * (-(i as f64) / 3.0).exp());
        let m = &g * g.adjoint();
        let tr = m.trace();
        let space = FockSpace::uniform(1, n);
        let rho = FockDensity {
            space,
            matrix: m / tr,
        };
        let d = non_gaussianity(&rho).unwrap();
        assert!((0.0..=1.0).contains(&d), "{d}");
    }
    let psi = DVector::from_fn(n + 1, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    assert!(non_gaussianity(&FockDensity::from_state(FockSpace::uniform(1, n), &psi)).unwrap() <= 1e-12);
}

#[test]
fn kerr_evolution_becomes_non_gaussian() {
    let drive = DriveSignal::rotating(0.6, 1.0, 0.01, 3001).unwrap();
    let linear = lindblad_integrate(&kerr_cavity(1.0, 0.0, 0.2).unwrap(), &drive, &opts(40, 300)).unwrap();
    for (_, rho) in &linear.checkpoints {
        assert!(non_gaussianity(rho).unwrap() <= 1e-10);
    }
    let kerr = lindblad_integrate(&kerr_cavity(1.0, 0.01, 0.2).unwrap(), &drive, &opts(40, 300)).unwrap();
    let peak = kerr.checkpoints.iter().map(|(_, rho)| non_gaussianity(rho).unwrap()).fold(0.0, f64::max);
    assert!(peak > 1e-6, "{peak}");
}
