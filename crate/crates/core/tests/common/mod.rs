#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qvolterra::algebra::{Monomial, OperatorPoly};
use qvolterra::kernel::{ExpSumKernel, ExpTerm, KernelSignature};
use qvolterra::model::BilinearSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(r: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    c(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

/// Lowering operator on `levels` states.
pub fn lowering(levels: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(levels, levels, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) })
}

/// Matrix of a normal-ordered monomial on `modes` modes with `levels`
/// states each; mode 0 is the most significant tensor factor.
pub fn monomial_matrix(m: &Monomial, modes: usize, levels: usize) -> DMatrix<Complex64> {
    let a = lowering(levels);
    let ad = a.adjoint();
    let mut out = DMatrix::<Complex64>::identity(1, 1);
    for mode in 0..modes {
        let (p, q) = m.mode_powers(mode);
        let mut f = DMatrix::<Complex64>::identity(levels, levels);
        for _ in 0..p {
            f = &f * &ad;
        }
        for _ in 0..q {
            f = &f * &a;
        }
        out = out.kronecker(&f);
    }
    out
}

pub fn poly_matrix(p: &OperatorPoly, modes: usize, levels: usize) -> DMatrix<Complex64> {
    let dim = levels.pow(modes as u32);
    let mut out = DMatrix::zeros(dim, dim);
    for (m, &v) in p.terms() {
        out += monomial_matrix(m, modes, levels) * v;
    }
    out
}

/// Largest entry difference over basis states whose every mode level is
/// at most `keep`.
pub fn low_block_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, modes: usize, levels: usize, keep: usize) -> f64 {
    let ok = |idx: usize| {
        let mut i = idx;
        for _ in 0..modes {
            if i % levels > keep {
                return false;
            }
            i /= levels;
        }
        true
    };
    let mut worst: f64 = 0.0;
    for i in (0..a.nrows()).filter(|&i| ok(i)) {
        for j in (0..a.ncols()).filter(|&j| ok(j)) {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Random polynomial with monomials of degree at most `max_degree`.
pub fn random_poly(r: &mut ChaCha8Rng, modes: usize, max_degree: u32, terms: usize) -> OperatorPoly {
    let mut out = OperatorPoly::zero();
    for _ in 0..terms {
        let mut powers = vec![(0u32, 0u32); modes];
        let deg = r.random_range(0..=max_degree);
        for _ in 0..deg {
            let m = r.random_range(0..modes);
            if r.random_bool(0.5) {
                powers[m].0 += 1;
            } else {
                powers[m].1 += 1;
            }
        }
        out = &out + &OperatorPoly::term(Monomial::new(powers), rand_c(r, 1.0));
    }
    out
}

/// Taylor-series exponential `e^{At}` with scaling and squaring; the series
/// stops once a term drops below `1e-14` of the partial sum.
pub fn taylor_expm(a: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let m = a * c(t, 0.0);
    let norm: f64 = (0..n).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let x = &m * c(1.0 / 2f64.powi(s as i32), 0.0);
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..60 {
        term = &term * &x * c(1.0 / k as f64, 0.0);
        sum += &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14 * sum.iter().map(|z| z.norm()).fold(0.0, f64::max) * 1e-3 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Kernel chain `l e^{Aτ₁}B₁ ⋯ e^{Aτₙ}Bₙ x₀` with the Taylor exponential;
/// output `+` kernels are conjugates of output `−` ones.
pub fn oracle_kernel(sys: &BilinearSystem, sig: &KernelSignature, taus: &[f64]) -> Complex64 {
    if sig.out_sign.is_plus() {
        return oracle_kernel(sys, &sig.conjugate(), taus).conj();
    }
    let mut v: DVector<Complex64> = sys.initial.clone();
    for (k, &(port, sign)) in sig.inputs.iter().enumerate().rev() {
        let b = if sign.is_plus() { &sys.input_plus[port] } else { &sys.input_minus[port] };
        v = taylor_expm(&sys.drift, taus[k]) * (b * v);
    }
    (sys.readout.row(sig.out_port) * v)[(0, 0)]
}

/// Random exponential-sum kernel with decay rates in `[lo, hi]`.
pub fn random_kernel(r: &mut ChaCha8Rng, order: usize, terms: usize, lo: f64, hi: f64, freq: f64) -> ExpSumKernel {
    let sig = KernelSignature::single_port(qvolterra::kernel::Sign::Minus, &vec![qvolterra::kernel::Sign::Minus; order]);
    ExpSumKernel {
        signature: sig,
        terms: (0..terms)
            .map(|_| ExpTerm {
                coeff: rand_c(r, 1.0),
                rates: (0..order).map(|_| c(r.random_range(lo..hi), r.random_range(-freq..freq))).collect(),
            })
            .collect(),
    }
}

pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(1e-300)).sqrt()
}

pub fn sup(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// Composite Gauss-Legendre nodes on `[0, len]`.
pub fn panel_nodes(len: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(per_panel);
    let h = len / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        for &(x, w) in &gl {
            out.push(((p as f64 + x) * h, w * h));
        }
    }
    out
}
