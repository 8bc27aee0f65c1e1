//! Frequency-domain susceptibilities.
//!
//! Convention: an input line carrying `e^{iωt}` produces an output
//! `χ(ω) e^{iωt}`, so the order-1 susceptibility of a linear component is
//! its transfer function at `s = iω`. A drive `β(t) = ε e^{−iω_d t}`
//! therefore sits at `ω = −ω_d`.
//!
//! An exponential kernel term `c ∏ e^{−λₖτₖ}` maps to
//! `c ∏ 1/(λₖ + iΩₖ)` with suffix sums `Ωₖ = ωₖ + ωₖ₊₁ + ⋯ + ωₙ`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{ExpSumKernel, ExpTerm, KernelExpander, KernelOptions, KernelSignature, Sign};
use crate::model::{BilinearSystem, LinearModel};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `constant + Σ coeff ∏ₖ 1/(λₖ + iΩₖ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalSusceptibility {
    pub signature: KernelSignature,
    pub terms: Vec<ExpTerm>,
    pub constant: Complex64,
}

impl RationalSusceptibility {
    pub fn constant(signature: KernelSignature, value: Complex64) -> Self {
        Self {
            signature,
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn order(&self) -> usize {
        self.signature.order()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == c(0.0, 0.0)
    }

    pub fn eval(&self, omegas: &[f64]) -> Complex64 {
        let n = omegas.len();
        let mut suffix = vec![0.0; n];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += omegas[k];
            suffix[k] = acc;
        }
        let mut total = self.constant;
        for t in &self.terms {
            let mut v = t.coeff;
            for (lambda, big_omega) in t.rates.iter().zip(&suffix) {
                v /= lambda + c(0.0, *big_omega);
            }
            total += v;
        }
        total
    }
}

/// Closed-form multidimensional Fourier transform of a decaying kernel.
pub fn fourier_kernel(k: &ExpSumKernel) -> Result<RationalSusceptibility> {
    for t in &k.terms {
        if let Some(bad) = t.rates.iter().find(|r| r.re <= 0.0) {
            return Err(Error::NonDecayingKernel { rate: bad.to_string() });
        }
    }
    Ok(RationalSusceptibility {
        signature: k.signature.clone(),
        terms: k.terms.clone(),
        constant: c(0.0, 0.0),
    })
}

/// `Ξ(s) = S − C (sI − A)⁻¹ C† S`.
pub fn linear_transfer(model: &LinearModel, s: Complex64) -> Result<DMatrix<Complex64>> {
    let r = model.modes();
    if r == 0 {
        return Ok(model.scattering.clone());
    }
    let a = model.drift();
    let m = DMatrix::<Complex64>::identity(r, r) * s - &a;
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let lu = m.lu();
    let u = lu.u();
    if (0..r).any(|i| u[(i, i)].norm() <= 1e-13 * scale) {
        return Err(Error::SingularResolvent { s: s.to_string() });
    }
    let rhs = model.coupling.adjoint() * &model.scattering;
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularResolvent { s: s.to_string() })?;
    Ok(&model.scattering - &model.coupling * x)
}

/// Susceptibility evaluation tree.
#[derive(Clone, Debug)]
pub enum Susceptibility {
    Rational(Arc<RationalSusceptibility>),
    Sum(Arc<Vec<Susceptibility>>),
    /// Downstream evaluated at grouped frequency sums times the upstream
    /// factors of each group.
    Cascade(Arc<Cascade>),
    /// `inner(ω₁…ωₙ) ∏ gains[k](ωₖ)`.
    InputFilter(Arc<InputFilter>),
    /// `gain(ω₁+⋯+ωₙ) inner(ω₁…ωₙ)`.
    OutputFilter(Arc<OutputFilter>),
}

#[derive(Clone, Debug)]
pub struct Cascade {
    pub downstream: Susceptibility,
    pub upstream: Vec<Susceptibility>,
    pub groups: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct InputFilter {
    pub inner: Susceptibility,
    pub gains: Vec<Susceptibility>,
}

#[derive(Clone, Debug)]
pub struct OutputFilter {
    pub gain: Susceptibility,
    pub inner: Susceptibility,
}

impl Susceptibility {
    pub fn rational(r: RationalSusceptibility) -> Self {
        Susceptibility::Rational(Arc::new(r))
    }

    pub fn sum(parts: Vec<Susceptibility>) -> Self {
        if parts.len() == 1 {
            return parts.into_iter().next().unwrap();
        }
        Susceptibility::Sum(Arc::new(parts))
    }

    pub fn eval(&self, omegas: &[f64]) -> Complex64 {
        match self {
            Susceptibility::Rational(r) => r.eval(omegas),
            Susceptibility::Sum(parts) => parts.iter().map(|p| p.eval(omegas)).sum(),
            Susceptibility::Cascade(cas) => {
                let mut grouped = Vec::with_capacity(cas.groups.len());
                let mut product = c(1.0, 0.0);
                let mut start = 0;
                for (up, &len) in cas.upstream.iter().zip(&cas.groups) {
                    let slice = &omegas[start..start + len];
                    grouped.push(slice.iter().sum::<f64>());
                    product *= up.eval(slice);
                    start += len;
                }
                if product == c(0.0, 0.0) {
                    return product;
                }
                cas.downstream.eval(&grouped) * product
            }
            Susceptibility::InputFilter(f) => {
                let mut v = f.inner.eval(omegas);
                for (g, w) in f.gains.iter().zip(omegas) {
                    v *= g.eval(std::slice::from_ref(w));
                }
                v
            }
            Susceptibility::OutputFilter(f) => {
                let total: f64 = omegas.iter().sum();
                f.gain.eval(&[total]) * f.inner.eval(omegas)
            }
        }
    }
}

/// All susceptibilities of a component or network, keyed by order and
/// signature. Absent signatures are zero.
#[derive(Clone, Debug)]
pub struct SusceptibilitySet {
    pub ports: usize,
    pub orders: BTreeMap<usize, BTreeMap<KernelSignature, Susceptibility>>,
    pub feedthrough: DMatrix<Complex64>,
}

impl SusceptibilitySet {
    pub fn empty(ports: usize, feedthrough: DMatrix<Complex64>) -> Self {
        Self {
            ports,
            orders: BTreeMap::new(),
            feedthrough,
        }
    }

    /// Static component `S` with constant order-1 entries.
    pub fn from_feedthrough(s: DMatrix<Complex64>) -> Self {
        let m = s.nrows();
        let mut set = Self::empty(m, s.clone());
        for j in 0..m {
            for k in 0..m {
                let v = s[(j, k)];
                if v == c(0.0, 0.0) {
                    continue;
                }
                for (sign, val) in [(Sign::Minus, v), (Sign::Plus, v.conj())] {
                    let sig = KernelSignature::new(j, sign, vec![(k, sign)]);
                    set.insert(Susceptibility::rational(RationalSusceptibility::constant(sig.clone(), val)), sig);
                }
            }
        }
        set
    }

    /// `m` straight lines.
    pub fn identity(ports: usize) -> Self {
        Self::from_feedthrough(DMatrix::identity(ports, ports))
    }

    pub fn insert(&mut self, s: Susceptibility, sig: KernelSignature) {
        self.orders.entry(sig.order()).or_default().insert(sig, s);
    }

    pub fn get(&self, sig: &KernelSignature) -> Option<&Susceptibility> {
        self.orders.get(&sig.order()).and_then(|m| m.get(sig))
    }

    pub fn order(&self, n: usize) -> impl Iterator<Item = (&KernelSignature, &Susceptibility)> {
        self.orders.get(&n).into_iter().flat_map(|m| m.iter())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&KernelSignature, &Susceptibility)> {
        self.orders.values().flat_map(|m| m.iter())
    }

    pub fn len(&self) -> usize {
        self.orders.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_order(&self) -> usize {
        self.orders
            .iter()
            .filter(|(_, m)| !m.is_empty())
            .map(|(&n, _)| n)
            .max()
            .unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.max_order() <= 1
    }

    /// Value of an entry; zero when the signature is absent.
    pub fn eval(&self, sig: &KernelSignature, omegas: &[f64]) -> Complex64 {
        self.get(sig).map_or(c(0.0, 0.0), |s| s.eval(omegas))
    }

    /// Unitarity of the feedthrough; amplifiers violate it.
    pub fn feedthrough_is_unitary(&self, tol: f64) -> bool {
        let m = self.feedthrough.nrows();
        (&self.feedthrough * self.feedthrough.adjoint() - DMatrix::<Complex64>::identity(m, m)).camax() <= tol
    }
}

fn rational_entry(expander: &KernelExpander, sys: &BilinearSystem, sig: &KernelSignature) -> Result<RationalSusceptibility> {
    let kernel = expander.kernel(sig)?;
    let mut r = fourier_kernel(&kernel)?;
    if sig.order() == 1 {
        let (port, sign) = sig.inputs[0];
        if sign == sig.out_sign {
            let s = sys.scattering[(sig.out_port, port)];
            r.constant = if sign.is_plus() { s.conj() } else { s };
        }
    }
    Ok(r)
}

/// Susceptibility of a single signature, feedthrough included.
pub fn signature_susceptibility(sys: &BilinearSystem, sig: &KernelSignature) -> Result<RationalSusceptibility> {
    sig.check(sys.ports(), usize::MAX)?;
    let opts = KernelOptions {
        max_order: sig.order(),
        ..KernelOptions::default()
    };
    let expander = KernelExpander::new(sys, &opts)?;
    rational_entry(&expander, sys, sig)
}

/// Susceptibilities of every signature up to `max_order`; order-1 entries
/// carry the feedthrough as their constant.
pub fn susceptibility_set(sys: &BilinearSystem, max_order: usize) -> Result<SusceptibilitySet> {
    let opts = KernelOptions {
        max_order: max_order.max(1),
        ..KernelOptions::default()
    };
    let expander = KernelExpander::new(sys, &opts)?;
    let ports = sys.ports();
    let mut set = SusceptibilitySet::empty(ports, sys.scattering.clone());
    for n in 1..=max_order {
        for sig in KernelSignature::enumerate(ports, n) {
            let r = rational_entry(&expander, sys, &sig)?;
            if !r.is_zero() {
                set.insert(Susceptibility::rational(r), sig);
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bilinear, kerr_cavity, linear_component, InitialState};

    fn sig(s: &str) -> KernelSignature {
        s.parse().unwrap()
    }

    #[test]
    fn first_order_fourier() {
        let (g, w) = (0.2, 1.0);
        let k = ExpSumKernel {
            signature: sig("-:-"),
            terms: vec![ExpTerm {
                coeff: c(-g, 0.0),
                rates: vec![c(g / 2.0, w)],
            }],
        };
        let r = fourier_kernel(&k).unwrap();
        for om in [-1.0, 0.0, 0.37] {
            let expected = c(-g, 0.0) / c(g / 2.0, w + om);
            assert!((r.eval(&[om]) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_kernel_is_zero() {
        let r = fourier_kernel(&ExpSumKernel::zero(sig("-:-+-"))).unwrap();
        assert!(r.is_zero());
        assert_eq!(r.eval(&[0.1, 0.2, 0.3]), c(0.0, 0.0));
    }

    #[test]
    fn dc_limit_of_product() {
        let rates = vec![c(0.3, 1.0), c(0.2, 0.0), c(0.1, -1.0)];
        let k = ExpSumKernel {
            signature: sig("-:-+-"),
            terms: vec![ExpTerm {
                coeff: c(0.5, -0.25),
                rates: rates.clone(),
            }],
        };
        let v = fourier_kernel(&k).unwrap().eval(&[0.0, 0.0, 0.0]);
        assert!((v - c(0.5, -0.25) / (rates[0] * rates[1] * rates[2])).norm() < 1e-15);
    }

    #[test]
    fn non_decaying_kernel_is_rejected() {
        let k = ExpSumKernel {
            signature: sig("-:-"),
            terms: vec![ExpTerm {
                coeff: c(1.0, 0.0),
                rates: vec![c(0.0, 1.0)],
            }],
        };
        assert!(matches!(fourier_kernel(&k), Err(Error::NonDecayingKernel { .. })));
    }

    #[test]
    fn cavity_transfer_at_resonance() {
        let cav = LinearModel::cavity(1.0, 0.2).unwrap();
        let xi = linear_transfer(&cav, c(0.0, -1.0)).unwrap();
        assert!((xi[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-14);
        let far = linear_transfer(&cav, c(1e9, 0.0)).unwrap();
        assert!((far[(0, 0)] - c(1.0, 0.0)).norm() < 1e-8);
        assert!(matches!(linear_transfer(&cav, c(-0.1, -1.0)), Err(Error::SingularResolvent { .. })));
    }

    #[test]
    fn beam_splitter_transfer_is_constant() {
        let bs = LinearModel::rotation_beam_splitter(0.3).unwrap();
        let xi = linear_transfer(&bs, c(0.2, 5.0)).unwrap();
        assert_eq!(xi, bs.scattering);
    }

    #[test]
    fn kerr_set_has_no_second_order() {
        let sys = build_bilinear(&kerr_cavity(1.0, 0.01, 0.2).unwrap(), &InitialState::Vacuum).unwrap();
        let set = susceptibility_set(&sys, 3).unwrap();
        assert_eq!(set.order(2).count(), 0);
        assert!(set.order(3).count() > 0);
        let v = set.eval(&sig("-:-"), &[0.3]);
        let expected = c(1.0, 0.0) - c(0.2, 0.0) / c(0.1, 1.3);
        assert!((v - expected).norm() < 1e-12);
    }

    #[test]
    fn amplifier_set_is_constant() {
        let amp = linear_component(&LinearModel::amplifier(4.0).unwrap()).unwrap();
        let set = susceptibility_set(&amp, 3).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.eval(&sig("-:-"), &[0.7]), c(2.0, 0.0));
        assert_eq!(set.eval(&sig("+:+"), &[-0.7]), c(2.0, 0.0));
        assert!(!set.feedthrough_is_unitary(1e-10));
    }

    #[test]
    fn feedthrough_set_matches_identity() {
        let id = SusceptibilitySet::identity(2);
        assert_eq!(id.len(), 4);
        assert_eq!(id.eval(&sig("-1:-1"), &[0.2]), c(1.0, 0.0));
        assert_eq!(id.eval(&sig("-1:-0"), &[0.2]), c(0.0, 0.0));
        assert!(id.is_linear());
    }
}
