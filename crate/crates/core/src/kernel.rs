//! Time-domain Volterra kernels.
//!
//! The order-`n` kernel with output sign `−` on port `j` is
//!
//! ```text
//! k(τ₁,…,τₙ) = l_j e^{Aτ₁} B₁ e^{Aτ₂} B₂ ⋯ e^{Aτₙ} Bₙ x₀
//! ```
//!
//! where `τ₁` is the interval next to the readout and `Bₖ` is the input
//! matrix of the k-th signature entry. Kernels with output sign `+` follow
//! from `k⁺_s = conj(k⁻_{−s})`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigen_decompose, expm_bounded, DEFAULT_CONDITION_BOUND, DEFAULT_EXPM_BOUND};
use crate::model::BilinearSystem;

/// Default maximal kernel order.
pub const DEFAULT_MAX_ORDER: usize = 3;

/// Relative pruning threshold for symbolic kernel terms.
pub const TERM_PRUNE: f64 = 1e-13;

/// Terms that cancel to this fraction of their summed magnitudes are
/// rounding residue of exactly vanishing contributions.
const NOISE_FLOOR: f64 = 1e-10;

/// `−` selects the field `b` (amplitude `β`), `+` its adjoint (`β*`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Sign::Plus
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }

    /// `β` or `β*`.
    pub fn apply(self, beta: Complex64) -> Complex64 {
        match self {
            Sign::Minus => beta,
            Sign::Plus => beta.conj(),
        }
    }
}

/// Output line and ordered input lines of a kernel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KernelSignature {
    pub out_port: usize,
    pub out_sign: Sign,
    pub inputs: Vec<(usize, Sign)>,
}

impl KernelSignature {
    pub fn new(out_port: usize, out_sign: Sign, inputs: Vec<(usize, Sign)>) -> Self {
        Self {
            out_port,
            out_sign,
            inputs,
        }
    }

    /// Single-port signature from signs only.
    pub fn single_port(out_sign: Sign, inputs: &[Sign]) -> Self {
        Self::new(0, out_sign, inputs.iter().map(|&s| (0, s)).collect())
    }

    pub fn order(&self) -> usize {
        self.inputs.len()
    }

    /// Flip every sign: the signature of the conjugate kernel.
    pub fn conjugate(&self) -> Self {
        Self::new(
            self.out_port,
            self.out_sign.flip(),
            self.inputs.iter().map(|&(p, s)| (p, s.flip())).collect(),
        )
    }

    pub fn check(&self, ports: usize, max_order: usize) -> Result<()> {
        let n = self.order();
        if n == 0 || n > max_order {
            return Err(Error::Signature(format!("order {n} outside 1..={max_order}")));
        }
        if self.out_port >= ports || self.inputs.iter().any(|&(p, _)| p >= ports) {
            return Err(Error::Signature(format!("{self} references a port outside 0..{ports}")));
        }
        Ok(())
    }

    /// All signatures of a given order on `ports` ports.
    pub fn enumerate(ports: usize, order: usize) -> Vec<KernelSignature> {
        let lines: Vec<(usize, Sign)> = (0..ports).flat_map(|p| [(p, Sign::Minus), (p, Sign::Plus)]).collect();
        let total = lines.len().pow(order as u32);
        let mut out = Vec::with_capacity(lines.len() * total);
        for &(op, os) in &lines {
            for mut code in 0..total {
                let mut inputs = vec![lines[0]; order];
                for slot in inputs.iter_mut().rev() {
                    *slot = lines[code % lines.len()];
                    code /= lines.len();
                }
                out.push(KernelSignature::new(op, os, inputs));
            }
        }
        out
    }
}

/// Written as `out:inputs`, e.g. `-:-+-` or, with ports, `-0:-0+1-0`.
impl fmt::Display for KernelSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}:", self.out_sign.symbol(), self.out_port)?;
        for (p, s) in &self.inputs {
            write!(f, "{}{}", s.symbol(), p)?;
        }
        Ok(())
    }
}

impl FromStr for KernelSignature {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Signature(format!("cannot parse `{text}`: {why}"));
        let (out, ins) = text.trim().split_once(':').ok_or_else(|| bad("missing `:`"))?;
        let parse_lines = |s: &str| -> Result<Vec<(usize, Sign)>> {
            let mut lines = Vec::new();
            let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
            let mut i = 0;
            while i < chars.len() {
                let sign = match chars[i] {
                    '-' => Sign::Minus,
                    '+' => Sign::Plus,
                    c => return Err(bad(&format!("unexpected `{c}`"))),
                };
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let port = if start == i {
                    0
                } else {
                    chars[start..i].iter().collect::<String>().parse().map_err(|_| bad("bad port"))?
                };
                lines.push((port, sign));
            }
            Ok(lines)
        };
        let out = parse_lines(out)?;
        if out.len() != 1 {
            return Err(bad("exactly one output line expected"));
        }
        let inputs = parse_lines(ins)?;
        if inputs.is_empty() {
            return Err(bad("no input lines"));
        }
        Ok(KernelSignature::new(out[0].0, out[0].1, inputs))
    }
}

/// One separable term `coeff · ∏ₖ exp(−rates[k] τₖ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpTerm {
    pub coeff: Complex64,
    pub rates: Vec<Complex64>,
}

/// Kernel as a sum of separable exponentials on `τₖ ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSumKernel {
    pub signature: KernelSignature,
    pub terms: Vec<ExpTerm>,
}

impl ExpSumKernel {
    pub fn zero(signature: KernelSignature) -> Self {
        Self {
            signature,
            terms: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.signature.order()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, taus: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let e: Complex64 = t.rates.iter().zip(taus).map(|(l, &tau)| -l * tau).sum();
                t.coeff * e.exp()
            })
            .sum()
    }

    /// Kernel of the conjugate signature.
    pub fn conjugate(&self) -> Self {
        Self {
            signature: self.signature.conjugate(),
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coeff: t.coeff.conj(),
                    rates: t.rates.iter().map(|r| r.conj()).collect(),
                })
                .collect(),
        }
    }

    /// Smallest real part over all rates, `None` without terms.
    pub fn min_decay(&self) -> Option<f64> {
        self.terms
            .iter()
            .flat_map(|t| t.rates.iter().map(|r| r.re))
            .reduce(f64::min)
    }

    /// Sort terms by rates and merge those with equal rates.
    pub fn normalize(&mut self, tol: f64) {
        let raw = self.terms.drain(..).map(|t| {
            let m = t.coeff.norm();
            (t, m)
        });
        self.terms = merge_terms(raw.collect(), tol, 0.0);
    }
}

/// Merge terms with equal rates and drop those that cancelled to within
/// `noise` of their accumulated magnitude or fell below the relative
/// pruning threshold.
fn merge_terms(mut raw: Vec<(ExpTerm, f64)>, tol: f64, noise: f64) -> Vec<ExpTerm> {
    let key = |t: &ExpTerm| t.rates.iter().flat_map(|r| [r.re, r.im]).collect::<Vec<f64>>();
    raw.sort_by(|a, b| key(&a.0).partial_cmp(&key(&b.0)).unwrap_or(std::cmp::Ordering::Equal));
    let mut merged: Vec<(ExpTerm, f64)> = Vec::with_capacity(raw.len());
    for (t, m) in raw {
        match merged.last_mut() {
            Some((last, mag))
                if last
                    .rates
                    .iter()
                    .zip(&t.rates)
                    .all(|(a, b)| (a - b).norm() <= tol * (1.0 + a.norm())) =>
            {
                last.coeff += t.coeff;
                *mag += m;
            }
            _ => merged.push((t, m)),
        }
    }
    let max = merged.iter().map(|(t, _)| t.coeff.norm()).fold(0.0, f64::max);
    merged
        .into_iter()
        .filter(|(t, mag)| {
            let c = t.coeff.norm();
            c > 0.0 && c > TERM_PRUNE * max && c > noise * mag
        })
        .map(|(t, _)| t)
        .collect()
}

/// Options for kernel evaluation.
#[derive(Clone, Copy, Debug)]
pub struct KernelOptions {
    pub max_order: usize,
    pub expm_bound: f64,
    pub condition_bound: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            expm_bound: DEFAULT_EXPM_BOUND,
            condition_bound: DEFAULT_CONDITION_BOUND,
        }
    }
}

pub fn eval_kernel(sys: &BilinearSystem, sig: &KernelSignature, taus: &[f64]) -> Result<Complex64> {
    eval_kernel_with(sys, sig, taus, &KernelOptions::default())
}

pub fn eval_kernel_with(sys: &BilinearSystem, sig: &KernelSignature, taus: &[f64], opts: &KernelOptions) -> Result<Complex64> {
    sig.check(sys.ports(), opts.max_order)?;
    if taus.len() != sig.order() {
        return Err(Error::Signature(format!("{} needs {} delays, got {}", sig, sig.order(), taus.len())));
    }
    if sig.out_sign.is_plus() {
        return Ok(eval_kernel_with(sys, &sig.conjugate(), taus, opts)?.conj());
    }
    let mut v: DVector<Complex64> = sys.initial.clone();
    for (k, &(port, sign)) in sig.inputs.iter().enumerate().rev() {
        v = sys.input(port, sign.is_plus()) * v;
        v = expm_bounded(&sys.drift, taus[k], opts.expm_bound)? * v;
    }
    Ok((sys.readout.row(sig.out_port) * v)[(0, 0)])
}

/// Zero entries below `rel` times the largest entry.
fn chop<R: nalgebra::Dim, C: nalgebra::Dim>(
    mut m: nalgebra::OMatrix<Complex64, R, C>,
    rel: f64,
) -> nalgebra::OMatrix<Complex64, R, C>
where
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<R, C>,
{
    let cut = rel * m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in m.iter_mut() {
        if z.norm() <= cut {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    m
}

/// Eigen-expansion of a drift matrix shared by all signatures of a system.
pub struct KernelExpander<'a> {
    sys: &'a BilinearSystem,
    rates: Vec<Complex64>,
    readout: DMatrix<Complex64>,
    inputs_minus: Vec<DMatrix<Complex64>>,
    inputs_plus: Vec<DMatrix<Complex64>>,
    initial_minus: Vec<DVector<Complex64>>,
    initial_plus: Vec<DVector<Complex64>>,
    max_order: usize,
    noise_floor: f64,
}

impl<'a> KernelExpander<'a> {
    pub fn new(sys: &'a BilinearSystem, opts: &KernelOptions) -> Result<Self> {
        let eig = eigen_decompose(&sys.drift, opts.condition_bound)?;
        let v = &eig.vectors;
        let w = &eig.inverse;
        let ports = sys.ports();
        let floor = 1e-14 * eig.condition;
        Ok(Self {
            sys,
            rates: eig.values.iter().map(|l| -l).collect(),
            readout: chop(&sys.readout * v, floor),
            inputs_minus: (0..ports).map(|p| chop(w * &sys.input_minus[p] * v, floor)).collect(),
            inputs_plus: (0..ports).map(|p| chop(w * &sys.input_plus[p] * v, floor)).collect(),
            initial_minus: (0..ports).map(|p| chop(w * (&sys.input_minus[p] * &sys.initial), floor)).collect(),
            initial_plus: (0..ports).map(|p| chop(w * (&sys.input_plus[p] * &sys.initial), floor)).collect(),
            max_order: opts.max_order,
            noise_floor: NOISE_FLOOR,
        })
    }

    pub fn kernel(&self, sig: &KernelSignature) -> Result<ExpSumKernel> {
        sig.check(self.sys.ports(), self.max_order)?;
        if sig.out_sign.is_plus() {
            let mut k = self.kernel(&sig.conjugate())?.conjugate();
            k.signature = sig.clone();
            return Ok(k);
        }
        let n = self.rates.len();
        let order = sig.order();
        let factor = |pos: usize, from: usize, to: usize| -> Complex64 {
            let (p, s) = sig.inputs[pos];
            if s.is_plus() {
                self.inputs_plus[p][(from, to)]
            } else {
                self.inputs_minus[p][(from, to)]
            }
        };
        let (lp, ls) = sig.inputs[order - 1];
        let last = if ls.is_plus() { &self.initial_plus[lp] } else { &self.initial_minus[lp] };
        let row = self.readout.row(sig.out_port);

        // Each term carries the sum of |products| feeding it, an estimate of
        // its rounding floor.
        let mut raw: Vec<(ExpTerm, f64)> = Vec::new();
        let mut idx = vec![0usize; order];
        'outer: loop {
            let mut coeff = row[idx[0]];
            for pos in 0..order - 1 {
                if coeff.norm() == 0.0 {
                    break;
                }
                coeff *= factor(pos, idx[pos], idx[pos + 1]);
            }
            coeff *= last[idx[order - 1]];
            if coeff.norm() != 0.0 {
                raw.push((
                    ExpTerm {
                        coeff,
                        rates: idx.iter().map(|&k| self.rates[k]).collect(),
                    },
                    coeff.norm(),
                ));
            }
            for pos in (0..order).rev() {
                idx[pos] += 1;
                if idx[pos] < n {
                    continue 'outer;
                }
                idx[pos] = 0;
            }
            break;
        }
        Ok(ExpSumKernel {
            signature: sig.clone(),
            terms: merge_terms(raw, 1e-12, self.noise_floor),
        })
    }
}

pub fn symbolic_kernel(sys: &BilinearSystem, sig: &KernelSignature) -> Result<ExpSumKernel> {
    KernelExpander::new(sys, &KernelOptions::default())?.kernel(sig)
}

/// Kerr cavity parameters.
#[derive(Clone, Copy, Debug)]
pub struct KerrParams {
    pub omega_a: f64,
    pub chi: f64,
    pub gamma: f64,
}

/// Optomechanical parameters.
#[derive(Clone, Copy, Debug)]
pub struct OptomechParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn closed_form_dispatch(
    sig: &KernelSignature,
    build: impl Fn(&KernelSignature) -> Vec<ExpTerm>,
) -> ExpSumKernel {
    if sig.out_sign.is_plus() {
        let conj = sig.conjugate();
        let mut k = ExpSumKernel {
            signature: conj.clone(),
            terms: build(&conj),
        }
        .conjugate();
        k.signature = sig.clone();
        k
    } else {
        ExpSumKernel {
            signature: sig.clone(),
            terms: build(sig),
        }
    }
}

/// Published Kerr-cavity kernels of orders 1 and 3 (output port 0).
///
/// Order 1: `k₋(τ) = −γ e^{−(γ/2+iω)τ}`. Order 3, input signs `(±,−,+)`
/// and `(±,+,−)`:
///
/// ```text
/// k(±,−,+) =  P e^{−γ/2(τ₁+τ₃) − iω(τ₁−τ₃) − γτ₂} (1 − e^{−γτ₁})
/// k(±,+,−) = −P e^{−(γ/2+iω)(τ₁+τ₃) − γτ₂} (1 − e^{−γτ₁})
/// P = 4iγ²χ² / (−γ + iχ)
/// ```
///
/// Every other signature is zero. These expressions are reproduced as
/// published; they are reference values, not the builder's output.
pub fn closed_form_kerr(sig: &KernelSignature, p: &KerrParams) -> ExpSumKernel {
    let KerrParams { omega_a: w, chi, gamma: g } = *p;
    closed_form_dispatch(sig, |sig| {
        if sig.out_port != 0 || sig.inputs.iter().any(|&(port, _)| port != 0) {
            return vec![];
        }
        let signs: Vec<Sign> = sig.inputs.iter().map(|&(_, s)| s).collect();
        let a = c(g / 2.0, w);
        let a_bar = c(g / 2.0, -w);
        let pref = c(0.0, 4.0 * g * g * chi * chi) / c(-g, chi);
        match signs.as_slice() {
            [Sign::Minus] => vec![ExpTerm {
                coeff: c(-g, 0.0),
                rates: vec![a],
            }],
            [_, Sign::Minus, Sign::Plus] => vec![
                ExpTerm {
                    coeff: pref,
                    rates: vec![a, c(g, 0.0), a_bar],
                },
                ExpTerm {
                    coeff: -pref,
                    rates: vec![a + g, c(g, 0.0), a_bar],
                },
            ],
            [_, Sign::Plus, Sign::Minus] => vec![
                ExpTerm {
                    coeff: -pref,
                    rates: vec![a, c(g, 0.0), a],
                },
                ExpTerm {
                    coeff: pref,
                    rates: vec![a + g, c(g, 0.0), a],
                },
            ],
            _ => vec![],
        }
    })
}

/// Published optomechanical kernels on the optical port (port 0).
///
/// Order 1: `−γa e^{−γᵃ₊τ}`. Order 3, input signs `(−,±,∓)`:
///
/// ```text
/// γa² g² e^{−γᵃ_± τ₃} (e^{−γᵃ₋τ₁} + e^{−γᵃ₊τ₁})/(γᵃ₊ − γᵃ₋) · (e^{−γaτ₂} − e^{−γᵇ₋τ₂})/(γa − γᵇ₋)
/// ```
///
/// with `γᵃ± = γa/2 ± iωa` and `γᵇ₋ = γb/2 − iωb`.
pub fn closed_form_optomech(sig: &KernelSignature, p: &OptomechParams) -> ExpSumKernel {
    let OptomechParams {
        omega_a,
        omega_b,
        g,
        gamma_a,
        gamma_b,
    } = *p;
    closed_form_dispatch(sig, |sig| {
        if sig.out_port != 0 || sig.inputs.iter().any(|&(port, _)| port != 0) {
            return vec![];
        }
        let signs: Vec<Sign> = sig.inputs.iter().map(|&(_, s)| s).collect();
        let ga_plus = c(gamma_a / 2.0, omega_a);
        let ga_minus = c(gamma_a / 2.0, -omega_a);
        let gb_minus = c(gamma_b / 2.0, -omega_b);
        let ga = c(gamma_a, 0.0);
        match signs.as_slice() {
            [Sign::Minus] => vec![ExpTerm {
                coeff: c(-gamma_a, 0.0),
                rates: vec![ga_plus],
            }],
            [Sign::Minus, mid, last] if *mid == last.flip() => {
                let tau3 = if mid.is_plus() { ga_plus } else { ga_minus };
                let pref = c(gamma_a * gamma_a * g * g, 0.0) / ((ga_plus - ga_minus) * (ga - gb_minus));
                let mut terms = Vec::with_capacity(4);
                for r1 in [ga_minus, ga_plus] {
                    for (r2, s) in [(ga, 1.0), (gb_minus, -1.0)] {
                        terms.push(ExpTerm {
                            coeff: pref * s,
                            rates: vec![r1, r2, tau3],
                        });
                    }
                }
                terms
            }
            _ => vec![],
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bilinear, kerr_cavity, InitialState};

    fn kerr() -> BilinearSystem {
        build_bilinear(&kerr_cavity(1.0, 0.01, 0.2).unwrap(), &InitialState::Vacuum).unwrap()
    }

    #[test]
    fn signature_round_trip() {
        let s: KernelSignature = "-:-+-".parse().unwrap();
        assert_eq!(s, KernelSignature::single_port(Sign::Minus, &[Sign::Minus, Sign::Plus, Sign::Minus]));
        assert_eq!(s.to_string(), "-0:-0+0-0");
        let t: KernelSignature = "+1:-0+1".parse().unwrap();
        assert_eq!(t.out_port, 1);
        assert_eq!(t.inputs, vec![(0, Sign::Minus), (1, Sign::Plus)]);
        assert_eq!(t.to_string().parse::<KernelSignature>().unwrap(), t);
        assert!("-".parse::<KernelSignature>().is_err());
        assert!("-:".parse::<KernelSignature>().is_err());
        assert!("-+:-".parse::<KernelSignature>().is_err());
        assert!("-:x".parse::<KernelSignature>().is_err());
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(KernelSignature::enumerate(1, 1).len(), 4);
        assert_eq!(KernelSignature::enumerate(1, 3).len(), 16);
        assert_eq!(KernelSignature::enumerate(2, 2).len(), 64);
    }

    #[test]
    fn order_one_at_zero_delay() {
        let sig = KernelSignature::single_port(Sign::Minus, &[Sign::Minus]);
        let k = eval_kernel(&kerr(), &sig, &[0.0]).unwrap();
        assert!((k - c(-0.2, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn symbolic_order_one_is_single_term() {
        let sig = KernelSignature::single_port(Sign::Minus, &[Sign::Minus]);
        let k = symbolic_kernel(&kerr(), &sig).unwrap();
        assert_eq!(k.terms.len(), 1);
        assert!((k.terms[0].coeff - c(-0.2, 0.0)).norm() < 1e-12);
        assert!((k.terms[0].rates[0] - c(0.1, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn plus_output_is_conjugate() {
        let sys = kerr();
        let sig: KernelSignature = "+:+-+".parse().unwrap();
        let taus = [0.3, 1.1, 2.0];
        let a = eval_kernel(&sys, &sig, &taus).unwrap();
        let b = eval_kernel(&sys, &sig.conjugate(), &taus).unwrap().conj();
        assert_eq!(a, b);
        let s = symbolic_kernel(&sys, &sig).unwrap().eval(&taus);
        assert!((a - s).norm() < 1e-12);
    }

    #[test]
    fn delay_count_is_checked() {
        let sig = KernelSignature::single_port(Sign::Minus, &[Sign::Minus]);
        assert!(matches!(eval_kernel(&kerr(), &sig, &[0.0, 1.0]), Err(Error::Signature(_))));
        let bad = KernelSignature::new(2, Sign::Minus, vec![(0, Sign::Minus)]);
        assert!(matches!(eval_kernel(&kerr(), &bad, &[0.0]), Err(Error::Signature(_))));
    }

    #[test]
    fn closed_form_kerr_first_order() {
        let p = KerrParams {
            omega_a: 1.0,
            chi: 0.01,
            gamma: 0.2,
        };
        let sig = KernelSignature::single_port(Sign::Minus, &[Sign::Minus]);
        let tau = 5.0 / 0.2;
        let v = closed_form_kerr(&sig, &p).eval(&[tau]);
        let expected = c(-0.2, 0.0) * (-2.5f64).exp() * c(0.0, -5.0 / 0.2).exp();
        assert!((v - expected).norm() < 1e-15);
    }

    #[test]
    fn closed_form_kerr_vanishes_at_zero_first_delay() {
        let p = KerrParams {
            omega_a: 1.0,
            chi: 0.01,
            gamma: 0.2,
        };
        for s in ["-:--+", "-:+-+", "-:-+-", "-:++-"] {
            let k = closed_form_kerr(&s.parse().unwrap(), &p);
            assert_eq!(k.terms.len(), 2);
            assert!(k.eval(&[0.0, 0.7, 1.3]).norm() < 1e-18);
        }
    }

    #[test]
    fn closed_form_optomech_vanishes_at_zero_middle_delay() {
        let p = OptomechParams {
            omega_a: 1.0,
            omega_b: 0.01,
            g: 1e-4,
            gamma_a: 0.2,
            gamma_b: 1e-4,
        };
        for s in ["-:-+-", "-:--+"] {
            let k = closed_form_optomech(&s.parse().unwrap(), &p);
            assert_eq!(k.terms.len(), 4);
            assert!(k.eval(&[0.4, 0.0, 2.0]).norm() < 1e-18);
        }
        assert!(closed_form_optomech(&"-:---".parse().unwrap(), &p).is_zero());
    }

    #[test]
    fn normalize_merges_equal_rates() {
        let mut k = ExpSumKernel {
            signature: "-:-".parse().unwrap(),
            terms: vec![
                ExpTerm {
                    coeff: c(1.0, 0.0),
                    rates: vec![c(1.0, 0.0)],
                },
                ExpTerm {
                    coeff: c(-1.0, 0.0),
                    rates: vec![c(1.0, 0.0)],
                },
                ExpTerm {
                    coeff: c(2.0, 0.0),
                    rates: vec![c(0.5, 0.0)],
                },
            ],
        };
        k.normalize(1e-12);
        assert_eq!(k.terms.len(), 1);
        assert_eq!(k.terms[0].coeff, c(2.0, 0.0));
    }
}
