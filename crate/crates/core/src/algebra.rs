//! Normal-ordered boson algebra.
//!
//! Every polynomial is kept in normal order (creation operators to the left
//! of annihilation operators, mode by mode). Products are rewritten with
//! `a_j a_k† = a_k† a_j + δ_jk`, which for a single mode gives the closed form
//!
//! ```text
//! a^q a†^p = Σ_k C(q,k) C(p,k) k! a†^(p-k) a^(q-k)
//! ```
//!
//! Coefficients are `Complex64`; the combinatorial factors stay exact in
//! floating point at the degrees used here.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Coefficients below this magnitude are dropped after every operation.
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// A normal-ordered product `Π_m a_m†^p a_m^q`.
///
/// Stored as one `(p, q)` pair per mode with trailing identity modes trimmed,
/// so the derived ordering is lexicographic by mode index then `(p, q)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    powers: Vec<(u32, u32)>,
}

impl Monomial {
    pub fn identity() -> Self {
        Self { powers: Vec::new() }
    }

    pub fn new(powers: Vec<(u32, u32)>) -> Self {
        let mut m = Self { powers };
        m.trim();
        m
    }

    /// `a_mode†^p a_mode^q` on a single mode.
    pub fn single(mode: usize, p: u32, q: u32) -> Self {
        let mut powers = vec![(0, 0); mode + 1];
        powers[mode] = (p, q);
        Self::new(powers)
    }

    pub fn annihilator(mode: usize) -> Self {
        Self::single(mode, 0, 1)
    }

    pub fn creator(mode: usize) -> Self {
        Self::single(mode, 1, 0)
    }

    fn trim(&mut self) {
        while self.powers.last() == Some(&(0, 0)) {
            self.powers.pop();
        }
    }

    pub fn powers(&self) -> &[(u32, u32)] {
        &self.powers
    }

    /// `(p, q)` for one mode; `(0, 0)` past the stored length.
    pub fn mode_powers(&self, mode: usize) -> (u32, u32) {
        self.powers.get(mode).copied().unwrap_or((0, 0))
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|(p, q)| p + q).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.powers.is_empty()
    }

    /// Number of modes the monomial touches (highest mode index + 1).
    pub fn span(&self) -> usize {
        self.powers.len()
    }

    pub fn dagger(&self) -> Self {
        Self {
            powers: self.powers.iter().map(|&(p, q)| (q, p)).collect(),
        }
    }

    /// Normal-ordered product `self · other` as a list of monomials with
    /// integer weights.
    pub fn product(&self, other: &Monomial) -> Vec<(Monomial, f64)> {
        let modes = self.span().max(other.span());
        let mut acc: Vec<(Vec<(u32, u32)>, f64)> = vec![(Vec::with_capacity(modes), 1.0)];
        for mode in 0..modes {
            let (p1, q1) = self.mode_powers(mode);
            let (p2, q2) = other.mode_powers(mode);
            let mode_terms = single_mode_product(p1, q1, p2, q2);
            let mut next = Vec::with_capacity(acc.len() * mode_terms.len());
            for (powers, w) in &acc {
                for &(pq, wk) in &mode_terms {
                    let mut np = powers.clone();
                    np.push(pq);
                    next.push((np, w * wk));
                }
            }
            acc = next;
        }
        acc.into_iter().map(|(p, w)| (Monomial::new(p), w)).collect()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * f64::from(n - i) / f64::from(i + 1);
    }
    r.round()
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// `(a†^p1 a^q1)(a†^p2 a^q2)` in normal order for one mode.
fn single_mode_product(p1: u32, q1: u32, p2: u32, q2: u32) -> Vec<((u32, u32), f64)> {
    (0..=q1.min(p2))
        .map(|k| {
            let w = binomial(q1, k) * binomial(p2, k) * factorial(k);
            ((p1 + p2 - k, q1 + q2 - k), w)
        })
        .collect()
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let mut first = true;
        for (mode, &(p, q)) in self.powers.iter().enumerate() {
            if p == 0 && q == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let name = mode_name(mode);
            if p > 0 {
                write!(f, "{name}†")?;
                if p > 1 {
                    write!(f, "^{p}")?;
                }
            }
            if q > 0 {
                write!(f, "{name}")?;
                if q > 1 {
                    write!(f, "^{q}")?;
                }
            }
        }
        Ok(())
    }
}

/// `a`, `b`, `c`, ... for modes 0, 1, 2, ...
pub fn mode_name(mode: usize) -> String {
    if mode < 26 {
        char::from(b'a' + mode as u8).to_string()
    } else {
        format!("m{mode}")
    }
}

/// Finite linear combination of normal-ordered monomials.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct OperatorPoly {
    terms: BTreeMap<Monomial, Complex64>,
}

impl OperatorPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::term(Monomial::identity(), Complex64::new(1.0, 0.0))
    }

    pub fn term(m: Monomial, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p.prune();
        p
    }

    pub fn annihilator(mode: usize) -> Self {
        Self::term(Monomial::annihilator(mode), Complex64::new(1.0, 0.0))
    }

    pub fn creator(mode: usize) -> Self {
        Self::term(Monomial::creator(mode), Complex64::new(1.0, 0.0))
    }

    /// `a_mode† a_mode`.
    pub fn number(mode: usize) -> Self {
        Self::term(Monomial::single(mode, 1, 1), Complex64::new(1.0, 0.0))
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Complex64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p.prune();
        p
    }

    fn add_term(&mut self, m: Monomial, c: Complex64) {
        *self.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_TOLERANCE);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Number of modes referenced by any term.
    pub fn span(&self) -> usize {
        self.terms.keys().map(Monomial::span).max().unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, v)| (m.clone(), v * c)))
    }

    pub fn dagger(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, v)| (m.dagger(), v.conj())))
    }

    /// Coefficient-wise check of `self = self†`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dagger();
        let diff = self - &d;
        diff.terms.values().all(|c| c.norm() <= tol)
    }

    /// Keep only the monomials accepted by `keep`.
    pub fn filter<F: Fn(&Monomial) -> bool>(&self, keep: F) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), *c)),
        )
    }

    /// Largest coefficient-wise distance to another polynomial.
    pub fn max_abs_diff(&self, other: &OperatorPoly) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coefficient(m)).norm());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("({:+.6}{:+.6}i)·{}", c.re, c.im, m))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Add for &OperatorPoly {
    type Output = OperatorPoly;
    fn add(self, rhs: &OperatorPoly) -> OperatorPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), *c);
        }
        out.prune();
        out
    }
}

impl Sub for &OperatorPoly {
    type Output = OperatorPoly;
    fn sub(self, rhs: &OperatorPoly) -> OperatorPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out.prune();
        out
    }
}

impl Neg for &OperatorPoly {
    type Output = OperatorPoly;
    fn neg(self) -> OperatorPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: &OperatorPoly) -> OperatorPoly {
        normal_order_product(self, rhs)
    }
}

impl Mul<Complex64> for &OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: Complex64) -> OperatorPoly {
        self.scale(rhs)
    }
}

impl Mul<f64> for &OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: f64) -> OperatorPoly {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// Product `a · b` rewritten into normal order.
pub fn normal_order_product(a: &OperatorPoly, b: &OperatorPoly) -> OperatorPoly {
    let mut out = OperatorPoly::zero();
    for (ma, ca) in &a.terms {
        for (mb, cb) in &b.terms {
            let c = ca * cb;
            for (m, w) in ma.product(mb) {
                out.add_term(m, c * w);
            }
        }
    }
    out.prune();
    out
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &OperatorPoly, b: &OperatorPoly) -> OperatorPoly {
    &normal_order_product(a, b) - &normal_order_product(b, a)
}

/// Deterministic part of the Heisenberg-Langevin equation for `x`:
///
/// ```text
/// −i[x, H] + Σ_j ½ ( L_j†[x, L_j] + [L_j†, x] L_j )
/// ```
pub fn heisenberg_generator(x: &OperatorPoly, h: &OperatorPoly, ls: &[OperatorPoly]) -> OperatorPoly {
    let minus_i = Complex64::new(0.0, -1.0);
    let mut drift = commutator(x, h).scale(minus_i);
    for l in ls {
        let ld = l.dagger();
        let left = normal_order_product(&ld, &commutator(x, l));
        let right = normal_order_product(&commutator(&ld, x), l);
        drift = &drift + &(&left + &right).scale(Complex64::new(0.5, 0.0));
    }
    drift
}

/// Input-coupling polynomials of channel `L`: the coefficient `[L†, x]` of
/// `b_in` and the coefficient `[x, L]` of `b_in†`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputCoupling {
    pub annihilation: OperatorPoly,
    pub creation: OperatorPoly,
}

/// One [`InputCoupling`] per channel in `ls`.
pub fn input_couplings(x: &OperatorPoly, ls: &[OperatorPoly]) -> Vec<InputCoupling> {
    ls.iter()
        .map(|l| InputCoupling {
            annihilation: commutator(&l.dagger(), x),
            creation: commutator(x, l),
        })
        .collect()
}
