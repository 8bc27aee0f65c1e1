//! Truncated bilinear moment systems.
//!
//! A component is described by its Hamiltonian and coupling polynomials
//! ([`ModelSpec`]). [`build_bilinear`] closes the set of moments reachable
//! from the output operators under the Heisenberg generator and the
//! input-coupling maps, discards everything above the truncation degree,
//! and assembles
//!
//! ```text
//! d⟨X⟩/dt = A ⟨X⟩ + Σ_k ( β_k B_−^(k) + β_k* B_+^(k) ) ⟨X⟩
//! ```
//!
//! for a coherent input with amplitudes `β_k` on port `k`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::algebra::{heisenberg_generator, input_couplings, Monomial, OperatorPoly};
use crate::error::{Error, Result};

/// Default maximal number of moments in a basis.
pub const DEFAULT_BASIS_CAP: usize = 4096;

/// Default truncation degree; supports third-order kernels.
pub const DEFAULT_TRUNCATION_DEGREE: u32 = 3;

const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Hamiltonian and coupling description of one component.
///
/// The total Hamiltonian is `h_linear + h_nonlinear` and channel `j`
/// couples through `l_linear[j] + l_nonlinear[j]`. `mu` records the
/// dimensionless size of the nonlinear part; it is metadata, not a
/// multiplier.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub modes: usize,
    pub h_linear: OperatorPoly,
    pub h_nonlinear: OperatorPoly,
    pub l_linear: Vec<OperatorPoly>,
    pub l_nonlinear: Vec<OperatorPoly>,
    pub mu: f64,
    pub scattering: DMatrix<Complex64>,
    pub truncation_degree: u32,
}

impl ModelSpec {
    pub fn ports(&self) -> usize {
        self.l_linear.len()
    }

    pub fn hamiltonian(&self) -> OperatorPoly {
        &self.h_linear + &self.h_nonlinear
    }

    /// Full coupling operator of every port.
    pub fn couplings(&self) -> Vec<OperatorPoly> {
        self.l_linear
            .iter()
            .enumerate()
            .map(|(j, l)| match self.l_nonlinear.get(j) {
                Some(nl) => l + nl,
                None => l.clone(),
            })
            .collect()
    }

    pub fn with_truncation_degree(mut self, degree: u32) -> Self {
        self.truncation_degree = degree;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.ports();
        if m == 0 {
            return Err(Error::Domain("a component needs at least one port".into()));
        }
        if self.l_nonlinear.len() > m {
            return Err(Error::Domain("more nonlinear couplings than ports".into()));
        }
        if self.h_linear.max_degree() > 2 {
            return Err(Error::Domain("linear Hamiltonian has degree above 2".into()));
        }
        if !self.h_linear.is_hermitian(HERMITIAN_TOL) || !self.h_nonlinear.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::Domain("Hamiltonian is not Hermitian".into()));
        }
        if self.l_linear.iter().any(|l| l.max_degree() > 1) {
            return Err(Error::Domain("linear coupling has degree above 1".into()));
        }
        check_unitary(&self.scattering, m)?;
        let h_deg = self.hamiltonian().max_degree();
        let l_deg = self.couplings().iter().map(OperatorPoly::max_degree).max().unwrap_or(0);
        // [a, H] has degree deg(H) - 1, which must fit in the basis.
        if self.truncation_degree < l_deg || self.truncation_degree + 1 < h_deg {
            return Err(Error::Domain(format!(
                "truncation degree {} cannot hold couplings of degree {} and Hamiltonian of degree {}",
                self.truncation_degree, l_deg, h_deg
            )));
        }
        let span = self
            .couplings()
            .iter()
            .map(OperatorPoly::span)
            .chain(std::iter::once(self.hamiltonian().span()))
            .max()
            .unwrap_or(0);
        if span > self.modes {
            return Err(Error::Domain(format!(
                "operators reference {span} modes but the spec declares {}",
                self.modes
            )));
        }
        Ok(())
    }
}

fn check_unitary(s: &DMatrix<Complex64>, ports: usize) -> Result<()> {
    if s.nrows() != ports || s.ncols() != ports {
        return Err(Error::Domain(format!(
            "scattering matrix is {}x{}, expected {ports}x{ports}",
            s.nrows(),
            s.ncols()
        )));
    }
    let dev = (s * s.adjoint() - DMatrix::<Complex64>::identity(ports, ports)).camax();
    if dev > UNITARY_TOL {
        return Err(Error::Domain(format!("scattering matrix is not unitary (deviation {dev:.3e})")));
    }
    Ok(())
}

/// Kerr cavity `H = ω a†a + χ a†²a²`, `L = √γ a`.
pub fn kerr_cavity(omega_a: f64, chi: f64, gamma: f64) -> Result<ModelSpec> {
    if !(gamma >= 0.0) || !omega_a.is_finite() || !chi.is_finite() {
        return Err(Error::Domain(format!("kerr cavity needs finite parameters and gamma >= 0, got gamma = {gamma}")));
    }
    let h_nonlinear = OperatorPoly::term(Monomial::single(0, 2, 2), cplx(chi, 0.0));
    Ok(ModelSpec {
        modes: 1,
        h_linear: &OperatorPoly::number(0) * omega_a,
        h_nonlinear,
        l_linear: vec![&OperatorPoly::annihilator(0) * gamma.sqrt()],
        l_nonlinear: vec![OperatorPoly::zero()],
        mu: if omega_a != 0.0 { chi / omega_a } else { 0.0 },
        scattering: DMatrix::identity(1, 1),
        truncation_degree: DEFAULT_TRUNCATION_DEGREE,
    })
}

/// Optomechanical cavity `H = ωa a†a + ωb b†b + g a†a (b + b†)` with the
/// optical port `√γa a` and the mechanical port `√γb b`.
pub fn optomech(omega_a: f64, omega_b: f64, g: f64, gamma_a: f64, gamma_b: f64) -> Result<ModelSpec> {
    if !(gamma_a >= 0.0) || !(gamma_b >= 0.0) {
        return Err(Error::Domain(format!(
            "optomechanical rates must be non-negative, got gamma_a = {gamma_a}, gamma_b = {gamma_b}"
        )));
    }
    if ![omega_a, omega_b, g].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("optomechanical parameters must be finite".into()));
    }
    let h_linear = &(&OperatorPoly::number(0) * omega_a) + &(&OperatorPoly::number(1) * omega_b);
    let h_nonlinear = OperatorPoly::from_terms([
        (Monomial::new(vec![(1, 1), (0, 1)]), cplx(g, 0.0)),
        (Monomial::new(vec![(1, 1), (1, 0)]), cplx(g, 0.0)),
    ]);
    Ok(ModelSpec {
        modes: 2,
        h_linear,
        h_nonlinear,
        l_linear: vec![
            &OperatorPoly::annihilator(0) * gamma_a.sqrt(),
            &OperatorPoly::annihilator(1) * gamma_b.sqrt(),
        ],
        l_nonlinear: vec![OperatorPoly::zero(), OperatorPoly::zero()],
        mu: if omega_b != 0.0 { g / omega_b } else { 0.0 },
        scattering: DMatrix::identity(2, 2),
        truncation_degree: DEFAULT_TRUNCATION_DEGREE,
    })
}

/// Initial state of the internal modes.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum InitialState {
    #[default]
    Vacuum,
    /// Product coherent state with one amplitude per mode.
    Coherent(Vec<Complex64>),
}

impl InitialState {
    /// `⟨m⟩` for a normal-ordered monomial.
    pub fn moment(&self, m: &Monomial) -> Complex64 {
        match self {
            InitialState::Vacuum => {
                if m.is_identity() {
                    cplx(1.0, 0.0)
                } else {
                    cplx(0.0, 0.0)
                }
            }
            InitialState::Coherent(alphas) => {
                let mut v = cplx(1.0, 0.0);
                for (mode, &(p, q)) in m.powers().iter().enumerate() {
                    let alpha = alphas.get(mode).copied().unwrap_or_default();
                    v *= alpha.conj().powu(p) * alpha.powu(q);
                }
                v
            }
        }
    }
}

/// Truncated moment-space realization of a component.
///
/// `basis[0]` is the identity. `readout` has one row per port holding the
/// coupling operator expanded in the basis (the full coefficient, e.g. `√γ`
/// for a cavity port). Input port `k` enters through `input_minus[k]`
/// (multiplying `β_k`) and `input_plus[k]` (multiplying `β_k*`).
#[derive(Clone, Debug)]
pub struct BilinearSystem {
    pub basis: Vec<Monomial>,
    pub drift: DMatrix<Complex64>,
    pub input_minus: Vec<DMatrix<Complex64>>,
    pub input_plus: Vec<DMatrix<Complex64>>,
    pub readout: DMatrix<Complex64>,
    pub scattering: DMatrix<Complex64>,
    pub initial: DVector<Complex64>,
    pub mu: f64,
}

impl BilinearSystem {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ports(&self) -> usize {
        self.scattering.nrows()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.basis.iter().position(|b| b == m)
    }

    /// `B_−` or `B_+` of a port, selected by the conjugation flag.
    pub fn input(&self, port: usize, conjugate: bool) -> &DMatrix<Complex64> {
        if conjugate {
            &self.input_plus[port]
        } else {
            &self.input_minus[port]
        }
    }

    /// Right-hand side of the moment equations for input amplitudes `beta`.
    pub fn moment_rhs(&self, x: &DVector<Complex64>, beta: &[Complex64]) -> DVector<Complex64> {
        let mut dx = &self.drift * x;
        for (k, b) in beta.iter().enumerate() {
            dx += (&self.input_minus[k] * x) * *b + (&self.input_plus[k] * x) * b.conj();
        }
        dx
    }

    /// `A x0 = 0`: the initial moments are stationary without drive, so the
    /// kernels are time-invariant.
    pub fn is_stationary(&self, tol: f64) -> bool {
        (&self.drift * &self.initial).camax() <= tol
    }
}

/// Options for [`build_bilinear_with`].
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub basis_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

pub fn build_bilinear(spec: &ModelSpec, initial: &InitialState) -> Result<BilinearSystem> {
    build_bilinear_with(spec, initial, BuildOptions::default())
}

pub fn build_bilinear_with(spec: &ModelSpec, initial: &InitialState, options: BuildOptions) -> Result<BilinearSystem> {
    spec.validate()?;
    assemble(
        &spec.hamiltonian(),
        &spec.couplings(),
        &spec.scattering,
        spec.truncation_degree,
        spec.modes,
        spec.mu,
        initial,
        options,
    )
}

struct MomentRow {
    drift: OperatorPoly,
    minus: Vec<OperatorPoly>,
    plus: Vec<OperatorPoly>,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    h: &OperatorPoly,
    ls: &[OperatorPoly],
    scattering: &DMatrix<Complex64>,
    degree: u32,
    modes: usize,
    mu: f64,
    initial: &InitialState,
    options: BuildOptions,
) -> Result<BilinearSystem> {
    let ports = ls.len();

    // Closure from the readout monomials.
    let mut rows: BTreeMap<Monomial, MomentRow> = BTreeMap::new();
    let mut queue: VecDeque<Monomial> = VecDeque::new();
    let mut seen: BTreeSet<Monomial> = BTreeSet::new();
    seen.insert(Monomial::identity());
    queue.push_back(Monomial::identity());
    for l in ls {
        for (m, _) in l.terms() {
            if seen.insert(m.clone()) {
                queue.push_back(m.clone());
            }
        }
    }
    while let Some(m) = queue.pop_front() {
        let x = OperatorPoly::term(m.clone(), cplx(1.0, 0.0));
        let drift = heisenberg_generator(&x, h, ls);
        let couplings = input_couplings(&x, ls);
        let row = MomentRow {
            drift,
            minus: couplings.iter().map(|c| c.annihilation.clone()).collect(),
            plus: couplings.iter().map(|c| c.creation.clone()).collect(),
        };
        let referenced = row
            .minus
            .iter()
            .chain(row.plus.iter())
            .chain(std::iter::once(&row.drift))
            .flat_map(|p| p.terms().map(|(k, _)| k.clone()).collect::<Vec<_>>());
        for k in referenced {
            if k.degree() <= degree && seen.insert(k.clone()) {
                if seen.len() > options.basis_cap {
                    return Err(Error::TruncationOverflow {
                        cap: options.basis_cap,
                        degree,
                        modes,
                    });
                }
                queue.push_back(k);
            }
        }
        rows.insert(m, row);
    }

    let mut basis: Vec<Monomial> = seen.into_iter().collect();
    basis.sort_by(|x, y| x.degree().cmp(&y.degree()).then_with(|| x.cmp(y)));
    let index: BTreeMap<&Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let n = basis.len();

    let fill = |poly: &OperatorPoly, row: usize, target: &mut DMatrix<Complex64>, weight: Complex64| {
        for (m, c) in poly.terms() {
            if let Some(&col) = index.get(m) {
                target[(row, col)] += c * weight;
            }
        }
    };

    let mut drift = DMatrix::zeros(n, n);
    let mut minus_raw = vec![DMatrix::zeros(n, n); ports];
    let mut plus_raw = vec![DMatrix::zeros(n, n); ports];
    for (i, m) in basis.iter().enumerate() {
        let row = &rows[m];
        fill(&row.drift, i, &mut drift, cplx(1.0, 0.0));
        for j in 0..ports {
            fill(&row.minus[j], i, &mut minus_raw[j], cplx(1.0, 0.0));
            fill(&row.plus[j], i, &mut plus_raw[j], cplx(1.0, 0.0));
        }
    }

    // The channels see the scattered input S b_in.
    let mut input_minus = vec![DMatrix::zeros(n, n); ports];
    let mut input_plus = vec![DMatrix::zeros(n, n); ports];
    for k in 0..ports {
        for j in 0..ports {
            let s = scattering[(j, k)];
            if s.norm() == 0.0 {
                continue;
            }
            input_minus[k] += &minus_raw[j] * s;
            input_plus[k] += &plus_raw[j] * s.conj();
        }
    }

    let mut readout = DMatrix::zeros(ports, n);
    for (j, l) in ls.iter().enumerate() {
        fill(l, j, &mut readout, cplx(1.0, 0.0));
    }

    let initial = DVector::from_iterator(n, basis.iter().map(|m| initial.moment(m)));

    Ok(BilinearSystem {
        basis,
        drift,
        input_minus,
        input_plus,
        readout,
        scattering: scattering.clone(),
        initial,
        mu,
    })
}

/// Linear quantum system `(S, C, Ω)`.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub scattering: DMatrix<Complex64>,
    pub coupling: DMatrix<Complex64>,
    pub omega: DMatrix<Complex64>,
}

impl LinearModel {
    pub fn new(scattering: DMatrix<Complex64>, coupling: DMatrix<Complex64>, omega: DMatrix<Complex64>) -> Result<Self> {
        let m = scattering.nrows();
        let r = omega.nrows();
        if scattering.ncols() != m || coupling.nrows() != m || coupling.ncols() != r || omega.ncols() != r {
            return Err(Error::Domain("inconsistent (S, C, Omega) dimensions".into()));
        }
        if (&omega - omega.adjoint()).camax() > HERMITIAN_TOL {
            return Err(Error::Domain("frequency matrix is not Hermitian".into()));
        }
        Ok(Self {
            scattering,
            coupling,
            omega,
        })
    }

    pub fn ports(&self) -> usize {
        self.scattering.nrows()
    }

    pub fn modes(&self) -> usize {
        self.omega.nrows()
    }

    /// `A = −C†C/2 − iΩ`.
    pub fn drift(&self) -> DMatrix<Complex64> {
        let cc = self.coupling.adjoint() * &self.coupling;
        cc * cplx(-0.5, 0.0) - &self.omega * cplx(0.0, 1.0)
    }

    /// Static gain `√G` on a single line; `G` is the power gain.
    pub fn amplifier(gain: f64) -> Result<Self> {
        if !(gain >= 1.0) || !gain.is_finite() {
            return Err(Error::Domain(format!("amplifier power gain must be >= 1, got {gain}")));
        }
        Self::new(
            DMatrix::from_element(1, 1, cplx(gain.sqrt(), 0.0)),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(0, 0),
        )
    }

    pub fn beam_splitter(scattering: DMatrix<Complex64>) -> Result<Self> {
        let m = scattering.nrows();
        check_unitary(&scattering, m)?;
        Self::new(scattering, DMatrix::zeros(m, 0), DMatrix::zeros(0, 0))
    }

    /// Real two-port rotation `[[cos θ, −sin θ], [sin θ, cos θ]]`.
    pub fn rotation_beam_splitter(theta: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::beam_splitter(DMatrix::from_row_slice(
            2,
            2,
            &[cplx(c, 0.0), cplx(-s, 0.0), cplx(s, 0.0), cplx(c, 0.0)],
        ))
    }

    /// Single-mode cavity with frequency `omega` and decay rate `gamma`.
    pub fn cavity(omega: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!("cavity needs gamma >= 0 and finite omega, got gamma = {gamma}")));
        }
        Self::new(
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, cplx(gamma.sqrt(), 0.0)),
            DMatrix::from_element(1, 1, cplx(omega, 0.0)),
        )
    }
}

/// Moment realization of a linear model (degree-1 basis).
pub fn linear_component(model: &LinearModel) -> Result<BilinearSystem> {
    let r = model.modes();
    let m = model.ports();
    let mut h = OperatorPoly::zero();
    for j in 0..r {
        for k in 0..r {
            let w = model.omega[(j, k)];
            let t = OperatorPoly::from_terms([(
                Monomial::new({
                    let mut p = vec![(0, 0); r];
                    p[j].0 += 1;
                    p[k].1 += 1;
                    p
                }),
                w,
            )]);
            h = &h + &t;
        }
    }
    let ls: Vec<OperatorPoly> = (0..m)
        .map(|j| OperatorPoly::from_terms((0..r).map(|k| (Monomial::annihilator(k), model.coupling[(j, k)]))))
        .collect();
    assemble(&h, &ls, &model.scattering, 1, r, 0.0, &InitialState::Vacuum, BuildOptions::default())
}
