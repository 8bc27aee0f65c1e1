//! Independent reference solutions in truncated Fock space.
//!
//! The coherent drive on port `k` enters the master equation through
//! `H_drive = i Σⱼ (β'ⱼ* Lⱼ − β'ⱼ Lⱼ†)` with `β' = S β`, and the output is
//! `⟨b_out⟩ = S β + ⟨L⟩`. For a linear cavity this reproduces the Langevin
//! mean `α̇ = −(γ/2 + iω)α − √γ β` exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::algebra::{heisenberg_generator, input_couplings, Monomial, OperatorPoly};
use crate::error::{Error, Result};
use crate::model::{InitialState, ModelSpec};
use crate::response::{DriveSignal, ResponseResult};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Default truncation (highest Fock level) of the converged oracle.
pub const DEFAULT_TRUNCATION: usize = 40;

/// Default top-level population above which a run is rejected.
pub const DEFAULT_LEAK_TOLERANCE: f64 = 1e-6;

/// Sparse operator on the truncated tensor-product space.
#[derive(Clone, Debug)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != c(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn dagger(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    /// `out += w · (self ρ)`.
    fn left_into(&self, rho: &DMatrix<Complex64>, w: Complex64, out: &mut DMatrix<Complex64>) {
        let n = rho.ncols();
        for &(i, k, v) in &self.entries {
            let f = v * w;
            for j in 0..n {
                out[(i, j)] += f * rho[(k, j)];
            }
        }
    }

    /// `out += w · (ρ self)`.
    fn right_into(&self, rho: &DMatrix<Complex64>, w: Complex64, out: &mut DMatrix<Complex64>) {
        let n = rho.nrows();
        for &(k, j, v) in &self.entries {
            let f = v * w;
            for i in 0..n {
                out[(i, j)] += rho[(i, k)] * f;
            }
        }
    }

    /// `tr(self ρ)`.
    pub fn expectation(&self, rho: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(i, k, v)| v * rho[(k, i)]).sum()
    }
}

/// Truncated Fock space with `levels[m] = Nₘ + 1` states per mode; the
/// last mode varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FockSpace {
    pub levels: Vec<usize>,
}

impl FockSpace {
    pub fn uniform(modes: usize, truncation: usize) -> Self {
        Self {
            levels: vec![truncation + 1; modes],
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.iter().product()
    }

    fn stride(&self, mode: usize) -> usize {
        self.levels[mode + 1..].iter().product()
    }

    /// Fock level of `mode` in basis state `index`.
    pub fn level(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels[mode]
    }

    fn single_mode(&self, mode: usize, p: u32, q: u32) -> DMatrix<Complex64> {
        let n = self.levels[mode];
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let mut m = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..p {
            m = &m * &ad;
        }
        for _ in 0..q {
            m = &m * &a;
        }
        m
    }

    /// Matrix of a normal-ordered monomial.
    pub fn monomial(&self, m: &Monomial) -> DMatrix<Complex64> {
        let mut out = DMatrix::<Complex64>::identity(1, 1);
        for mode in 0..self.levels.len() {
            let (p, q) = m.mode_powers(mode);
            out = out.kronecker(&self.single_mode(mode, p, q));
        }
        out
    }

    pub fn operator(&self, poly: &OperatorPoly) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (m, coeff) in poly.terms() {
            out += self.monomial(m) * *coeff;
        }
        out
    }
}

/// Density matrix on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct FockDensity {
    pub space: FockSpace,
    pub matrix: DMatrix<Complex64>,
}

impl FockDensity {
    pub fn vacuum(space: FockSpace) -> Self {
        let n = space.dim();
        let mut matrix = DMatrix::zeros(n, n);
        matrix[(0, 0)] = c(1.0, 0.0);
        Self { space, matrix }
    }

    pub fn from_state(space: FockSpace, psi: &DVector<Complex64>) -> Self {
        let psi = psi / c(psi.norm(), 0.0);
        let matrix = &psi * psi.adjoint();
        Self { space, matrix }
    }

    /// Single-mode coherent state, renormalized after truncation.
    pub fn coherent(alpha: Complex64, truncation: usize) -> Self {
        let mut psi = DVector::zeros(truncation + 1);
        let mut amp = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..=truncation {
            psi[k] = amp;
            amp *= alpha / ((k + 1) as f64).sqrt();
        }
        Self::from_state(FockSpace::uniform(1, truncation), &psi)
    }

    pub fn fock(n: usize, truncation: usize) -> Self {
        let mut psi = DVector::zeros(truncation + 1);
        psi[n] = c(1.0, 0.0);
        Self::from_state(FockSpace::uniform(1, truncation), &psi)
    }

    pub fn from_initial(space: FockSpace, initial: &InitialState) -> Self {
        match initial {
            InitialState::Vacuum => Self::vacuum(space),
            InitialState::Coherent(alphas) => {
                let mut psi = DVector::from_element(1, c(1.0, 0.0));
                for (mode, &n) in space.levels.iter().enumerate() {
                    let alpha = alphas.get(mode).copied().unwrap_or_default();
                    let single = Self::coherent(alpha, n - 1);
                    let v = DVector::from_iterator(n, (0..n).map(|k| single.matrix[(k, 0)] / single.matrix[(0, 0)].sqrt()));
                    psi = psi.kronecker(&v);
                }
                Self::from_state(space, &psi)
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * c(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.matrix).trace()
    }

    /// Population of the highest level of `mode`.
    pub fn top_population(&self, mode: usize) -> f64 {
        let top = self.space.levels[mode] - 1;
        (0..self.space.dim())
            .filter(|&i| self.space.level(i, mode) == top)
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }
}

/// Options for [`lindblad_integrate`].
#[derive(Clone, Debug)]
pub struct FockOptions {
    pub truncation: usize,
    /// `None` disables the truncation check.
    pub leak_tolerance: Option<f64>,
    /// Keep every `checkpoint_every`-th state (0 keeps none).
    pub checkpoint_every: usize,
    pub initial: InitialState,
}

impl Default for FockOptions {
    fn default() -> Self {
        Self {
            truncation: DEFAULT_TRUNCATION,
            leak_tolerance: Some(DEFAULT_LEAK_TOLERANCE),
            checkpoint_every: 0,
            initial: InitialState::Vacuum,
        }
    }
}

/// Trajectory of a Lindblad integration.
#[derive(Clone, Debug)]
pub struct FockTrajectory {
    pub t: Vec<f64>,
    /// `⟨aₘ⟩(t)` per mode.
    pub modes: Vec<Vec<Complex64>>,
    /// `⟨b_out⟩` on port 0.
    pub output: Vec<Complex64>,
    pub checkpoints: Vec<(f64, FockDensity)>,
    pub max_trace_error: f64,
    pub max_top_population: f64,
    pub final_state: FockDensity,
}

impl FockTrajectory {
    pub fn response(&self) -> ResponseResult {
        ResponseResult::from_total(self.t.clone(), self.output.clone())
    }
}

struct Lindblad {
    k0: SparseOp,
    ls: Vec<SparseOp>,
    lds: Vec<SparseOp>,
    /// Effective drive amplitude weights `S[j][0]` of port 0 on channel j.
    weights: Vec<Complex64>,
}

impl Lindblad {
    fn rhs(&self, rho: &DMatrix<Complex64>, beta: Complex64) -> DMatrix<Complex64> {
        let n = rho.nrows();
        let mut out = DMatrix::zeros(n, n);
        // K ρ + ρ K† + Σ L ρ L† with K = −iH − ½ Σ L†L + Σ (β'* L − β' L†).
        self.k0.left_into(rho, c(1.0, 0.0), &mut out);
        let k0d = self.k0.dagger();
        k0d.right_into(rho, c(1.0, 0.0), &mut out);
        for (j, (l, ld)) in self.ls.iter().zip(&self.lds).enumerate() {
            let bp = self.weights[j] * beta;
            if bp != c(0.0, 0.0) {
                l.left_into(rho, bp.conj(), &mut out);
                ld.left_into(rho, -bp, &mut out);
                ld.right_into(rho, bp, &mut out);
                l.right_into(rho, -bp.conj(), &mut out);
            }
            let mut lr = DMatrix::zeros(n, n);
            l.left_into(rho, c(1.0, 0.0), &mut lr);
            ld.right_into(&lr, c(1.0, 0.0), &mut out);
        }
        out
    }
}

/// Fixed-step RK4 integration of the driven master equation on the drive
/// grid; the drive enters port 0.
pub fn lindblad_integrate(spec: &ModelSpec, drive: &DriveSignal, options: &FockOptions) -> Result<FockTrajectory> {
    spec.validate()?;
    if options.truncation < 2 {
        return Err(Error::Domain("Fock truncation must be at least 2".into()));
    }
    let space = FockSpace::uniform(spec.modes, options.truncation);
    let h = space.operator(&spec.hamiltonian());
    let ls_dense: Vec<DMatrix<Complex64>> = spec.couplings().iter().map(|l| space.operator(l)).collect();
    let n = space.dim();
    let mut k0 = h * c(0.0, -1.0);
    for l in &ls_dense {
        k0 -= l.adjoint() * l * c(0.5, 0.0);
    }
    let model = Lindblad {
        k0: SparseOp::from_dense(&k0),
        ls: ls_dense.iter().map(SparseOp::from_dense).collect(),
        lds: ls_dense.iter().map(|l| SparseOp::from_dense(&l.adjoint())).collect(),
        weights: (0..spec.ports()).map(|j| spec.scattering[(j, 0)]).collect(),
    };
    let annihilators: Vec<SparseOp> = (0..spec.modes)
        .map(|m| SparseOp::from_dense(&space.monomial(&Monomial::annihilator(m))))
        .collect();
    let l0 = &model.ls[0];
    let s00 = spec.scattering[(0, 0)];

    let mut rho = FockDensity::from_initial(space.clone(), &options.initial).matrix;
    let steps = drive.len();
    let dt = drive.dt;
    let t = drive.times();
    let mut modes = vec![Vec::with_capacity(steps); spec.modes];
    let mut output = Vec::with_capacity(steps);
    let mut checkpoints = Vec::new();
    let mut max_trace_error: f64 = 0.0;
    let mut max_top = vec![0.0f64; spec.modes];
    let top_indices: Vec<Vec<usize>> = (0..spec.modes)
        .map(|m| (0..n).filter(|&i| space.level(i, m) == options.truncation).collect())
        .collect();

    let mut record = |i: usize, rho: &DMatrix<Complex64>, modes: &mut Vec<Vec<Complex64>>, output: &mut Vec<Complex64>| {
        for (m, a) in annihilators.iter().enumerate() {
            modes[m].push(a.expectation(rho));
        }
        output.push(s00 * drive.samples.get(i).copied().unwrap_or_default() + l0.expectation(rho));
        max_trace_error = max_trace_error.max((rho.trace() - c(1.0, 0.0)).norm());
        for (m, idx) in top_indices.iter().enumerate() {
            max_top[m] = max_top[m].max(idx.iter().map(|&k| rho[(k, k)].re).sum());
        }
        if options.checkpoint_every > 0 && i % options.checkpoint_every == 0 {
            checkpoints.push((
                i as f64 * dt,
                FockDensity {
                    space: space.clone(),
                    matrix: rho.clone(),
                },
            ));
        }
    };

    if steps > 0 {
        record(0, &rho, &mut modes, &mut output);
    }
    for i in 1..steps {
        let t0 = t[i - 1];
        let b0 = drive.at(t0);
        let bh = drive.at(t0 + 0.5 * dt);
        let b1 = drive.at(t0 + dt);
        let k1 = model.rhs(&rho, b0);
        let k2 = model.rhs(&(&rho + &k1 * c(0.5 * dt, 0.0)), bh);
        let k3 = model.rhs(&(&rho + &k2 * c(0.5 * dt, 0.0)), bh);
        let k4 = model.rhs(&(&rho + &k3 * c(dt, 0.0)), b1);
        rho += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("master equation integration diverged".into()));
        }
        record(i, &rho, &mut modes, &mut output);
    }
    if let Some(tol) = options.leak_tolerance {
        for (mode, &worst) in max_top.iter().enumerate() {
            if worst > tol {
                return Err(Error::TruncationLeak {
                    mode,
                    population: worst,
                    tolerance: tol,
                });
            }
        }
    }
    Ok(FockTrajectory {
        t,
        modes,
        output,
        checkpoints,
        max_trace_error,
        max_top_population: max_top.iter().copied().fold(0.0, f64::max),
        final_state: FockDensity { space, matrix: rho },
    })
}

/// Mean-field trajectory: moments factorized as `⟨a†ᵖaᑫ⟩ → α*ᵖαᑫ`.
#[derive(Clone, Debug)]
pub struct SemiclassicalTrajectory {
    pub t: Vec<f64>,
    pub alpha: Vec<Vec<Complex64>>,
    pub output: Vec<Complex64>,
}

impl SemiclassicalTrajectory {
    pub fn response(&self) -> ResponseResult {
        ResponseResult::from_total(self.t.clone(), self.output.clone())
    }
}

fn eval_at(poly: &OperatorPoly, alpha: &[Complex64]) -> Complex64 {
    let state = InitialState::Coherent(alpha.to_vec());
    poly.terms().map(|(m, coeff)| coeff * state.moment(m)).sum()
}

pub fn semiclassical_response(spec: &ModelSpec, drive: &DriveSignal) -> Result<SemiclassicalTrajectory> {
    spec.validate()?;
    let h = spec.hamiltonian();
    let ls = spec.couplings();
    let modes = spec.modes;
    let drifts: Vec<OperatorPoly> = (0..modes)
        .map(|m| heisenberg_generator(&OperatorPoly::annihilator(m), &h, &ls))
        .collect();
    let couplings: Vec<Vec<(OperatorPoly, OperatorPoly)>> = (0..modes)
        .map(|m| {
            input_couplings(&OperatorPoly::annihilator(m), &ls)
                .into_iter()
                .map(|ic| (ic.annihilation, ic.creation))
                .collect()
        })
        .collect();
    let weights: Vec<Complex64> = (0..spec.ports()).map(|j| spec.scattering[(j, 0)]).collect();
    let rhs = |alpha: &[Complex64], beta: Complex64| -> Vec<Complex64> {
        (0..modes)
            .map(|m| {
                let mut v = eval_at(&drifts[m], alpha);
                for (j, (minus, plus)) in couplings[m].iter().enumerate() {
                    let bp = weights[j] * beta;
                    v += eval_at(minus, alpha) * bp + eval_at(plus, alpha) * bp.conj();
                }
                v
            })
            .collect()
    };
    let mut alpha: Vec<Complex64> = vec![c(0.0, 0.0); modes];
    let dt = drive.dt;
    let t = drive.times();
    let mut traj = vec![Vec::with_capacity(drive.len()); modes];
    let mut output = Vec::with_capacity(drive.len());
    let s00 = spec.scattering[(0, 0)];
    let push = |alpha: &[Complex64], i: usize, traj: &mut Vec<Vec<Complex64>>, output: &mut Vec<Complex64>| {
        for m in 0..modes {
            traj[m].push(alpha[m]);
        }
        output.push(s00 * drive.samples[i] + eval_at(&ls[0], alpha));
    };
    if !drive.is_empty() {
        push(&alpha, 0, &mut traj, &mut output);
    }
    for i in 1..drive.len() {
        let t0 = t[i - 1];
        let (b0, bh, b1) = (drive.at(t0), drive.at(t0 + 0.5 * dt), drive.at(t0 + dt));
        let step = |base: &[Complex64], k: &[Complex64], f: f64| -> Vec<Complex64> {
            base.iter().zip(k).map(|(a, d)| a + d * f).collect()
        };
        let k1 = rhs(&alpha, b0);
        let k2 = rhs(&step(&alpha, &k1, 0.5 * dt), bh);
        let k3 = rhs(&step(&alpha, &k2, 0.5 * dt), bh);
        let k4 = rhs(&step(&alpha, &k3, dt), b1);
        for m in 0..modes {
            alpha[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
        }
        if alpha.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("mean-field integration diverged".into()));
        }
        push(&alpha, i, &mut traj, &mut output);
    }
    Ok(SemiclassicalTrajectory { t, alpha: traj, output })
}

/// Extra levels used when building the Gaussian reference before cropping.
const GAUSSIAN_PADDING: usize = 40;

/// Gaussian state with the same first and second moments as `rho`.
pub fn gaussian_reference(rho: &FockDensity) -> Result<FockDensity> {
    if rho.space.levels.len() != 1 {
        return Err(Error::Domain("non-Gaussianity is defined here for a single mode".into()));
    }
    let n = rho.space.levels[0];
    let space = &rho.space;
    let a = space.monomial(&Monomial::annihilator(0));
    let a2 = space.monomial(&Monomial::single(0, 0, 2));
    let num = space.monomial(&Monomial::single(0, 1, 1));
    let tr = rho.trace().re;
    let alpha = rho.expectation(&a) / tr;
    let nc = rho.expectation(&num).re / tr - alpha.norm_sqr();
    let m = rho.expectation(&a2) / tr - alpha * alpha;
    let nu_sq = (nc + 0.5).powi(2) - m.norm_sqr();
    let nu = nu_sq.max(0.0).sqrt();
    if nu_sq < 0.0 || nu < 0.5 - 1e-6 {
        return Err(Error::UnphysicalCovariance {
            nu: if nu_sq < 0.0 { -(-nu_sq).sqrt() } else { nu },
        });
    }
    let nbar = (nu - 0.5).max(0.0);
    let cosh2r = ((nc + 0.5) / (nbar + 0.5)).max(1.0);
    let r = 0.5 * cosh2r.acosh();
    let theta = (-m).arg();

    let big = n + GAUSSIAN_PADDING;
    let mut ab = DMatrix::<Complex64>::zeros(big, big);
    for k in 1..big {
        ab[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
    }
    let abd = ab.adjoint();
    let mut thermal = DMatrix::<Complex64>::zeros(big, big);
    let ratio = nbar / (1.0 + nbar);
    for k in 0..big {
        thermal[(k, k)] = c(ratio.powi(k as i32) / (1.0 + nbar), 0.0);
    }
    let zeta = Complex64::from_polar(r, theta);
    let squeeze = ((&ab * &ab * zeta.conj() - &abd * &abd * zeta) * c(0.5, 0.0)).exp();
    let displace = (&abd * alpha - &ab * alpha.conj()).exp();
    let u = displace * squeeze;
    let sigma = &u * thermal * u.adjoint();
    let cropped = sigma.view((0, 0), (n, n)).into_owned();
    Ok(FockDensity {
        space: rho.space.clone(),
        matrix: cropped,
    })
}

/// `δ[ρ] = tr[(ρ−σ)²]/2 / tr[ρ²]` with σ the moment-matched Gaussian.
pub fn non_gaussianity(rho: &FockDensity) -> Result<f64> {
    let sigma = gaussian_reference(rho)?;
    let diff = &rho.matrix - &sigma.matrix;
    let num = (&diff * &diff).trace().re / 2.0;
    let den = rho.purity();
    if !(den > 0.0) {
        return Err(Error::Numerical("state has zero purity".into()));
    }
    Ok((num / den).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kerr_cavity;

    #[test]
    fn operator_matrices() {
        let space = FockSpace::uniform(1, 4);
        let a = space.monomial(&Monomial::annihilator(0));
        let ad = space.monomial(&Monomial::creator(0));
        let comm = &a * &ad - &ad * &a;
        for k in 0..4 {
            assert!((comm[(k, k)] - c(1.0, 0.0)).norm() < 1e-14);
        }
        let two = FockSpace::uniform(2, 2);
        assert_eq!(two.dim(), 9);
        assert_eq!(two.level(5, 0), 1);
        assert_eq!(two.level(5, 1), 2);
    }

    #[test]
    fn vacuum_is_stationary() {
        let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
        let d = DriveSignal::zero(0.05, 200).unwrap();
        let opts = FockOptions {
            truncation: 6,
            ..FockOptions::default()
        };
        let tr = lindblad_integrate(&spec, &d, &opts).unwrap();
        assert!(tr.output.iter().all(|z| z.norm() == 0.0));
        assert!((tr.final_state.matrix[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn semiclassical_zero_drive() {
        let spec = kerr_cavity(1.0, 0.01, 0.2).unwrap();
        let d = DriveSignal::zero(0.05, 100).unwrap();
        let s = semiclassical_response(&spec, &d).unwrap();
        assert!(s.output.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn coherent_state_is_gaussian() {
        let rho = FockDensity::coherent(c(0.8, -0.5), 30);
        assert!(non_gaussianity(&rho).unwrap() <= 1e-10);
    }

    #[test]
    fn single_photon_is_not_gaussian() {
        let d = non_gaussianity(&FockDensity::fock(1, 20)).unwrap();
        assert!((d - 5.0 / 12.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn leak_is_detected() {
        let spec = kerr_cavity(1.0, 0.0, 0.2).unwrap();
        let d = DriveSignal::rotating(0.6, 1.0, 0.01, 2000).unwrap();
        let opts = FockOptions {
            truncation: 3,
            ..FockOptions::default()
        };
        assert!(matches!(lindblad_integrate(&spec, &d, &opts), Err(Error::TruncationLeak { mode: 0, .. })));
    }
}
