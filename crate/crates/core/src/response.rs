//! Output trajectories under a classical coherent drive.
//!
//! With a coherent input the expectation `⟨b_out(t)⟩` is the Volterra
//! series with the operators replaced by the amplitude `β(t)`; vacuum
//! fluctuations drop out of first moments because the readout is normal
//! ordered.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::kernel::{ExpSumKernel, KernelExpander, KernelOptions, KernelSignature, Sign};
use crate::model::BilinearSystem;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Analytic form of a drive, when known.
#[derive(Clone, Debug, PartialEq)]
pub enum DriveShape {
    /// Only the samples are known; off-grid values are interpolated.
    Sampled,
    /// `ε e^{−iωt}`.
    Rotating { eps: f64, omega: f64 },
    /// `Σ aₖ e^{−iωₖt}`.
    Tones(Vec<(Complex64, f64)>),
}

/// Sampled coherent amplitude `β(tₖ)`, `tₖ = k dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSignal {
    pub dt: f64,
    pub samples: Vec<Complex64>,
    pub shape: DriveShape,
    pub description: String,
}

impl DriveSignal {
    pub fn sampled(dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        Self::checked(dt, samples, DriveShape::Sampled, "sampled".into())
    }

    /// `ε e^{−iω t}` on `n` samples.
    pub fn rotating(eps: f64, omega: f64, dt: f64, n: usize) -> Result<Self> {
        let samples = (0..n).map(|k| c(0.0, -omega * k as f64 * dt).exp() * eps).collect();
        Self::checked(
            dt,
            samples,
            DriveShape::Rotating { eps, omega },
            format!("rotating eps={eps} omega={omega}"),
        )
    }

    /// Sum of tones `a e^{−iωt}` on `n` samples.
    pub fn tones(tones: Vec<(Complex64, f64)>, dt: f64, n: usize) -> Result<Self> {
        let shape = DriveShape::Tones(tones);
        let samples = (0..n).map(|k| eval_shape(&shape, k as f64 * dt)).collect();
        Self::checked(dt, samples, shape, "tones".into())
    }

    pub fn zero(dt: f64, n: usize) -> Result<Self> {
        Self::checked(dt, vec![c(0.0, 0.0); n], DriveShape::Tones(vec![]), "zero".into())
    }

    fn checked(dt: f64, samples: Vec<Complex64>, shape: DriveShape, description: String) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("drive time step must be positive, got {dt}")));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("drive samples must be finite".into()));
        }
        Ok(Self {
            dt,
            samples,
            shape,
            description,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Same drive scaled by a real factor.
    pub fn scaled(&self, s: f64) -> Self {
        let shape = match &self.shape {
            DriveShape::Sampled => DriveShape::Sampled,
            DriveShape::Rotating { eps, omega } => DriveShape::Rotating {
                eps: eps * s,
                omega: *omega,
            },
            DriveShape::Tones(t) => DriveShape::Tones(t.iter().map(|&(a, w)| (a * s, w)).collect()),
        };
        Self {
            dt: self.dt,
            samples: self.samples.iter().map(|z| z * s).collect(),
            shape,
            description: self.description.clone(),
        }
    }

    /// `β(t)`; exact for analytic shapes, cubic interpolation otherwise.
    pub fn at(&self, t: f64) -> Complex64 {
        match self.shape {
            DriveShape::Sampled => self.interpolate(t),
            _ => eval_shape(&self.shape, t),
        }
    }

    fn interpolate(&self, t: f64) -> Complex64 {
        let n = self.len();
        if n == 0 {
            return c(0.0, 0.0);
        }
        if n == 1 {
            return self.samples[0];
        }
        let x = (t / self.dt).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        if f == 0.0 {
            return self.samples[i];
        }
        // Four-point Lagrange stencil, shifted inward at the edges.
        let base = i.saturating_sub(1).min(n.saturating_sub(4));
        let m = (n - base).min(4);
        let xs: Vec<f64> = (0..m).map(|k| (base + k) as f64).collect();
        let mut v = c(0.0, 0.0);
        for a in 0..m {
            let mut w = 1.0;
            for b in 0..m {
                if a != b {
                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            v += self.samples[base + a] * w;
        }
        v
    }
}

fn eval_shape(shape: &DriveShape, t: f64) -> Complex64 {
    match shape {
        DriveShape::Sampled => c(0.0, 0.0),
        DriveShape::Rotating { eps, omega } => c(0.0, -omega * t).exp() * *eps,
        DriveShape::Tones(tones) => tones.iter().map(|&(a, w)| a * c(0.0, -w * t).exp()).sum(),
    }
}

/// Kernels seen from one input line to one output port.
#[derive(Clone, Debug)]
pub struct KernelSeries {
    pub feedthrough: Complex64,
    pub kernels: Vec<ExpSumKernel>,
}

impl KernelSeries {
    /// All output-`−` kernels from `in_port` to `out_port` up to `max_order`.
    pub fn from_system(sys: &BilinearSystem, max_order: usize, out_port: usize, in_port: usize) -> Result<Self> {
        if out_port >= sys.ports() || in_port >= sys.ports() {
            return Err(Error::Signature(format!("port outside 0..{}", sys.ports())));
        }
        let opts = KernelOptions {
            max_order: max_order.max(1),
            ..KernelOptions::default()
        };
        let expander = KernelExpander::new(sys, &opts)?;
        let mut kernels = Vec::new();
        for n in 1..=max_order {
            for sig in KernelSignature::enumerate(1, n).into_iter().filter(|s| s.out_sign == Sign::Minus) {
                let sig = KernelSignature::new(out_port, Sign::Minus, sig.inputs.iter().map(|&(_, s)| (in_port, s)).collect());
                let k = expander.kernel(&sig)?;
                if !k.is_zero() {
                    kernels.push(k);
                }
            }
        }
        Ok(Self {
            feedthrough: sys.scattering[(out_port, in_port)],
            kernels,
        })
    }

    pub fn truncated(&self, max_order: usize) -> Self {
        Self {
            feedthrough: self.feedthrough,
            kernels: self.kernels.iter().filter(|k| k.order() <= max_order).cloned().collect(),
        }
    }
}

/// Output trajectory split by order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseResult {
    pub t: Vec<f64>,
    pub feedthrough: Vec<Complex64>,
    pub orders: BTreeMap<usize, Vec<Complex64>>,
    pub total: Vec<Complex64>,
}

impl ResponseResult {
    fn assemble(t: Vec<f64>, feedthrough: Vec<Complex64>, orders: BTreeMap<usize, Vec<Complex64>>) -> Self {
        let mut total = feedthrough.clone();
        for y in orders.values() {
            for (acc, v) in total.iter_mut().zip(y) {
                *acc += v;
            }
        }
        Self {
            t,
            feedthrough,
            orders,
            total,
        }
    }

    /// From a total trajectory with no order split.
    pub fn from_total(t: Vec<f64>, total: Vec<Complex64>) -> Self {
        Self {
            feedthrough: vec![c(0.0, 0.0); t.len()],
            orders: BTreeMap::new(),
            t,
            total,
        }
    }

    /// `x_out = (⟨b_out⟩ + ⟨b_out⟩*)/√2`.
    pub fn x_out(&self) -> Vec<f64> {
        self.total.iter().map(|z| 2f64.sqrt() * z.re).collect()
    }
}

fn check_decay(series: &KernelSeries) -> Result<()> {
    for k in &series.kernels {
        for t in &k.terms {
            if let Some(r) = t.rates.iter().find(|r| r.re <= 0.0) {
                return Err(Error::NonDecayingKernel { rate: r.to_string() });
            }
        }
    }
    Ok(())
}

fn input_value(drive: &DriveSignal, sign: Sign, t: f64) -> Complex64 {
    sign.apply(drive.at(t))
}

/// Largest `|λ| h` of a filter step; coarser drive grids are substepped.
pub const FILTER_STEP: f64 = 0.005;

/// Fast path: each exponential term is a cascade of first-order filters
/// integrated with fixed-step RK4, substepping the drive grid so that
/// `|λ| h ≤ FILTER_STEP`.
pub fn volterra_response(series: &KernelSeries, drive: &DriveSignal, max_order: usize) -> Result<ResponseResult> {
    check_decay(series)?;
    let n = drive.len();
    let dt = drive.dt;
    let t: Vec<f64> = drive.times();
    let feed: Vec<Complex64> = drive.samples.iter().map(|b| series.feedthrough * b).collect();
    let mut orders: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    for k in series.kernels.iter().filter(|k| k.order() <= max_order) {
        let order = k.order();
        let signs: Vec<Sign> = k.signature.inputs.iter().map(|&(_, s)| s).collect();
        let y = orders.entry(order).or_insert_with(|| vec![c(0.0, 0.0); n]);
        // Inputs in filter order: the earliest input feeds z₁.
        let at = |time: f64| -> Vec<Complex64> { signs.iter().rev().map(|&s| input_value(drive, s, time)).collect() };
        let mut samples_cache: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for term in &k.terms {
            let rates: Vec<Complex64> = term.rates.iter().rev().copied().collect();
            let rhs = |z: &[Complex64], u: &[Complex64]| -> Vec<Complex64> {
                let mut dz = Vec::with_capacity(order);
                dz.push(-rates[0] * z[0] + u[0]);
                for q in 1..order {
                    dz.push(-rates[q] * z[q] + u[q] * z[q - 1]);
                }
                dz
            };
            let fastest = rates.iter().map(|l| l.norm()).fold(0.0, f64::max);
            let sub = ((fastest * dt / FILTER_STEP).ceil() as usize).max(1);
            let h = dt / sub as f64;
            let mut z = vec![c(0.0, 0.0); order];
            if n > 0 {
                y[0] += term.coeff * z[order - 1];
            }
            for i in 1..n {
                for s in 0..sub {
                    let t0 = t[i - 1] + s as f64 * h;
                    samples_cache.clear();
                    samples_cache.push(at(t0));
                    samples_cache.push(at(t0 + 0.5 * h));
                    samples_cache.push(at(t0 + h));
                    let k1 = rhs(&z, &samples_cache[0]);
                    let z2: Vec<Complex64> = z.iter().zip(&k1).map(|(a, b)| a + b * (0.5 * h)).collect();
                    let k2 = rhs(&z2, &samples_cache[1]);
                    let z3: Vec<Complex64> = z.iter().zip(&k2).map(|(a, b)| a + b * (0.5 * h)).collect();
                    let k3 = rhs(&z3, &samples_cache[1]);
                    let z4: Vec<Complex64> = z.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
                    let k4 = rhs(&z4, &samples_cache[2]);
                    for q in 0..order {
                        z[q] += (k1[q] + (k2[q] + k3[q]) * 2.0 + k4[q]) * (h / 6.0);
                    }
                }
                y[i] += term.coeff * z[order - 1];
            }
        }
    }
    Ok(ResponseResult::assemble(t, feed, orders))
}

/// Default cost cap of [`brute_force_response`] in kernel-term products.
pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 2_000_000_000;

pub fn brute_force_response(series: &KernelSeries, drive: &DriveSignal, max_order: usize) -> Result<ResponseResult> {
    brute_force_response_capped(series, drive, max_order, DEFAULT_BRUTE_FORCE_CAP)
}

/// Number of halvings in the brute-force Romberg table.
pub const ROMBERG_LEVELS: usize = 3;

/// Direct summation of the nested simplex integrals
/// `∫_{t>s₁>⋯>sₙ>0} k(t−s₁, s₁−s₂, …) ∏ u(sₖ)` with trapezoidal weights in
/// each variable. The sums run on the drive grid and on
/// [`ROMBERG_LEVELS`] successive halvings, then are combined by Romberg
/// extrapolation in `h²`.
pub fn brute_force_response_capped(series: &KernelSeries, drive: &DriveSignal, max_order: usize, cap: u64) -> Result<ResponseResult> {
    let n = drive.len();
    let stride = 1usize << ROMBERG_LEVELS;
    let finest = if n > 0 { stride * (n - 1) + 1 } else { 0 };
    let mut cost: u64 = 0;
    for k in series.kernels.iter().filter(|k| k.order() <= max_order) {
        let per = (finest as u64).saturating_mul(finest as u64).saturating_mul(k.order() as u64);
        cost = cost.saturating_add(per.saturating_mul(k.terms.len() as u64));
    }
    if cost > cap {
        return Err(Error::GridTooLarge { cost, cap });
    }
    let t = drive.times();
    let feed: Vec<Complex64> = drive.samples.iter().map(|b| series.feedthrough * b).collect();
    let mut orders: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    for k in series.kernels.iter().filter(|k| k.order() <= max_order) {
        // table[l] uses step dt / 2^l.
        let mut table: Vec<Vec<Complex64>> = (0..=ROMBERG_LEVELS)
            .map(|l| {
                let s = 1usize << l;
                let m = if n > 0 { s * (n - 1) + 1 } else { 0 };
                simplex_sum(k, drive, m, drive.dt / s as f64, s)
            })
            .collect();
        for col in 1..=ROMBERG_LEVELS {
            let f = 4f64.powi(col as i32);
            for l in (col..=ROMBERG_LEVELS).rev() {
                let next: Vec<Complex64> = table[l].iter().zip(&table[l - 1]).map(|(a, b)| (a * f - b) / (f - 1.0)).collect();
                table[l] = next;
            }
        }
        let y = orders.entry(k.order()).or_insert_with(|| vec![c(0.0, 0.0); n]);
        for (acc, v) in y.iter_mut().zip(&table[ROMBERG_LEVELS]) {
            *acc += v;
        }
    }
    Ok(ResponseResult::assemble(t, feed, orders))
}

/// Trapezoidal simplex sums on a grid of `m` points with step `h`; the
/// value at coarse sample `i` is read at fine index `i·stride`.
///
/// The innermost variable is summed first; every partial sum
/// `G_d(a) = Σ_{b≤a} w(b, a) e_d(a−b) u_d(b) G_{d+1}(b)` is shared by all
/// outer limits, which keeps the cost at `O(n m²)`.
fn simplex_sum(k: &ExpSumKernel, drive: &DriveSignal, m: usize, h: f64, stride: usize) -> Vec<Complex64> {
    let order = k.order();
    let signs: Vec<Sign> = k.signature.inputs.iter().map(|&(_, s)| s).collect();
    let u: Vec<Vec<Complex64>> = signs
        .iter()
        .map(|&s| (0..m).map(|j| input_value(drive, s, j as f64 * h)).collect())
        .collect();
    let coarse_n = if m == 0 { 0 } else { (m - 1) / stride + 1 };
    let mut out = vec![c(0.0, 0.0); coarse_n];
    // Trapezoid weight of node j on [0, end].
    let w = |j: usize, end: usize| -> f64 {
        if end == 0 {
            0.0
        } else if j == 0 || j == end {
            0.5 * h
        } else {
            h
        }
    };
    for term in &k.terms {
        let e: Vec<Vec<Complex64>> = term
            .rates
            .iter()
            .map(|l| (0..m).map(|d| (-l * (d as f64 * h)).exp()).collect())
            .collect();
        let mut g = vec![c(1.0, 0.0); m];
        for d in (0..order).rev() {
            let f: Vec<Complex64> = (0..m).map(|b| u[d][b] * g[b]).collect();
            g = (0..m)
                .map(|a| (0..=a).map(|b| e[d][a - b] * f[b] * w(b, a)).sum())
                .collect();
        }
        for (ci, slot) in out.iter_mut().enumerate() {
            *slot += term.coeff * g[ci * stride];
        }
    }
    out
}

/// Steady-state window of a trajectory, in time units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub stop: f64,
}

/// Minimal number of samples in a spectrum segment.
pub const MIN_SEGMENT: usize = 16;

/// Hann-windowed DFT of `x_out` over the segment; returns angular
/// frequencies `ω ≥ 0` and `log₁₀` of the normalized magnitude, floored at
/// `−16`.
pub fn output_spectrum(result: &ResponseResult, segment: Segment) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = result.x_out();
    let idx: Vec<usize> = result
        .t
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= segment.start - 1e-12 && t <= segment.stop + 1e-12)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < MIN_SEGMENT {
        return Err(Error::SegmentTooShort {
            len: idx.len(),
            min: MIN_SEGMENT,
        });
    }
    let dt = if result.t.len() > 1 { result.t[1] - result.t[0] } else { 1.0 };
    let len = idx.len();
    let window: Vec<f64> = (0..len).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (len - 1) as f64).cos()).collect();
    let norm: f64 = window.iter().sum();
    let mut buf: Vec<Complex64> = idx.iter().zip(&window).map(|(&i, &wk)| c(x[i] * wk, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2 + 1;
    let omegas = (0..half).map(|k| 2.0 * PI * k as f64 / (len as f64 * dt)).collect();
    let mags = buf[..half]
        .iter()
        .map(|z| {
            let m = z.norm() / norm;
            if m > 0.0 {
                m.log10().max(-16.0)
            } else {
                -16.0
            }
        })
        .collect();
    Ok((omegas, mags))
}
