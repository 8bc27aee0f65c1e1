//! Command-line front end: parses a network file, runs one analysis and
//! writes a CSV table with a `#` header recording the resolved settings.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{eval_kernel, KernelExpander, KernelOptions, KernelSignature, Sign};
use crate::model::{build_bilinear, InitialState, ModelSpec};
use crate::network::evaluate_network;
use crate::oracle::{lindblad_integrate, semiclassical_response, FockOptions, DEFAULT_LEAK_TOLERANCE, DEFAULT_TRUNCATION};
use crate::response::{output_spectrum, volterra_response, DriveSignal, KernelSeries, ResponseResult, Segment};
use crate::spectra::signature_susceptibility;
use crate::specfile::{parse_spec, Component, SpecFile};

/// Largest number of rows a grid may produce.
pub const MAX_GRID_POINTS: usize = 10_000_000;

const DEFAULT_TMAX: f64 = 40.0 * std::f64::consts::PI;

#[derive(Parser, Debug)]
#[command(name = "qvolterra", version, about = "Volterra-series analysis of nonlinear quantum optical networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate a time-domain kernel on a τ grid.
    Kernel(KernelArgs),
    /// Tabulate a susceptibility on an ω grid.
    Suscept(SusceptArgs),
    /// Output trajectory for a coherent drive.
    Respond(RespondArgs),
    /// Spectrum of the output quadrature over a steady-state segment.
    Spectrum(SpectrumArgs),
    /// Susceptibility of the composed network.
    Compose(ComposeArgs),
    /// Volterra, mean-field and Fock-space trajectories side by side.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    /// Network description file.
    pub spec: PathBuf,
    /// Component to analyse; may be omitted when the file defines one.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Signature such as `-:-+-`; defaults to all `−`.
    #[arg(long, allow_hyphen_values = true)]
    pub signature: Option<String>,
    #[arg(long, default_value = "0:10:0.1", allow_hyphen_values = true)]
    pub tau_grid: String,
}

#[derive(Args, Debug)]
pub struct SusceptArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub signature: Option<String>,
    #[arg(long, default_value = "-2:2:0.01", allow_hyphen_values = true)]
    pub omega_grid: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Volterra,
    Oracle,
    Semiclassical,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Volterra => "volterra",
            Method::Oracle => "oracle",
            Method::Semiclassical => "semiclassical",
        }
    }
}

#[derive(Args, Debug)]
pub struct DriveArgs {
    /// `eps,omega_d` for β(t) = eps·e^{−i omega_d t}.
    #[arg(long, default_value = "0.6,1.0", allow_hyphen_values = true)]
    pub drive: String,
    #[arg(long, default_value_t = DEFAULT_TMAX)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Highest Volterra order.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Fock levels per mode for the oracle.
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: usize,
}

#[derive(Args, Debug)]
pub struct RespondArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Method::Volterra)]
    pub method: Method,
    #[command(flatten)]
    pub drive: DriveArgs,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Method::Volterra)]
    pub method: Method,
    #[command(flatten)]
    pub drive: DriveArgs,
    /// `start:stop` in time units; defaults to the second half.
    #[arg(long, allow_hyphen_values = true)]
    pub segment: Option<String>,
}

#[derive(Args, Debug)]
pub struct ComposeArgs {
    /// Network description file.
    pub spec: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Signature to tabulate; its order may not exceed `--order`.
    #[arg(long, allow_hyphen_values = true)]
    pub signature: Option<String>,
    #[arg(long, default_value = "-2:2:0.01", allow_hyphen_values = true)]
    pub omega_grid: String,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub drive: DriveArgs,
    /// Fock levels of the coarse reference trajectory.
    #[arg(long, default_value_t = 5)]
    pub baseline_truncation: usize,
}

/// Usage problems exit with 1, numerical failures with 2.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TruncationOverflow { .. }
        | Error::ExpmOverflow { .. }
        | Error::DefectiveDrift { .. }
        | Error::NonDecayingKernel { .. }
        | Error::SingularResolvent { .. }
        | Error::GridTooLarge { .. }
        | Error::TruncationLeak { .. }
        | Error::UnphysicalCovariance { .. }
        | Error::Numerical(_) => 2,
        _ => 1,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status; the table goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(&cli.command) {
        Ok(table) => match out.write_all(table.as_bytes()).and_then(|_| out.flush()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    text: String,
}

impl Table {
    fn new(command: &str) -> Self {
        Self {
            text: format!("# qvolterra {command}\n"),
        }
    }

    fn setting(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "# {key} = {value}");
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn columns(&mut self, names: &[String]) {
        let _ = writeln!(self.text, "{}", names.join(","));
    }

    fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::Domain(message.into())
}

fn load(path: &PathBuf) -> Result<SpecFile> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text)
}

fn pick<'a>(spec: &'a SpecFile, model: &Option<String>) -> Result<(&'a str, &'a Component)> {
    match model {
        Some(name) => spec
            .component(name)
            .map(|c| (c.name.as_str(), &c.component))
            .ok_or_else(|| Error::UnknownComponent(name.clone())),
        None => match spec.components.as_slice() {
            [only] => Ok((only.name.as_str(), &only.component)),
            _ => Err(usage("several components defined; choose one with --model")),
        },
    }
}

fn describe(table: &mut Table, spec: &SpecFile, path: &PathBuf) {
    table.setting("spec", path.display());
    for c in &spec.components {
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
        table.setting(&format!("component {}", c.name), format!("{} {}", c.kind, params.join(" ")));
    }
    table.setting("network", spec.network.leaves().join(" "));
}

/// Inclusive grid `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(usage(format!("grid `{text}` is not start:stop:step")));
    };
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| usage(format!("`{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(usage(format!("`{s}` is not finite")))
        }
    };
    let (a, b, h) = (parse(a)?, parse(b)?, parse(h)?);
    if !(h > 0.0) || b < a {
        return Err(usage(format!("grid `{text}` needs step > 0 and stop >= start")));
    }
    let n = ((b - a) / h * (1.0 + 1e-12)).floor() as usize + 1;
    if n > MAX_GRID_POINTS {
        return Err(usage(format!("grid `{text}` has too many points")));
    }
    Ok((0..n).map(|k| a + k as f64 * h).collect())
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(|c| c == ',' || c == ':')
        .ok_or_else(|| usage(format!("{what} `{text}` needs two numbers")))?;
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| usage(format!("`{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(usage(format!("`{s}` is not finite")))
        }
    };
    Ok((parse(a)?, parse(b)?))
}

fn resolve_signature(text: &Option<String>, order: usize, ports: usize) -> Result<KernelSignature> {
    let sig = match text {
        Some(s) => s.parse::<KernelSignature>()?,
        None => KernelSignature::single_port(Sign::Minus, &vec![Sign::Minus; order]),
    };
    sig.check(ports, usize::MAX)?;
    Ok(sig)
}

fn check_order(sig: &KernelSignature, order: usize) -> Result<()> {
    if order == 0 {
        return Err(usage("--order must be at least 1"));
    }
    if sig.order() != order {
        return Err(usage(format!("signature {sig} has order {}, not {order}", sig.order())));
    }
    Ok(())
}

/// Row-major product grid, first coordinate slowest.
fn product_rows(axis: &[f64], dims: usize, mut f: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
    let total = axis.len().checked_pow(dims as u32).filter(|&t| t <= MAX_GRID_POINTS);
    if total.is_none() {
        return Err(usage("grid has too many points"));
    }
    let mut idx = vec![0usize; dims];
    let mut point = vec![0.0; dims];
    loop {
        for (p, &i) in point.iter_mut().zip(&idx) {
            *p = axis[i];
        }
        f(&point)?;
        let mut d = dims;
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axis.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Kernel(a) => kernel_table(a),
        Command::Suscept(a) => suscept_table(a),
        Command::Respond(a) => respond_table(a),
        Command::Spectrum(a) => spectrum_table(a),
        Command::Compose(a) => compose_table(a),
        Command::Compare(a) => compare_table(a),
    }
}

fn kernel_table(a: &KernelArgs) -> Result<String> {
    let spec = load(&a.common.spec)?;
    let (name, comp) = pick(&spec, &a.common.model)?;
    let sig = resolve_signature(&a.signature, a.order, comp.ports())?;
    check_order(&sig, a.order)?;
    let taus = parse_grid(&a.tau_grid)?;
    let sys = comp.bilinear()?;

    let mut t = Table::new("kernel");
    describe(&mut t, &spec, &a.common.spec);
    t.setting("model", name);
    t.setting("order", a.order);
    t.setting("signature", &sig);
    t.setting("tau_grid", &a.tau_grid);
    let opts = KernelOptions {
        max_order: sig.order(),
        ..KernelOptions::default()
    };
    // Exponential sums are cheap to tabulate; defective drifts fall back
    // to direct propagation.
    let symbolic = KernelExpander::new(&sys, &opts).and_then(|e| e.kernel(&sig));
    match &symbolic {
        Ok(_) => t.setting("evaluation", "eigen-expansion"),
        Err(_) => t.setting("evaluation", "propagator"),
    }
    let mut cols = axis_names("tau", sig.order());
    cols.extend(["re".to_string(), "im".to_string()]);
    t.columns(&cols);
    product_rows(&taus, sig.order(), |p| {
        let v = match &symbolic {
            Ok(k) => k.eval(p),
            Err(_) => eval_kernel(&sys, &sig, p)?,
        };
        let mut row = p.to_vec();
        row.extend([v.re, v.im]);
        t.row(&row);
        Ok(())
    })?;
    Ok(t.text)
}

fn suscept_rows(t: &mut Table, order: usize, omegas: &[f64], f: impl Fn(&[f64]) -> Complex64) -> Result<()> {
    let mut cols = axis_names("omega", order);
    cols.extend(["re".to_string(), "im".to_string()]);
    t.columns(&cols);
    product_rows(omegas, order, |p| {
        let v = f(p);
        let mut row = p.to_vec();
        row.extend([v.re, v.im]);
        t.row(&row);
        Ok(())
    })
}

fn suscept_table(a: &SusceptArgs) -> Result<String> {
    let spec = load(&a.common.spec)?;
    let (name, comp) = pick(&spec, &a.common.model)?;
    let sig = resolve_signature(&a.signature, a.order, comp.ports())?;
    check_order(&sig, a.order)?;
    let omegas = parse_grid(&a.omega_grid)?;
    let r = signature_susceptibility(&comp.bilinear()?, &sig)?;

    let mut t = Table::new("suscept");
    describe(&mut t, &spec, &a.common.spec);
    t.setting("model", name);
    t.setting("order", a.order);
    t.setting("signature", &sig);
    t.setting("omega_grid", &a.omega_grid);
    suscept_rows(&mut t, sig.order(), &omegas, |w| r.eval(w))?;
    Ok(t.text)
}

fn compose_table(a: &ComposeArgs) -> Result<String> {
    let spec = load(&a.spec)?;
    if a.order == 0 {
        return Err(usage("--order must be at least 1"));
    }
    let omegas = parse_grid(&a.omega_grid)?;
    let sets = spec.susceptibilities(a.order)?;
    let net = evaluate_network(&spec.network, &sets, a.order)?;
    let sig = resolve_signature(&a.signature, 1, net.ports)?;
    if sig.order() > a.order {
        return Err(usage(format!("signature {sig} exceeds --order {}", a.order)));
    }

    let mut t = Table::new("compose");
    describe(&mut t, &spec, &a.spec);
    t.setting("order", a.order);
    t.setting("signature", &sig);
    t.setting("omega_grid", &a.omega_grid);
    t.setting("ports", net.ports);
    t.setting("entries", net.len());
    for (s, _) in net.entries() {
        t.comment(&format!("inventory {s}"));
    }
    suscept_rows(&mut t, sig.order(), &omegas, |w| net.eval(&sig, w))?;
    Ok(t.text)
}

struct Drive {
    signal: DriveSignal,
    eps: f64,
    omega: f64,
}

fn make_drive(a: &DriveArgs) -> Result<Drive> {
    let (eps, omega) = parse_pair(&a.drive, "--drive")?;
    if !(a.dt > 0.0) || !a.dt.is_finite() || !(a.tmax > 0.0) || !a.tmax.is_finite() {
        return Err(usage("--dt and --tmax must be positive"));
    }
    if a.order == 0 {
        return Err(usage("--order must be at least 1"));
    }
    let n = (a.tmax / a.dt * (1.0 + 1e-12)).floor() as usize + 1;
    if n > MAX_GRID_POINTS {
        return Err(usage("time grid has too many points"));
    }
    Ok(Drive {
        signal: DriveSignal::rotating(eps, omega, a.dt, n)?,
        eps,
        omega,
    })
}

fn drive_settings(t: &mut Table, a: &DriveArgs, d: &Drive) {
    t.setting("drive", format!("{} * exp(-i {} t)", num(d.eps), num(d.omega)));
    t.setting("tmax", num(a.tmax));
    t.setting("dt", num(a.dt));
    t.setting("samples", d.signal.len());
    t.setting("order", a.order);
    t.setting("truncation", a.truncation);
}

fn hamiltonian_model(comp: &Component, name: &str) -> Result<ModelSpec> {
    comp.model_spec()
        .ok_or_else(|| usage(format!("component `{name}` has no internal modes to simulate")))
}

fn oracle_run(model: &ModelSpec, drive: &DriveSignal, truncation: usize, leak: Option<f64>) -> Result<ResponseResult> {
    let opts = FockOptions {
        truncation,
        leak_tolerance: leak,
        checkpoint_every: 0,
        initial: InitialState::Vacuum,
    };
    Ok(lindblad_integrate(model, drive, &opts)?.response())
}

fn simulate(comp: &Component, name: &str, method: Method, a: &DriveArgs, drive: &DriveSignal) -> Result<ResponseResult> {
    match method {
        Method::Volterra => {
            let sys = match comp {
                Component::Nonlinear(s) => build_bilinear(s, &InitialState::Vacuum)?,
                Component::Linear(_) => comp.bilinear()?,
            };
            let series = KernelSeries::from_system(&sys, a.order, 0, 0)?;
            volterra_response(&series, drive, a.order)
        }
        Method::Oracle => oracle_run(&hamiltonian_model(comp, name)?, drive, a.truncation, Some(DEFAULT_LEAK_TOLERANCE)),
        Method::Semiclassical => Ok(semiclassical_response(&hamiltonian_model(comp, name)?, drive)?.response()),
    }
}

fn respond_table(a: &RespondArgs) -> Result<String> {
    let spec = load(&a.common.spec)?;
    let (name, comp) = pick(&spec, &a.common.model)?;
    let d = make_drive(&a.drive)?;
    let r = simulate(comp, name, a.method, &a.drive, &d.signal)?;

    let mut t = Table::new("respond");
    describe(&mut t, &spec, &a.common.spec);
    t.setting("model", name);
    t.setting("method", a.method.name());
    drive_settings(&mut t, &a.drive, &d);
    t.setting("ports", "in 0 -> out 0");
    let mut cols: Vec<String> = ["t", "re_b_out", "im_b_out", "x_out"].iter().map(|s| s.to_string()).collect();
    for n in r.orders.keys() {
        cols.push(format!("re_y{n}"));
        cols.push(format!("im_y{n}"));
    }
    t.columns(&cols);
    let x = r.x_out();
    for k in 0..r.t.len() {
        let mut row = vec![r.t[k], r.total[k].re, r.total[k].im, x[k]];
        for y in r.orders.values() {
            row.extend([y[k].re, y[k].im]);
        }
        t.row(&row);
    }
    Ok(t.text)
}

fn spectrum_table(a: &SpectrumArgs) -> Result<String> {
    let spec = load(&a.common.spec)?;
    let (name, comp) = pick(&spec, &a.common.model)?;
    let d = make_drive(&a.drive)?;
    let segment = match &a.segment {
        Some(s) => {
            let (start, stop) = parse_pair(s, "--segment")?;
            Segment { start, stop }
        }
        None => Segment {
            start: a.drive.tmax / 2.0,
            stop: a.drive.tmax,
        },
    };
    let r = simulate(comp, name, a.method, &a.drive, &d.signal)?;
    let (omega, mag) = output_spectrum(&r, segment)?;

    let mut t = Table::new("spectrum");
    describe(&mut t, &spec, &a.common.spec);
    t.setting("model", name);
    t.setting("method", a.method.name());
    drive_settings(&mut t, &a.drive, &d);
    t.setting("segment", format!("{}:{}", num(segment.start), num(segment.stop)));
    t.columns(&["omega".to_string(), "log10_magnitude".to_string()]);
    for (w, m) in omega.iter().zip(&mag) {
        t.row(&[*w, *m]);
    }
    Ok(t.text)
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64).sqrt()
}

fn compare_table(a: &CompareArgs) -> Result<String> {
    let spec = load(&a.common.spec)?;
    let (name, comp) = pick(&spec, &a.common.model)?;
    let model = hamiltonian_model(comp, name)?;
    let d = make_drive(&a.drive)?;
    if a.baseline_truncation < 2 {
        return Err(usage("--baseline-truncation must be at least 2"));
    }
    let volterra = simulate(comp, name, Method::Volterra, &a.drive, &d.signal)?.x_out();
    let semi = semiclassical_response(&model, &d.signal)?.response().x_out();
    let reference = oracle_run(&model, &d.signal, a.drive.truncation, Some(DEFAULT_LEAK_TOLERANCE))?;
    // The coarse run is expected to leak out of its truncation.
    let baseline = oracle_run(&model, &d.signal, a.baseline_truncation, None)?.x_out();
    let x_ref = reference.x_out();
    let (rv, rs, rb) = (rms(&volterra, &x_ref), rms(&semi, &x_ref), rms(&baseline, &x_ref));

    let mut t = Table::new("compare");
    describe(&mut t, &spec, &a.common.spec);
    t.setting("model", name);
    drive_settings(&mut t, &a.drive, &d);
    t.setting("baseline_truncation", a.baseline_truncation);
    t.setting("rms_volterra", num(rv));
    t.setting("rms_semiclassical", num(rs));
    t.setting("rms_baseline", num(rb));
    t.setting("volterra_closest", rv < rs && rv < rb);
    let cols: Vec<String> = ["t", "x_volterra", "x_semiclassical", "x_oracle", "x_oracle_baseline"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    t.columns(&cols);
    for k in 0..x_ref.len() {
        t.row(&[reference.t[k], volterra[k], semi[k], x_ref[k], baseline[k]]);
    }
    Ok(t.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:0.3:0.1").unwrap().len(), 4);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn product_order() {
        let mut seen = Vec::new();
        product_rows(&[0.0, 1.0], 2, |p| {
            seen.push(p.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Domain("x".into())), 1);
        assert_eq!(exit_code(&Error::NonDecayingKernel { rate: "0".into() }), 2);
    }
}
