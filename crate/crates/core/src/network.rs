//! Network composition of susceptibility sets.
//!
//! The series product feeds every output line of the upstream component
//! into the matching input line of the downstream one. Lines are
//! `(port, sign)` pairs, so phase-conjugate paths (`b†` in, `b` out) are
//! carried along with the direct ones.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{KernelSignature, Sign};
use crate::spectra::{Cascade, InputFilter, OutputFilter, Susceptibility, SusceptibilitySet};

type Line = (usize, Sign);

/// Side-by-side assembly; the second set's ports follow the first's.
pub fn concatenate(c1: &SusceptibilitySet, c2: &SusceptibilitySet) -> SusceptibilitySet {
    let (m1, m2) = (c1.ports, c2.ports);
    let mut s = DMatrix::zeros(m1 + m2, m1 + m2);
    s.view_mut((0, 0), (m1, m1)).copy_from(&c1.feedthrough);
    s.view_mut((m1, m1), (m2, m2)).copy_from(&c2.feedthrough);
    let mut out = SusceptibilitySet::empty(m1 + m2, s);
    for (sig, v) in c1.entries() {
        out.insert(v.clone(), sig.clone());
    }
    for (sig, v) in c2.entries() {
        let shifted = KernelSignature::new(
            sig.out_port + m1,
            sig.out_sign,
            sig.inputs.iter().map(|&(p, s)| (p + m1, s)).collect(),
        );
        out.insert(v.clone(), shifted);
    }
    out
}

/// Cascade connection: `upstream`'s outputs drive `downstream`'s inputs.
/// Contributions above `max_order` are discarded.
pub fn series(downstream: &SusceptibilitySet, upstream: &SusceptibilitySet, max_order: usize) -> Result<SusceptibilitySet> {
    if downstream.ports != upstream.ports {
        return Err(Error::PortMismatch(format!(
            "series junction joins {} upstream ports to {} downstream ports",
            upstream.ports, downstream.ports
        )));
    }
    let mut by_line: BTreeMap<Line, Vec<(&KernelSignature, &Susceptibility)>> = BTreeMap::new();
    for (sig, v) in upstream.entries() {
        if sig.order() <= max_order {
            by_line.entry((sig.out_port, sig.out_sign)).or_default().push((sig, v));
        }
    }
    let empty = Vec::new();
    let mut acc: BTreeMap<KernelSignature, Vec<Susceptibility>> = BTreeMap::new();
    for (dsig, dval) in downstream.entries() {
        let r = dsig.order();
        if r > max_order {
            continue;
        }
        let choices: Vec<&Vec<(&KernelSignature, &Susceptibility)>> =
            dsig.inputs.iter().map(|line| by_line.get(line).unwrap_or(&empty)).collect();
        if choices.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; r];
        'tuples: loop {
            let chosen: Vec<&(&KernelSignature, &Susceptibility)> =
                pick.iter().zip(&choices).map(|(&i, c)| &c[i]).collect();
            let total: usize = chosen.iter().map(|(s, _)| s.order()).sum();
            if total <= max_order {
                let inputs: Vec<Line> = chosen.iter().flat_map(|(s, _)| s.inputs.iter().copied()).collect();
                let sig = KernelSignature::new(dsig.out_port, dsig.out_sign, inputs);
                let node = Susceptibility::Cascade(Arc::new(Cascade {
                    downstream: dval.clone(),
                    upstream: chosen.iter().map(|(_, v)| (*v).clone()).collect(),
                    groups: chosen.iter().map(|(s, _)| s.order()).collect(),
                }));
                acc.entry(sig).or_default().push(node);
            }
            for k in (0..r).rev() {
                pick[k] += 1;
                if pick[k] < choices[k].len() {
                    continue 'tuples;
                }
                pick[k] = 0;
            }
            break;
        }
    }
    let mut out = SusceptibilitySet::empty(downstream.ports, &downstream.feedthrough * &upstream.feedthrough);
    for (sig, parts) in acc {
        out.insert(Susceptibility::sum(parts), sig);
    }
    Ok(out)
}

fn require_linear(set: &SusceptibilitySet) -> Result<()> {
    if set.is_linear() {
        Ok(())
    } else {
        Err(Error::NotLinear { order: set.max_order() })
    }
}

/// Order-1 entries of a linear set grouped by input line.
fn linear_by_input(set: &SusceptibilitySet) -> BTreeMap<Line, Vec<(Line, Susceptibility)>> {
    let mut map: BTreeMap<Line, Vec<(Line, Susceptibility)>> = BTreeMap::new();
    for (sig, v) in set.order(1) {
        map.entry(sig.inputs[0]).or_default().push(((sig.out_port, sig.out_sign), v.clone()));
    }
    map
}

/// Linear stage `g1` in front of `nl`:
/// `χ(ω₁…ωₙ) = Σ χ_nl(ω₁…ωₙ) ∏ₖ G₁(ωₖ)`.
pub fn series_linear_first(nl: &SusceptibilitySet, g1: &SusceptibilitySet) -> Result<SusceptibilitySet> {
    require_linear(g1)?;
    if nl.ports != g1.ports {
        return Err(Error::PortMismatch(format!(
            "linear stage has {} ports, nonlinear stage {}",
            g1.ports, nl.ports
        )));
    }
    // Entries of g1 indexed by their output line: which external inputs
    // reach a given internal line.
    let mut by_out: BTreeMap<Line, Vec<(Line, Susceptibility)>> = BTreeMap::new();
    for (sig, v) in g1.order(1) {
        by_out.entry((sig.out_port, sig.out_sign)).or_default().push((sig.inputs[0], v.clone()));
    }
    let mut acc: BTreeMap<KernelSignature, Vec<Susceptibility>> = BTreeMap::new();
    for (sig, inner) in nl.entries() {
        let options: Vec<&Vec<(Line, Susceptibility)>> = match sig.inputs.iter().map(|l| by_out.get(l)).collect() {
            Some(o) => o,
            None => continue,
        };
        let n = sig.order();
        let mut pick = vec![0usize; n];
        'tuples: loop {
            let inputs: Vec<Line> = pick.iter().zip(&options).map(|(&i, o)| o[i].0).collect();
            let gains: Vec<Susceptibility> = pick.iter().zip(&options).map(|(&i, o)| o[i].1.clone()).collect();
            acc.entry(KernelSignature::new(sig.out_port, sig.out_sign, inputs))
                .or_default()
                .push(Susceptibility::InputFilter(Arc::new(InputFilter {
                    inner: inner.clone(),
                    gains,
                })));
            for k in (0..n).rev() {
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    continue 'tuples;
                }
                pick[k] = 0;
            }
            break;
        }
    }
    let mut out = SusceptibilitySet::empty(nl.ports, &nl.feedthrough * &g1.feedthrough);
    for (sig, parts) in acc {
        out.insert(Susceptibility::sum(parts), sig);
    }
    Ok(out)
}

/// Linear stage `g2` after `nl`: `χ(ω₁…ωₙ) = Σ G₂(ω₁+⋯+ωₙ) χ_nl(ω₁…ωₙ)`.
pub fn series_linear_second(g2: &SusceptibilitySet, nl: &SusceptibilitySet) -> Result<SusceptibilitySet> {
    require_linear(g2)?;
    if nl.ports != g2.ports {
        return Err(Error::PortMismatch(format!(
            "linear stage has {} ports, nonlinear stage {}",
            g2.ports, nl.ports
        )));
    }
    let by_in = linear_by_input(g2);
    let mut acc: BTreeMap<KernelSignature, Vec<Susceptibility>> = BTreeMap::new();
    for (sig, inner) in nl.entries() {
        let Some(targets) = by_in.get(&(sig.out_port, sig.out_sign)) else {
            continue;
        };
        for ((port, sign), gain) in targets {
            acc.entry(KernelSignature::new(*port, *sign, sig.inputs.clone()))
                .or_default()
                .push(Susceptibility::OutputFilter(Arc::new(OutputFilter {
                    gain: gain.clone(),
                    inner: inner.clone(),
                })));
        }
    }
    let mut out = SusceptibilitySet::empty(nl.ports, &g2.feedthrough * &nl.feedthrough);
    for (sig, parts) in acc {
        out.insert(Susceptibility::sum(parts), sig);
    }
    Ok(out)
}

/// Composition tree over named components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkExpr {
    Leaf(String),
    Series {
        downstream: Box<NetworkExpr>,
        upstream: Box<NetworkExpr>,
    },
    Concat {
        left: Box<NetworkExpr>,
        right: Box<NetworkExpr>,
    },
}

impl NetworkExpr {
    pub fn leaf(name: impl Into<String>) -> Self {
        NetworkExpr::Leaf(name.into())
    }

    pub fn series(downstream: NetworkExpr, upstream: NetworkExpr) -> Self {
        NetworkExpr::Series {
            downstream: Box::new(downstream),
            upstream: Box::new(upstream),
        }
    }

    pub fn concat(left: NetworkExpr, right: NetworkExpr) -> Self {
        NetworkExpr::Concat {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Cascade in signal order: `stages[0]` receives the external input.
    pub fn chain<S: Into<String>>(stages: impl IntoIterator<Item = S>) -> Option<Self> {
        let mut it = stages.into_iter();
        let mut acc = NetworkExpr::leaf(it.next()?);
        for s in it {
            acc = NetworkExpr::series(NetworkExpr::leaf(s), acc);
        }
        Some(acc)
    }

    /// Side-by-side assembly in port order.
    pub fn parallel<S: Into<String>>(parts: impl IntoIterator<Item = S>) -> Option<Self> {
        let mut it = parts.into_iter();
        let mut acc = NetworkExpr::leaf(it.next()?);
        for s in it {
            acc = NetworkExpr::concat(acc, NetworkExpr::leaf(s));
        }
        Some(acc)
    }

    pub fn leaves(&self) -> Vec<&str> {
        match self {
            NetworkExpr::Leaf(n) => vec![n.as_str()],
            NetworkExpr::Series { downstream, upstream } => {
                let mut v = upstream.leaves();
                v.extend(downstream.leaves());
                v
            }
            NetworkExpr::Concat { left, right } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

pub fn evaluate_network(
    expr: &NetworkExpr,
    components: &BTreeMap<String, SusceptibilitySet>,
    max_order: usize,
) -> Result<SusceptibilitySet> {
    match expr {
        NetworkExpr::Leaf(name) => {
            let set = components.get(name).ok_or_else(|| Error::UnknownComponent(name.clone()))?;
            let mut out = SusceptibilitySet::empty(set.ports, set.feedthrough.clone());
            for (sig, v) in set.entries().filter(|(s, _)| s.order() <= max_order) {
                out.insert(v.clone(), sig.clone());
            }
            Ok(out)
        }
        NetworkExpr::Series { downstream, upstream } => {
            let up = evaluate_network(upstream, components, max_order)?;
            let down = evaluate_network(downstream, components, max_order)?;
            series(&down, &up, max_order)
        }
        NetworkExpr::Concat { left, right } => {
            let l = evaluate_network(left, components, max_order)?;
            let r = evaluate_network(right, components, max_order)?;
            Ok(concatenate(&l, &r))
        }
    }
}

/// Feedthrough-only set with a scalar gain on every line.
pub fn static_gain(ports: usize, gain: Complex64) -> SusceptibilitySet {
    SusceptibilitySet::from_feedthrough(DMatrix::identity(ports, ports) * gain)
}
