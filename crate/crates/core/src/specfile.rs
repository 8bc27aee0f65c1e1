//! Network description files.
//!
//! ```text
//! # comments start with '#'
//! [component cav]
//! type = linear_cavity
//! omega = 1.0
//! gamma = 0.2
//!
//! [component kerr]
//! type = kerr_cavity
//! omega_a = 1.0
//! chi = 0.01
//! gamma = 0.2
//!
//! [network]
//! chain = cav -> kerr -> cav
//! ```
//!
//! `chain` lists stages in signal order; `parallel = a | b` stacks ports.
//! Without a `[network]` section a file must define exactly one component.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    build_bilinear, kerr_cavity, linear_component, optomech, BilinearSystem, InitialState, LinearModel, ModelSpec,
};
use crate::network::NetworkExpr;
use crate::spectra::{susceptibility_set, SusceptibilitySet};

/// A parsed component.
#[derive(Clone, Debug)]
pub enum Component {
    Nonlinear(ModelSpec),
    Linear(LinearModel),
}

impl Component {
    pub fn ports(&self) -> usize {
        match self {
            Component::Nonlinear(s) => s.ports(),
            Component::Linear(m) => m.ports(),
        }
    }

    pub fn bilinear(&self) -> Result<BilinearSystem> {
        match self {
            Component::Nonlinear(s) => build_bilinear(s, &InitialState::Vacuum),
            Component::Linear(m) => linear_component(m),
        }
    }

    pub fn susceptibilities(&self, max_order: usize) -> Result<SusceptibilitySet> {
        susceptibility_set(&self.bilinear()?, max_order)
    }

    /// Hamiltonian description for the Fock-space and mean-field solvers;
    /// static components have none.
    pub fn model_spec(&self) -> Option<ModelSpec> {
        match self {
            Component::Nonlinear(s) => Some(s.clone()),
            Component::Linear(m) if m.ports() == 1 && m.modes() == 1 => {
                let omega = m.omega[(0, 0)].re;
                let gamma = m.coupling[(0, 0)].norm_sqr();
                kerr_cavity(omega, 0.0, gamma).ok().map(|s| s.with_truncation_degree(1))
            }
            Component::Linear(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComponentDef {
    pub name: String,
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub line: usize,
    pub component: Component,
}

#[derive(Clone, Debug)]
pub struct SpecFile {
    pub components: Vec<ComponentDef>,
    pub network: NetworkExpr,
}

impl SpecFile {
    pub fn component(&self, name: &str) -> Option<&ComponentDef> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn susceptibilities(&self, max_order: usize) -> Result<BTreeMap<String, SusceptibilitySet>> {
        self.components
            .iter()
            .map(|c| Ok((c.name.clone(), c.component.susceptibilities(max_order)?)))
            .collect()
    }
}

const KINDS: &[(&str, &[&str], &[&str])] = &[
    ("kerr_cavity", &["omega_a", "chi", "gamma"], &["degree"]),
    ("linear_cavity", &["omega", "gamma"], &[]),
    ("optomech", &["omega_a", "omega_b", "g", "gamma_a", "gamma_b"], &["degree"]),
    ("amplifier", &["gain"], &[]),
    ("beam_splitter", &["theta"], &[]),
];

struct RawComponent {
    name: String,
    line: usize,
    kind: Option<(String, usize)>,
    params: BTreeMap<String, (f64, usize)>,
}

enum Section {
    None,
    Component(usize),
    Network,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let mut raws: Vec<RawComponent> = Vec::new();
    let mut network: Option<(String, String, usize)> = None;
    let mut network_seen: Option<usize> = None;
    let mut section = Section::None;

    for (i, raw_line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| parse_error(lineno, "unterminated section header"))?
                .trim();
            let words: Vec<&str> = inner.split_whitespace().collect();
            match words.as_slice() {
                ["network"] => {
                    if network_seen.is_some() {
                        return Err(Error::DuplicateName {
                            line: lineno,
                            name: "network".into(),
                        });
                    }
                    network_seen = Some(lineno);
                    section = Section::Network;
                }
                ["component", name] => {
                    if !is_name(name) {
                        return Err(parse_error(lineno, format!("invalid component name `{name}`")));
                    }
                    if raws.iter().any(|r| r.name == *name) {
                        return Err(Error::DuplicateName {
                            line: lineno,
                            name: name.to_string(),
                        });
                    }
                    raws.push(RawComponent {
                        name: name.to_string(),
                        line: lineno,
                        kind: None,
                        params: BTreeMap::new(),
                    });
                    section = Section::Component(raws.len() - 1);
                }
                _ => return Err(parse_error(lineno, format!("unknown section `[{inner}]`"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_error(lineno, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(parse_error(lineno, "expected `key = value`"));
        }
        match section {
            Section::None => return Err(parse_error(lineno, "key outside of a section")),
            Section::Network => {
                if key != "chain" && key != "parallel" {
                    return Err(parse_error(lineno, format!("unknown network key `{key}`")));
                }
                if network.is_some() {
                    return Err(parse_error(lineno, "network already defined"));
                }
                network = Some((key.to_string(), value.to_string(), lineno));
            }
            Section::Component(idx) => {
                let comp = &mut raws[idx];
                if key == "type" {
                    if comp.kind.is_some() {
                        return Err(parse_error(lineno, "duplicate key `type`"));
                    }
                    if !KINDS.iter().any(|(k, _, _)| *k == value) {
                        return Err(Error::UnknownComponentType {
                            line: lineno,
                            kind: value.to_string(),
                        });
                    }
                    comp.kind = Some((value.to_string(), lineno));
                } else {
                    if comp.params.contains_key(key) {
                        return Err(parse_error(lineno, format!("duplicate key `{key}`")));
                    }
                    let v: f64 = value
                        .parse()
                        .map_err(|_| parse_error(lineno, format!("`{value}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(parse_error(lineno, format!("`{key}` must be finite")));
                    }
                    comp.params.insert(key.to_string(), (v, lineno));
                }
            }
        }
    }

    let mut components = Vec::with_capacity(raws.len());
    for raw in raws {
        components.push(build_component(raw)?);
    }

    let network = match network {
        Some((key, value, lineno)) => {
            let sep = if key == "chain" { "->" } else { "|" };
            let names: Vec<&str> = value.split(sep).map(str::trim).collect();
            for n in &names {
                if n.is_empty() {
                    return Err(parse_error(lineno, "empty stage in network"));
                }
                if !components.iter().any(|c: &ComponentDef| c.name == *n) {
                    return Err(parse_error(lineno, format!("undefined component `{n}`")));
                }
            }
            let expr = if key == "chain" {
                NetworkExpr::chain(names.iter().copied())
            } else {
                NetworkExpr::parallel(names.iter().copied())
            };
            expr.ok_or_else(|| parse_error(lineno, "empty network"))?
        }
        None => {
            if let Some(line) = network_seen {
                return Err(parse_error(line, "network section without `chain` or `parallel`"));
            }
            match components.as_slice() {
                [only] => NetworkExpr::leaf(only.name.clone()),
                [] => return Err(parse_error(0, "no components defined")),
                _ => return Err(parse_error(0, "several components but no [network] section")),
            }
        }
    };
    if let NetworkExpr::Series { .. } = network {
        check_series_ports(&network, &components)?;
    }
    Ok(SpecFile { components, network })
}

fn expr_ports(expr: &NetworkExpr, comps: &[ComponentDef]) -> usize {
    match expr {
        NetworkExpr::Leaf(n) => comps.iter().find(|c| &c.name == n).map_or(0, |c| c.component.ports()),
        NetworkExpr::Series { downstream, .. } => expr_ports(downstream, comps),
        NetworkExpr::Concat { left, right } => expr_ports(left, comps) + expr_ports(right, comps),
    }
}

fn check_series_ports(expr: &NetworkExpr, comps: &[ComponentDef]) -> Result<()> {
    match expr {
        NetworkExpr::Leaf(_) => Ok(()),
        NetworkExpr::Series { downstream, upstream } => {
            check_series_ports(upstream, comps)?;
            check_series_ports(downstream, comps)?;
            let (d, u) = (expr_ports(downstream, comps), expr_ports(upstream, comps));
            if d != u {
                return Err(Error::PortMismatch(format!(
                    "{} ({} ports) cannot follow {} ({} ports)",
                    downstream.leaves().join(" -> "),
                    d,
                    upstream.leaves().join(" -> "),
                    u
                )));
            }
            Ok(())
        }
        NetworkExpr::Concat { left, right } => {
            check_series_ports(left, comps)?;
            check_series_ports(right, comps)
        }
    }
}

fn build_component(raw: RawComponent) -> Result<ComponentDef> {
    let (kind, kind_line) = raw
        .kind
        .ok_or_else(|| parse_error(raw.line, format!("component `{}` has no `type`", raw.name)))?;
    let (_, required, optional) = KINDS.iter().find(|(k, _, _)| *k == kind).copied().unwrap();
    for (key, &(_, line)) in &raw.params {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(parse_error(line, format!("unknown key `{key}` for {kind}")));
        }
    }
    let get = |key: &str| -> Result<f64> {
        raw.params.get(key).map(|&(v, _)| v).ok_or_else(|| Error::MissingParameter {
            component: raw.name.clone(),
            parameter: key.to_string(),
        })
    };
    let domain = |e: Error| match e {
        Error::Domain(msg) => parse_error(kind_line, format!("component `{}`: {msg}", raw.name)),
        other => other,
    };
    let degree = match raw.params.get("degree") {
        Some(&(v, line)) => {
            if v.fract() != 0.0 || !(1.0..=16.0).contains(&v) {
                return Err(parse_error(line, "`degree` must be an integer between 1 and 16"));
            }
            Some(v as u32)
        }
        None => None,
    };
    let component = match kind.as_str() {
        "kerr_cavity" => {
            let mut s = kerr_cavity(get("omega_a")?, get("chi")?, get("gamma")?).map_err(domain)?;
            if let Some(d) = degree {
                s = s.with_truncation_degree(d);
            }
            s.validate().map_err(domain)?;
            Component::Nonlinear(s)
        }
        "optomech" => {
            let mut s = optomech(get("omega_a")?, get("omega_b")?, get("g")?, get("gamma_a")?, get("gamma_b")?).map_err(domain)?;
            if let Some(d) = degree {
                s = s.with_truncation_degree(d);
            }
            s.validate().map_err(domain)?;
            Component::Nonlinear(s)
        }
        "linear_cavity" => Component::Linear(LinearModel::cavity(get("omega")?, get("gamma")?).map_err(domain)?),
        "amplifier" => Component::Linear(LinearModel::amplifier(get("gain")?).map_err(domain)?),
        "beam_splitter" => Component::Linear(LinearModel::rotation_beam_splitter(get("theta")?).map_err(domain)?),
        _ => unreachable!("kind checked while parsing"),
    };
    Ok(ComponentDef {
        name: raw.name,
        kind,
        params: raw.params.into_iter().map(|(k, (v, _))| (k, v)).collect(),
        line: raw.line,
        component,
    })
}
