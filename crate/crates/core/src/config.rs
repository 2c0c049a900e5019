//! JSON domain description.
//!
//! ```json
//! {
//!   "variables": [
//!     {"name": "x", "kind": "euclidean", "bounds": [0.0, 1.0]},
//!     {"name": "n", "kind": "integer", "bounds": [1, 5]},
//!     {"name": "k", "kind": "discrete", "items": ["a", "b"]},
//!     {"name": "r", "kind": "discrete_numeric", "items": [0.1, 0.5]}
//!   ],
//!   "constraint": "x^2 + n <= 3",
//!   "fidelity": {
//!     "variables": [{"name": "z", "kind": "euclidean", "bounds": [0.0, 1.0]}],
//!     "z_hf": [1.0],
//!     "cost_expression": "z + 0.1"
//!   }
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use serde::{Deserialize, Serialize};

use crate::domain::{Constraint, Cost, Domain, FidelitySpace, VariableKind, VariableSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<serde_json::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityConfig {
    pub variables: Vec<VariableConfig>,
    pub z_hf: Vec<f64>,
    pub cost_expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub variables: Vec<VariableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityConfig>,
}

/// Parses a JSON config into a domain and an optional fidelity space.
pub fn parse_domain(config_text: &str) -> Result<(Domain, Option<FidelitySpace>)> {
    let cfg: DomainConfig = serde_json::from_str(config_text).map_err(|e| Error::MalformedConfig(e.to_string()))?;
    build(&cfg)
}

pub fn build(cfg: &DomainConfig) -> Result<(Domain, Option<FidelitySpace>)> {
    let vars = cfg
        .variables
        .iter()
        .map(variable_from_config)
        .collect::<Result<Vec<_>>>()?;
    let mut domain = Domain::new(vars)?;
    if let Some(src) = &cfg.constraint {
        domain = domain.with_constraint_expr(src)?;
    }
    let fidelity = match &cfg.fidelity {
        None => None,
        Some(f) => {
            let vars = f
                .variables
                .iter()
                .map(variable_from_config)
                .collect::<Result<Vec<_>>>()?;
            if f.z_hf.len() != vars.len() {
                return Err(Error::ZHfOutOfSpace);
            }
            Some(FidelitySpace::with_cost_expr(vars, f.z_hf.clone(), &f.cost_expression)?)
        }
    };
    Ok((domain, fidelity))
}

fn variable_from_config(v: &VariableConfig) -> Result<VariableSpec> {
    let need_bounds = || {
        v.bounds
            .ok_or_else(|| Error::MalformedConfig(format!("variable `{}` needs `bounds`", v.name)))
    };
    let need_items = || {
        v.items
            .as_ref()
            .ok_or_else(|| Error::MalformedConfig(format!("variable `{}` needs `items`", v.name)))
    };
    let kind = match v.kind.as_str() {
        "euclidean" | "integer" => {
            if v.items.is_some() {
                return Err(Error::MalformedConfig(format!(
                    "variable `{}` takes `bounds`, not `items`",
                    v.name
                )));
            }
            let [lo, hi] = need_bounds()?;
            if v.kind == "euclidean" {
                VariableKind::Euclidean { lo, hi }
            } else {
                VariableKind::Integer { lo, hi }
            }
        }
        "discrete" | "discrete_numeric" => {
            if v.bounds.is_some() {
                return Err(Error::MalformedConfig(format!(
                    "variable `{}` takes `items`, not `bounds`",
                    v.name
                )));
            }
            let items = need_items()?;
            if v.kind == "discrete" {
                let labels = items
                    .iter()
                    .map(|it| {
                        it.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| Error::MalformedConfig(format!("items of `{}` must be strings", v.name)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                VariableKind::Discrete { items: labels }
            } else {
                let nums = items
                    .iter()
                    .map(|it| {
                        it.as_f64()
                            .ok_or_else(|| Error::MalformedConfig(format!("items of `{}` must be numbers", v.name)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                VariableKind::DiscreteNumeric { items: nums }
            }
        }
        other => return Err(Error::UnknownKind(other.to_string())),
    };
    VariableSpec::new(v.name.clone(), kind)
}

fn variable_to_config(v: &VariableSpec) -> VariableConfig {
    let (bounds, items) = match &v.kind {
        VariableKind::Euclidean { lo, hi } | VariableKind::Integer { lo, hi } => (Some([*lo, *hi]), None),
        VariableKind::Discrete { items } => (
            None,
            Some(items.iter().map(|s| serde_json::Value::from(s.clone())).collect()),
        ),
        VariableKind::DiscreteNumeric { items } => {
            (None, Some(items.iter().map(|&x| serde_json::Value::from(x)).collect()))
        }
    };
    VariableConfig {
        name: v.name.clone(),
        kind: v.kind.name().to_string(),
        bounds,
        items,
    }
}

/// Inverse of [`parse_domain`]. Closure constraints and costs cannot be serialised.
pub fn to_config(domain: &Domain, fidelity: Option<&FidelitySpace>) -> Result<DomainConfig> {
    let constraint = match domain.constraint() {
        None => None,
        Some(Constraint::Expr(e)) => Some(e.source().to_string()),
        Some(Constraint::Func(_)) => {
            return Err(Error::MalformedConfig(
                "closure constraints have no config representation".into(),
            ))
        }
    };
    let fidelity = match fidelity {
        None => None,
        Some(f) => {
            let cost_expression = match f.cost_spec() {
                Cost::Expr(e) => e.source().to_string(),
                Cost::Func(_) => {
                    return Err(Error::MalformedConfig(
                        "closure costs have no config representation".into(),
                    ))
                }
            };
            Some(FidelityConfig {
                variables: f.variables().iter().map(variable_to_config).collect(),
                z_hf: f.z_hf().to_vec(),
                cost_expression,
            })
        }
    };
    Ok(DomainConfig {
        variables: domain.variables().iter().map(variable_to_config).collect(),
        constraint,
        fidelity,
    })
}

pub fn to_config_string(domain: &Domain, fidelity: Option<&FidelitySpace>) -> Result<String> {
    let cfg = to_config(domain, fidelity)?;
    serde_json::to_string_pretty(&cfg).map_err(|e| Error::MalformedConfig(e.to_string()))
}
