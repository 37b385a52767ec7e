//! User-supplied scalar functions written as expressions in chart coordinates.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use conformal_geo::convexity::ConvexFunction;
use conformal_geo::{functions, ChartManifold, Coords, GeometryError};
use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node, Value};

/// Names of the chart coordinates an expression may use.
pub fn coordinate_names(manifold_key: &str) -> &'static [&'static str] {
    match manifold_key {
        "m3" => &["t", "x", "y"],
        "paraboloid-polar" => &["r", "theta"],
        _ => &["x", "y"],
    }
}

/// Constants available to every expression.
const CONSTANTS: &[(&str, f64)] = &[("pi", std::f64::consts::PI)];

fn evaluate(node: &Node, names: &[&str], x: &Coords) -> f64 {
    let mut ctx = probe_context(&[]);
    for (i, name) in names.iter().enumerate() {
        // names are fixed identifiers, so this cannot fail
        let _ = ctx.set_value((*name).into(), Value::Float(x[i]));
    }
    node.eval_number_with_context(&ctx).unwrap_or(f64::NAN)
}

fn probe_context(names: &[&str]) -> HashMapContext {
    let mut ctx = HashMapContext::new();
    for name in names {
        let _ = ctx.set_value((*name).into(), Value::Float(0.5));
    }
    for (name, value) in CONSTANTS {
        let _ = ctx.set_value((*name).into(), Value::Float(*value));
    }
    ctx
}

/// Resolves a built-in function key, falling back to an expression.
pub fn resolve(text: &str, m: &ChartManifold) -> Result<ConvexFunction> {
    match functions::by_key(text, m) {
        Ok(f) => return Ok(f),
        Err(GeometryError::UnknownKey(_)) => {}
        Err(e) => return Err(e.into()),
    }
    let node =
        build_operator_tree(text).with_context(|| format!("`{text}` is neither a function key nor an expression"))?;
    let names = coordinate_names(m.key());
    if let Some(bad) = node
        .iter_variable_identifiers()
        .find(|v| !names.contains(v) && !CONSTANTS.iter().any(|(c, _)| c == v))
    {
        bail!(
            "expression `{text}` uses `{bad}`; coordinates on `{}` are {names:?}",
            m.key()
        );
    }
    if let Err(e) = node.eval_number_with_context(&probe_context(names)) {
        bail!("expression `{text}` does not evaluate to a number: {e}");
    }
    let node = Arc::new(node);
    Ok(ConvexFunction::new(text.to_string(), m.key(), move |x| {
        evaluate(&node, names, x)
    }))
}
