//! JSON reading and writing.
//!
//! Output is canonical: object keys are sorted, rationals render as
//! `{"num","den"}` and floats as 17-significant-digit strings. Input accepts
//! plain numbers, literal strings such as `"1/3"`, or `{"num","den"}` objects.

use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::allocation::{AllocationKind, AllocationSet, Halfspace, StandardKind};
use crate::convergence::{
    AffineItem, ConvergenceReport, HeavyTailReport, MechanismSequence, MonotoneLimitReport, PriceSchedule, WrongWayReport,
};
use crate::convexfn::{AffinePiece, PwlConvex};
use crate::error::{Error, Result};
use crate::mechanism::{Menu, MenuItem, Outcome, VerificationReport};
use crate::numeric::{scalar_from_json, NumericMode, Scalar};
use crate::solver::SolveResult;
use crate::valuation::DiscreteValuation;

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| schema(format!("missing field '{key}'")))
}

pub fn scalar<S: Scalar>(v: &Value) -> Result<S> {
    scalar_from_json(v).ok_or_else(|| schema(format!("not a number: {v}")))
}

pub fn vector<S: Scalar>(v: &Value) -> Result<Vec<S>> {
    v.as_array()
        .ok_or_else(|| schema(format!("expected an array of numbers, got {v}")))?
        .iter()
        .map(scalar)
        .collect()
}

pub fn vectors<S: Scalar>(v: &Value) -> Result<Vec<Vec<S>>> {
    v.as_array()
        .ok_or_else(|| schema(format!("expected an array of vectors, got {v}")))?
        .iter()
        .map(vector)
        .collect()
}

pub fn vector_json<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(S::to_json).collect())
}

pub fn vectors_json<S: Scalar>(v: &[Vec<S>]) -> Value {
    Value::Array(v.iter().map(|x| vector_json(x)).collect())
}

fn opt_usize(v: &Value, key: &str) -> Result<Option<usize>> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => x
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| schema(format!("'{key}' must be a nonnegative integer"))),
    }
}

pub fn allocation_from_json<S: Scalar>(v: &Value) -> Result<AllocationSet<S>> {
    let kind = field(v, "kind")?
        .as_str()
        .ok_or_else(|| schema("'kind' must be a string"))?;
    let k = opt_usize(v, "k")?;
    let vertices = v.get("vertices").map(vectors::<S>).transpose()?;
    let halfspaces = v
        .get("halfspaces")
        .map(|h| -> Result<Vec<Halfspace<S>>> {
            h.as_array()
                .ok_or_else(|| schema("'halfspaces' must be an array"))?
                .iter()
                .map(|e| Ok(Halfspace::new(vector(field(e, "normal")?)?, scalar(field(e, "offset")?)?)))
                .collect()
        })
        .transpose()?;
    let k = k
        .or_else(|| vertices.as_ref().and_then(|vs| vs.first().map(|x| x.len())))
        .or_else(|| halfspaces.as_ref().and_then(|hs| hs.first().map(|h| h.normal.len())))
        .ok_or_else(|| schema("allocation set needs 'k'"))?;
    match kind {
        "finite" => AllocationSet::finite(k, vertices.ok_or_else(|| schema("finite set needs 'vertices'"))?),
        "polytope" => match (vertices, halfspaces) {
            (Some(v), Some(h)) => AllocationSet::polytope(k, v, h),
            (Some(v), None) => AllocationSet::polytope_from_vertices(k, v),
            (None, Some(h)) => AllocationSet::polytope_from_halfspaces(k, h),
            (None, None) => Err(schema("polytope needs 'vertices' or 'halfspaces'")),
        },
        other => AllocationSet::standard(other.parse::<StandardKind>()?, k),
    }
}

pub fn allocation_to_json<S: Scalar>(g: &AllocationSet<S>) -> Value {
    if let Some(kind) = g.standard_kind() {
        return json!({"kind": kind.name(), "k": g.dim()});
    }
    let mut m = Map::new();
    m.insert(
        "kind".into(),
        json!(match g.kind() {
            AllocationKind::Finite => "finite",
            AllocationKind::Polytope => "polytope",
        }),
    );
    m.insert("k".into(), json!(g.dim()));
    m.insert("vertices".into(), vectors_json(g.vertices()));
    if let Some(hs) = g.halfspaces() {
        m.insert(
            "halfspaces".into(),
            Value::Array(
                hs.iter()
                    .map(|h| json!({"normal": vector_json(&h.normal), "offset": h.offset.to_json()}))
                    .collect(),
            ),
        );
    }
    Value::Object(m)
}

pub fn valuation_from_json<S: Scalar>(v: &Value) -> Result<DiscreteValuation<S>> {
    let support = vectors(field(v, "support")?)?;
    let probs = vector(field(v, "probs")?)?;
    DiscreteValuation::new(support, probs)
}

pub fn valuation_to_json<S: Scalar>(d: &DiscreteValuation<S>) -> Value {
    json!({"support": vectors_json(d.support()), "probs": vector_json(d.probs())})
}

/// Options that do not depend on the numeric type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstanceOptions {
    pub numeric: Option<NumericMode>,
    pub tol: Option<f64>,
    pub cap: Option<u128>,
    pub n_max: Option<usize>,
}

pub fn options_from_json(v: &Value) -> Result<InstanceOptions> {
    let Some(o) = v.get("options") else {
        return Ok(InstanceOptions::default());
    };
    if !o.is_object() {
        return Err(schema("'options' must be an object"));
    }
    let numeric = match o.get("numeric") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<NumericMode>().map_err(schema)?),
        Some(_) => return Err(schema("'numeric' must be a string")),
    };
    let tol = match o.get("tol") {
        None | Some(Value::Null) => None,
        Some(t) => Some(
            scalar::<f64>(t)
                .ok()
                .filter(|t| *t >= 0.0)
                .ok_or_else(|| schema("'tol' must be a nonnegative number"))?,
        ),
    };
    Ok(InstanceOptions {
        numeric,
        tol,
        cap: opt_usize(o, "cap")?.map(|c| c as u128),
        n_max: opt_usize(o, "n_max")?,
    })
}

#[derive(Clone, Debug)]
pub struct Instance<S> {
    pub gamma: Arc<AllocationSet<S>>,
    pub distribution: DiscreteValuation<S>,
    pub grid: Option<Vec<Vec<S>>>,
}

pub fn instance_from_json<S: Scalar>(v: &Value) -> Result<Instance<S>> {
    let gamma = Arc::new(allocation_from_json(field(v, "gamma")?)?);
    let distribution = valuation_from_json(field(v, "distribution")?)?;
    if distribution.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            got: distribution.dim(),
        });
    }
    let grid = v
        .get("options")
        .and_then(|o| o.get("grid"))
        .map(vectors::<S>)
        .transpose()?;
    Ok(Instance {
        gamma,
        distribution,
        grid,
    })
}

pub fn instance_to_json<S: Scalar>(inst: &Instance<S>) -> Value {
    json!({"gamma": allocation_to_json(&inst.gamma), "distribution": valuation_to_json(&inst.distribution)})
}

pub fn menu_items_json<S: Scalar>(items: &[MenuItem<S>]) -> Value {
    Value::Array(
        items
            .iter()
            .map(|it| json!({"g": vector_json(&it.allocation), "t": it.payment.to_json()}))
            .collect(),
    )
}

pub fn menu_items_from_json<S: Scalar>(v: &Value) -> Result<Vec<MenuItem<S>>> {
    v.as_array()
        .ok_or_else(|| schema("'menu' must be an array"))?
        .iter()
        .map(|it| Ok(MenuItem::new(vector(field(it, "g")?)?, scalar(field(it, "t")?)?)))
        .collect()
}

/// A menu file, optionally with an explicit type-to-item assignment.
#[derive(Clone, Debug)]
pub struct MechanismFile<S> {
    pub menu: Menu<S>,
    /// `(type, index into the menu as written)`.
    pub assignment: Option<Vec<(Vec<S>, usize)>>,
    /// Items as written, before sorting and deduplication.
    pub raw_items: Vec<MenuItem<S>>,
}

impl<S: Scalar> MechanismFile<S> {
    /// The assigned outcomes, if an assignment is present.
    pub fn outcomes(&self) -> Option<Vec<Outcome<S>>> {
        self.assignment.as_ref().map(|a| {
            a.iter()
                .map(|(x, i)| Outcome {
                    point: x.clone(),
                    allocation: self.raw_items[*i].allocation.clone(),
                    payment: self.raw_items[*i].payment.clone(),
                })
                .collect()
        })
    }
}

pub fn mechanism_from_json<S: Scalar>(v: &Value, fallback_gamma: Option<&Arc<AllocationSet<S>>>) -> Result<MechanismFile<S>> {
    let gamma = match (v.get("gamma"), fallback_gamma) {
        (Some(g), _) => Arc::new(allocation_from_json(g)?),
        (None, Some(g)) => g.clone(),
        (None, None) => return Err(schema("mechanism needs 'gamma'")),
    };
    let raw_items = menu_items_from_json(field(v, "menu")?)?;
    let menu = Menu::new(gamma, raw_items.clone())?;
    let assignment = v
        .get("assignment")
        .map(|a| -> Result<Vec<(Vec<S>, usize)>> {
            a.as_array()
                .ok_or_else(|| schema("'assignment' must be an array"))?
                .iter()
                .map(|e| {
                    let x = vector(field(e, "x")?)?;
                    let i = field(e, "item")?
                        .as_u64()
                        .map(|i| i as usize)
                        .filter(|&i| i < raw_items.len())
                        .ok_or_else(|| schema("'item' must index the menu"))?;
                    Ok((x, i))
                })
                .collect()
        })
        .transpose()?;
    Ok(MechanismFile {
        menu,
        assignment,
        raw_items,
    })
}

pub fn menu_to_json<S: Scalar>(menu: &Menu<S>) -> Value {
    json!({"gamma": allocation_to_json(menu.gamma()), "menu": menu_items_json(menu.items())})
}

pub fn pwl_from_json<S: Scalar>(v: &Value) -> Result<PwlConvex<S>> {
    let pieces = field(v, "pieces")?
        .as_array()
        .ok_or_else(|| schema("'pieces' must be an array"))?
        .iter()
        .map(|p| Ok(AffinePiece::new(vector(field(p, "gradient")?)?, scalar(field(p, "intercept")?)?)))
        .collect::<Result<Vec<_>>>()?;
    PwlConvex::new(pieces)
}

pub fn pwl_to_json<S: Scalar>(f: &PwlConvex<S>) -> Value {
    json!({
        "pieces": f.pieces().iter()
            .map(|p| json!({"gradient": vector_json(&p.gradient), "intercept": p.intercept.to_json()}))
            .collect::<Vec<_>>()
    })
}

fn schedule_from_json<S: Scalar>(v: &Value) -> Result<PriceSchedule<S>> {
    let get = |key: &str| -> Result<S> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(S::zero()),
            Some(x) => scalar(x),
        }
    };
    Ok(PriceSchedule {
        constant: get("constant")?,
        inv_n: get("inv_n")?,
        linear_n: get("linear_n")?,
        alternating: get("alternating")?,
    })
}

/// Family file: `{"family": name, "params": {...}}`. Price families read
/// `constant`, `inv_n`, `linear_n`, `alternating` from `params`;
/// `menu_list` reads `menus`, `scaled_menu` reads `menu` and `factor`,
/// `affine` reads `items` as `{"limit": {g, t}, "drift": {g, t}}` pairs.
/// `params.gamma` overrides the instance's allocation set.
pub fn family_from_json<S: Scalar>(v: &Value, gamma: &Arc<AllocationSet<S>>) -> Result<MechanismSequence<S>> {
    let name = field(v, "family")?
        .as_str()
        .ok_or_else(|| schema("'family' must be a string"))?;
    let empty = Value::Object(Map::new());
    let params = v.get("params").unwrap_or(&empty);
    let gamma = match params.get("gamma") {
        Some(g) => Arc::new(allocation_from_json(g)?),
        None => gamma.clone(),
    };
    match name {
        "fixed_price" => MechanismSequence::fixed_price(gamma, schedule_from_json(params)?),
        "bundle_price" => MechanismSequence::bundle_price(gamma, schedule_from_json(params)?),
        "menu_list" => {
            let menus = field(params, "menus")?
                .as_array()
                .ok_or_else(|| schema("'menus' must be an array"))?
                .iter()
                .map(|m| Menu::new(gamma.clone(), menu_items_from_json(m)?))
                .collect::<Result<Vec<_>>>()?;
            MechanismSequence::menu_list(menus)
        }
        "scaled_menu" => {
            let base = Menu::new(gamma.clone(), menu_items_from_json(field(params, "menu")?)?)?;
            let factor = schedule_from_json(field(params, "factor")?)?;
            Ok(MechanismSequence::scaled_menu(base, factor))
        }
        "affine" => {
            let item = |e: &Value| -> Result<MenuItem<S>> { Ok(MenuItem::new(vector(field(e, "g")?)?, scalar(field(e, "t")?)?)) };
            let items = field(params, "items")?
                .as_array()
                .ok_or_else(|| schema("'items' must be an array"))?
                .iter()
                .map(|e| {
                    Ok(AffineItem {
                        limit: item(field(e, "limit")?)?,
                        drift: item(field(e, "drift")?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            MechanismSequence::affine(gamma, items)
        }
        other => Err(schema(format!(
            "unknown family '{other}' (expected fixed_price, bundle_price, menu_list, scaled_menu or affine)"
        ))),
    }
}

pub fn report_to_json<S: Scalar>(r: &VerificationReport<S>) -> Value {
    json!({
        "passed": r.passed,
        "violations": r.violations.iter().map(|v| json!({
            "kind": v.kind.as_str(),
            "witness": vectors_json(&v.witness),
            "slack": v.slack.to_json(),
        })).collect::<Vec<_>>(),
        "notes": r.notes,
    })
}

pub fn solve_result_to_json<S: Scalar>(r: &SolveResult<S>, dist: &DiscreteValuation<S>) -> Value {
    let d = &r.diagnostics;
    json!({
        "class_label": r.class_label.as_str(),
        "optimal_revenue": r.optimal_revenue.to_json(),
        "optimal_revenue_f64": r.optimal_revenue.to_f64(),
        "certified": r.certified,
        "mechanism": {
            "gamma": allocation_to_json(r.mechanism.gamma()),
            "menu": menu_items_json(r.mechanism.menu.items()),
            "assignment": dist.support().iter().zip(&r.assignment)
                .map(|(x, i)| json!({"x": vector_json(x), "item": i}))
                .collect::<Vec<_>>(),
        },
        "diagnostics": {
            "numeric_mode": r.numeric_mode.as_str(),
            "iterations": d.iterations,
            "variables": d.variables,
            "constraints": d.constraints,
            "assignments": d.assignments.to_string(),
            "verification_points": d.verification_points,
            "notes": d.notes,
        },
    })
}

fn opt_json<S: Scalar>(v: &Option<S>) -> Value {
    v.as_ref().map_or(Value::Null, S::to_json)
}

pub fn convergence_to_json<S: Scalar>(r: &ConvergenceReport<S>) -> Value {
    json!({
        "family": r.label,
        "converged": r.converged,
        "extrapolated": r.extrapolated,
        "first_converged_n": r.first_converged_n,
        "window": r.window,
        "n_max": r.n_max,
        "grid": vectors_json(&r.grid),
        "limit_values": vector_json(&r.limit_values),
        "limit_mechanism": r.limit_mechanism.as_ref().map_or(Value::Null, |m| menu_items_json(m.menu.items())),
        "sup_gap": r.sup_gap.to_json(),
        "revenue_sequence": vector_json(&r.revenue_sequence),
        "limsup": r.limsup.to_json(),
        "limit_revenue": opt_json(&r.limit_revenue),
        "usc_slack": opt_json(&r.usc_slack),
        "usc_holds": r.usc_holds,
        "pointwise": r.pointwise.iter().map(|p| json!({
            "x": vector_json(&p.point),
            "limsup_payment": p.limsup_payment.to_json(),
            "limit_payment": p.limit_payment.to_json(),
            "holds": p.holds,
        })).collect::<Vec<_>>(),
    })
}

pub fn heavy_tail_to_json<S: Scalar>(r: &HeavyTailReport<S>) -> Value {
    json!({
        "truncation": r.truncation,
        "prices": r.prices.iter().map(|p| json!({
            "price": p.price.to_json(),
            "formula": p.formula.to_json(),
            "truncated": opt_json(&p.truncated),
            "matches": p.matches,
        })).collect::<Vec<_>>(),
        "escaping_revenues": vector_json(&r.escaping_revenues),
        "escaping_expected_ok": r.escaping_expected_ok,
        "sup_revenue": r.sup_revenue.to_json(),
        "limit_grid": vectors_json(&r.limit_grid),
        "limit_values": vector_json(&r.limit_values),
        "limit_mechanism": menu_items_json(r.limit_mechanism.menu.items()),
        "limit_revenue": r.limit_revenue.to_json(),
        "finite_truncation": convergence_to_json(&r.finite_truncation),
    })
}

pub fn monotone_limit_to_json<S: Scalar>(r: &MonotoneLimitReport<S>) -> Value {
    json!({
        "mode": match r.mode {
            crate::MonotoneMode::Payment => "payment",
            crate::MonotoneMode::Allocation => "allocation",
        },
        "member_failures": r.member_failures,
        "converged": r.converged,
        "limit_mechanism": r.limit_mechanism.as_ref().map_or(Value::Null, |m| menu_items_json(m.menu.items())),
        "limit_report": report_to_json(&r.limit_report),
        "limit_supermodular": r.limit_supermodular,
        "holds": r.holds,
    })
}

pub fn wrong_way_to_json<S: Scalar>(r: &WrongWayReport<S>) -> Value {
    json!({
        "limit_menu": menu_items_json(r.limit_menu.items()),
        "tie_point": vector_json(&r.tie_point),
        "seller_favorable": report_to_json(&r.seller_favorable),
        "adverse": report_to_json(&r.adverse),
    })
}
