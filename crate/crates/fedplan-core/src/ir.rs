//! Logical pipeline representation: datasets, transforms, and DAG structure.
//!
//! A [`Pipeline`] is authored directly (there is no SQL front end) and
//! deserializes from the JSON pipeline file format. [`Pipeline::validate`]
//! enforces the structural invariants; schema and type checking live in
//! [`crate::schema`].

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{self, AliasedExpr, Expr};
use crate::dialect;

/// Scalar column types supported by the logical IR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    String,
    Int64,
    Float64,
    Bool,
    Timestamp,
    Json,
}

impl ScalarType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ScalarType::Int64 | ScalarType::Float64)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ScalarType::String => "string",
            ScalarType::Int64 => "int64",
            ScalarType::Float64 => "float64",
            ScalarType::Bool => "bool",
            ScalarType::Timestamp => "timestamp",
            ScalarType::Json => "json",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformKind {
    Filter,
    Project,
    Aggregate,
    Join,
    Window,
    JsonParse,
    Expression,
    Union,
    Recursive,
}

impl TransformKind {
    pub const ALL: [TransformKind; 9] = [
        TransformKind::Filter,
        TransformKind::Project,
        TransformKind::Aggregate,
        TransformKind::Join,
        TransformKind::Window,
        TransformKind::JsonParse,
        TransformKind::Expression,
        TransformKind::Union,
        TransformKind::Recursive,
    ];
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::Filter => "Filter",
            TransformKind::Project => "Project",
            TransformKind::Aggregate => "Aggregate",
            TransformKind::Join => "Join",
            TransformKind::Window => "Window",
            TransformKind::JsonParse => "JsonParse",
            TransformKind::Expression => "Expression",
            TransformKind::Union => "Union",
            TransformKind::Recursive => "Recursive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinType {
    Inner,
    Left,
    Right,
    Full,
}

impl JoinType {
    pub fn sql_keyword(self) -> &'static str {
        match self {
            JoinType::Inner => "JOIN",
            JoinType::Left => "LEFT JOIN",
            JoinType::Right => "RIGHT JOIN",
            JoinType::Full => "FULL JOIN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
}

/// One extraction in a `JsonParse` transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonFieldSpec {
    pub path: String,
    #[serde(rename = "as")]
    pub alias: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
}

/// Kind-specific transform parameters. Exactly the fields relevant to the
/// transform's kind may be present; everything else must be absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_keys: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_type: Option<JoinType>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "on")]
    pub join_on: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_by: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_by: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "as")]
    pub alias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<JsonFieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expressions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    /// Per-transform override of the kind's size factor (filter selectivity,
    /// aggregate reduction, join fanout, or JSON expansion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selectivity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub id: String,
    /// Site where the data physically resides.
    pub site: String,
    pub columns: Vec<ColumnDef>,
    pub size_bytes: u64,
    pub row_count: u64,
    /// Residency constraint: sites allowed to store or process this dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_sites: Option<BTreeSet<String>>,
}

impl Dataset {
    /// True when `site` may move or scan this dataset.
    pub fn allows_site(&self, site: &str) -> bool {
        match &self.allowed_sites {
            Some(allowed) => allowed.contains(site),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transform {
    pub id: String,
    pub kind: TransformKind,
    /// Dataset or transform ids, in order.
    pub inputs: Vec<String>,
    #[serde(default)]
    pub params: TransformParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    pub datasets: Vec<Dataset>,
    pub transforms: Vec<Transform>,
    /// Transform ids whose outputs are the pipeline results.
    pub sinks: Vec<String>,
}

/// Outcome of structural validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineCheck {
    /// Deterministic topological order of transform ids.
    pub topo_order: Vec<String>,
    /// Transforms not reachable from any sink; flagged, not rejected.
    pub unreachable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrError {
    DuplicateId(String),
    UnknownReference { referrer: String, id: String },
    Cycle { id: String },
    Arity { transform: String, kind: TransformKind, got: usize },
    BadParams { transform: String, detail: String },
    BadExpression { transform: String, detail: String },
    UnknownFunction { transform: String, name: String },
    DatasetInvariant { dataset: String, detail: String },
    BadIdentifier { id: String },
    NoSinks,
    SinkNotTransform { id: String },
    BadSelectivity { transform: String },
}

impl fmt::Display for IrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrError::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            IrError::UnknownReference { referrer, id } => {
                write!(f, "{referrer:?} references unknown id {id:?}")
            }
            IrError::Cycle { id } => write!(f, "cyclic graph involving {id:?}"),
            IrError::Arity { transform, kind, got } => write!(
                f,
                "transform {transform:?}: {kind} takes {} input(s), got {got}",
                if matches!(kind, TransformKind::Join | TransformKind::Union) {
                    "at least 2"
                } else {
                    "exactly 1"
                }
            ),
            IrError::BadParams { transform, detail } => {
                write!(f, "transform {transform:?}: {detail}")
            }
            IrError::BadExpression { transform, detail } => {
                write!(f, "transform {transform:?}: expression error {detail}")
            }
            IrError::UnknownFunction { transform, name } => {
                write!(f, "transform {transform:?}: function {name:?} is not in the logical catalog")
            }
            IrError::DatasetInvariant { dataset, detail } => {
                write!(f, "dataset {dataset:?}: {detail}")
            }
            IrError::BadIdentifier { id } => write!(
                f,
                "id {id:?} must start with a letter or underscore and contain only letters, digits, and underscores"
            ),
            IrError::NoSinks => f.write_str("pipeline declares no sinks"),
            IrError::SinkNotTransform { id } => {
                write!(f, "sink {id:?} is not a transform")
            }
            IrError::BadSelectivity { transform } => {
                write!(f, "transform {transform:?}: selectivity must be finite and non-negative")
            }
        }
    }
}

fn valid_ident(id: &str) -> bool {
    let mut bytes = id.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl Transform {
    fn expr_error(&self, err: expr::ExprError) -> IrError {
        IrError::BadExpression {
            transform: self.id.clone(),
            detail: err.to_string(),
        }
    }

    fn bad_params(&self, detail: &str) -> IrError {
        IrError::BadParams {
            transform: self.id.clone(),
            detail: detail.to_string(),
        }
    }

    /// Predicate expression for `Filter`.
    pub fn predicate_expr(&self) -> Result<Expr, IrError> {
        let text = self
            .params
            .predicate
            .as_deref()
            .ok_or_else(|| self.bad_params("Filter requires a `predicate`"))?;
        expr::parse_expr(text).map_err(|e| self.expr_error(e))
    }

    /// Aliased aggregate expressions for `Aggregate`.
    pub fn aggregate_exprs(&self) -> Result<Vec<AliasedExpr>, IrError> {
        let texts = self
            .params
            .aggregates
            .as_deref()
            .ok_or_else(|| self.bad_params("Aggregate requires `aggregates`"))?;
        texts
            .iter()
            .map(|t| expr::parse_aliased(t).map_err(|e| self.expr_error(e)))
            .collect()
    }

    /// Aliased scalar expressions for `Expression`.
    pub fn expression_exprs(&self) -> Result<Vec<AliasedExpr>, IrError> {
        let texts = self
            .params
            .expressions
            .as_deref()
            .ok_or_else(|| self.bad_params("Expression requires `expressions`"))?;
        texts
            .iter()
            .map(|t| expr::parse_aliased(t).map_err(|e| self.expr_error(e)))
            .collect()
    }

    /// Join conditions for `Join`; entry `i` joins input `i + 1`.
    pub fn join_conditions(&self) -> Result<Vec<Expr>, IrError> {
        let texts = self
            .params
            .join_on
            .as_deref()
            .ok_or_else(|| self.bad_params("Join requires `on` conditions"))?;
        texts
            .iter()
            .map(|t| expr::parse_expr(t).map_err(|e| self.expr_error(e)))
            .collect()
    }

    /// Anchor predicate for `Recursive`.
    pub fn anchor_expr(&self) -> Result<Expr, IrError> {
        let text = self
            .params
            .anchor
            .as_deref()
            .ok_or_else(|| self.bad_params("Recursive requires an `anchor` predicate"))?;
        expr::parse_expr(text).map_err(|e| self.expr_error(e))
    }

    /// Every logical function this transform relies on, including the
    /// implicit `JSON_EXTRACT` of `JsonParse` and the window function of
    /// `Window`.
    pub fn referenced_functions(&self) -> Result<BTreeSet<String>, IrError> {
        let mut functions = BTreeSet::new();
        match self.kind {
            TransformKind::Filter => self.predicate_expr()?.collect_functions(&mut functions),
            TransformKind::Aggregate => {
                for aliased in self.aggregate_exprs()? {
                    aliased.expr.collect_functions(&mut functions);
                }
            }
            TransformKind::Expression => {
                for aliased in self.expression_exprs()? {
                    aliased.expr.collect_functions(&mut functions);
                }
            }
            TransformKind::Join => {
                for condition in self.join_conditions()? {
                    condition.collect_functions(&mut functions);
                }
            }
            TransformKind::Window => {
                if let Some(function) = &self.params.function {
                    functions.insert(function.to_ascii_uppercase());
                }
            }
            TransformKind::JsonParse => {
                functions.insert("JSON_EXTRACT".to_string());
            }
            TransformKind::Recursive => self.anchor_expr()?.collect_functions(&mut functions),
            TransformKind::Project | TransformKind::Union => {}
        }
        Ok(functions)
    }

    /// Checks arity and the kind/params shape, without schema knowledge.
    fn validate_shape(&self) -> Result<(), IrError> {
        let arity_ok = match self.kind {
            TransformKind::Join | TransformKind::Union => self.inputs.len() >= 2,
            _ => self.inputs.len() == 1,
        };
        if !arity_ok {
            return Err(IrError::Arity {
                transform: self.id.clone(),
                kind: self.kind,
                got: self.inputs.len(),
            });
        }

        if let Some(sel) = self.params.selectivity {
            if !sel.is_finite() || sel < 0.0 {
                return Err(IrError::BadSelectivity {
                    transform: self.id.clone(),
                });
            }
        }

        // Exactly the fields for this kind may be present.
        let p = &self.params;
        let mut allowed: Vec<(&str, bool)> = Vec::new();
        match self.kind {
            TransformKind::Filter => {
                allowed.push(("predicate", true));
            }
            TransformKind::Project => {
                allowed.push(("columns", true));
            }
            TransformKind::Aggregate => {
                allowed.push(("group_keys", true));
                allowed.push(("aggregates", true));
            }
            TransformKind::Join => {
                allowed.push(("join_type", true));
                allowed.push(("on", true));
            }
            TransformKind::Window => {
                allowed.push(("function", true));
                allowed.push(("partition_by", false));
                allowed.push(("order_by", false));
                allowed.push(("as", true));
            }
            TransformKind::JsonParse => {
                allowed.push(("column", true));
                allowed.push(("fields", true));
            }
            TransformKind::Expression => {
                allowed.push(("expressions", true));
            }
            TransformKind::Union => {}
            TransformKind::Recursive => {
                allowed.push(("parent_key", true));
                allowed.push(("child_key", true));
                allowed.push(("anchor", true));
            }
        }
        let fields: [(&str, bool); 16] = [
            ("predicate", p.predicate.is_some()),
            ("columns", p.columns.is_some()),
            ("group_keys", p.group_keys.is_some()),
            ("aggregates", p.aggregates.is_some()),
            ("join_type", p.join_type.is_some()),
            ("on", p.join_on.is_some()),
            ("function", p.function.is_some()),
            ("partition_by", p.partition_by.is_some()),
            ("order_by", p.order_by.is_some()),
            ("as", p.alias.is_some()),
            ("column", p.column.is_some()),
            ("fields", p.fields.is_some()),
            ("expressions", p.expressions.is_some()),
            ("parent_key", p.parent_key.is_some()),
            ("child_key", p.child_key.is_some()),
            ("anchor", p.anchor.is_some()),
        ];
        for (name, present) in fields {
            let spec = allowed.iter().find(|(n, _)| *n == name);
            match spec {
                Some((_, required)) => {
                    if *required && !present {
                        return Err(self.bad_params(&format!(
                            "{} requires params field `{name}`",
                            self.kind
                        )));
                    }
                }
                None => {
                    if present {
                        return Err(self.bad_params(&format!(
                            "params field `{name}` does not apply to {}",
                            self.kind
                        )));
                    }
                }
            }
        }

        // Parse all expressions now and check catalog membership so broken
        // params fail at load, not mid-planning.
        for name in self.referenced_functions()? {
            if dialect::function_catalog().iter().all(|sig| sig.name != name) {
                return Err(IrError::UnknownFunction {
                    transform: self.id.clone(),
                    name,
                });
            }
        }
        if self.kind == TransformKind::Project {
            let columns = self.params.columns.as_deref().unwrap_or_default();
            if columns.is_empty() {
                return Err(self.bad_params("Project requires a non-empty column list"));
            }
        }
        if self.kind == TransformKind::Join {
            let conditions = self.params.join_on.as_deref().unwrap_or_default();
            if conditions.len() != self.inputs.len() - 1 {
                return Err(self.bad_params(&format!(
                    "Join over {} inputs requires exactly {} `on` condition(s), got {}",
                    self.inputs.len(),
                    self.inputs.len() - 1,
                    conditions.len()
                )));
            }
            self.join_conditions()?;
        }
        if self.kind == TransformKind::Aggregate {
            for aliased in self.aggregate_exprs()? {
                if aliased.alias.is_none() {
                    return Err(self.bad_params("each aggregate needs an `AS alias`"));
                }
            }
        }
        if self.kind == TransformKind::Expression {
            let exprs = self.expression_exprs()?;
            if exprs.is_empty() {
                return Err(self.bad_params("Expression requires at least one expression"));
            }
            for aliased in exprs {
                if aliased.alias.is_none() {
                    return Err(self.bad_params("each expression needs an `AS alias`"));
                }
            }
        }
        if self.kind == TransformKind::JsonParse
            && self.params.fields.as_deref().unwrap_or_default().is_empty()
        {
            return Err(self.bad_params("JsonParse requires at least one extracted field"));
        }
        if self.kind == TransformKind::Filter {
            self.predicate_expr()?;
        }
        if self.kind == TransformKind::Recursive {
            self.anchor_expr()?;
        }
        Ok(())
    }
}

impl Pipeline {
    /// Structural validation: unique ids, resolvable references, arity,
    /// params shape, acyclicity, sink declarations, and dataset invariants.
    pub fn validate(&self) -> Result<PipelineCheck, IrError> {
        let mut ids = BTreeSet::new();
        for dataset in &self.datasets {
            if !valid_ident(&dataset.id) {
                return Err(IrError::BadIdentifier {
                    id: dataset.id.clone(),
                });
            }
            if !ids.insert(dataset.id.as_str()) {
                return Err(IrError::DuplicateId(dataset.id.clone()));
            }
            if (dataset.size_bytes == 0) != (dataset.row_count == 0) {
                return Err(IrError::DatasetInvariant {
                    dataset: dataset.id.clone(),
                    detail: "size_bytes and row_count must be zero together".to_string(),
                });
            }
            if let Some(allowed) = &dataset.allowed_sites {
                if !allowed.contains(&dataset.site) {
                    return Err(IrError::DatasetInvariant {
                        dataset: dataset.id.clone(),
                        detail: format!(
                            "allowed_sites must include the home site {:?}",
                            dataset.site
                        ),
                    });
                }
            }
            let mut names = BTreeSet::new();
            for column in &dataset.columns {
                if !names.insert(column.name.as_str()) {
                    return Err(IrError::DatasetInvariant {
                        dataset: dataset.id.clone(),
                        detail: format!("duplicate column {:?}", column.name),
                    });
                }
            }
        }
        for transform in &self.transforms {
            if !valid_ident(&transform.id) {
                return Err(IrError::BadIdentifier {
                    id: transform.id.clone(),
                });
            }
            if !ids.insert(transform.id.as_str()) {
                return Err(IrError::DuplicateId(transform.id.clone()));
            }
        }

        let transform_ids: BTreeSet<&str> =
            self.transforms.iter().map(|t| t.id.as_str()).collect();
        for transform in &self.transforms {
            transform.validate_shape()?;
            for input in &transform.inputs {
                if !ids.contains(input.as_str()) {
                    return Err(IrError::UnknownReference {
                        referrer: transform.id.clone(),
                        id: input.clone(),
                    });
                }
            }
        }

        if self.sinks.is_empty() {
            return Err(IrError::NoSinks);
        }
        for sink in &self.sinks {
            if !ids.contains(sink.as_str()) {
                return Err(IrError::UnknownReference {
                    referrer: "sinks".to_string(),
                    id: sink.clone(),
                });
            }
            if !transform_ids.contains(sink.as_str()) {
                return Err(IrError::SinkNotTransform { id: sink.clone() });
            }
        }

        let topo = topo_order(self)?;

        // Reachability from sinks, walking inputs backwards.
        let by_id: BTreeMap<&str, &Transform> =
            self.transforms.iter().map(|t| (t.id.as_str(), t)).collect();
        let mut reachable: BTreeSet<&str> = BTreeSet::new();
        let mut stack: Vec<&str> = self.sinks.iter().map(String::as_str).collect();
        while let Some(id) = stack.pop() {
            if let Some(transform) = by_id.get(id) {
                if reachable.insert(id) {
                    stack.extend(transform.inputs.iter().map(String::as_str));
                }
            }
        }
        let unreachable = topo
            .iter()
            .filter(|id| !reachable.contains(id.as_str()))
            .cloned()
            .collect();

        Ok(PipelineCheck {
            topo_order: topo,
            unreachable,
        })
    }

    pub fn dataset(&self, id: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|d| d.id == id)
    }

    pub fn transform(&self, id: &str) -> Option<&Transform> {
        self.transforms.iter().find(|t| t.id == id)
    }

    /// Transforms that consume `id` directly.
    pub fn consumers(&self, id: &str) -> impl Iterator<Item = &Transform> {
        self.transforms
            .iter()
            .filter(move |t| t.inputs.iter().any(|input| input == id))
    }

    pub fn is_sink(&self, id: &str) -> bool {
        self.sinks.iter().any(|s| s == id)
    }
}

/// Deterministic topological order of the pipeline's transforms: every
/// transform appears after all of its transform inputs, ties broken by
/// ascending id.
pub fn topo_order(pipeline: &Pipeline) -> Result<Vec<String>, IrError> {
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let transform_ids: BTreeSet<&str> =
        pipeline.transforms.iter().map(|t| t.id.as_str()).collect();
    for transform in &pipeline.transforms {
        let deps = transform
            .inputs
            .iter()
            .filter(|input| transform_ids.contains(input.as_str()))
            .collect::<BTreeSet<_>>();
        indegree.insert(transform.id.as_str(), deps.len());
        for dep in deps {
            dependents
                .entry(dep.as_str())
                .or_default()
                .push(transform.id.as_str());
        }
    }

    let mut ready: BinaryHeap<Reverse<&str>> = indegree
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(id, _)| Reverse(*id))
        .collect();
    let mut order = Vec::with_capacity(pipeline.transforms.len());
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id.to_string());
        if let Some(next) = dependents.get(id) {
            for dependent in next {
                let n = indegree.get_mut(dependent).expect("known node");
                *n -= 1;
                if *n == 0 {
                    ready.push(Reverse(*dependent));
                }
            }
        }
    }
    if order.len() != pipeline.transforms.len() {
        let stuck = indegree
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(id, _)| *id)
            .next()
            .unwrap_or("unknown");
        return Err(IrError::Cycle {
            id: stuck.to_string(),
        });
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dataset(id: &str, site: &str) -> Dataset {
        Dataset {
            id: id.to_string(),
            site: site.to_string(),
            columns: vec![
                ColumnDef { name: "k".to_string(), ty: ScalarType::Int64 },
                ColumnDef { name: "v".to_string(), ty: ScalarType::Float64 },
            ],
            size_bytes: 1_000_000_000,
            row_count: 1_000_000,
            allowed_sites: None,
        }
    }

    fn filter(id: &str, input: &str) -> Transform {
        Transform {
            id: id.to_string(),
            kind: TransformKind::Filter,
            inputs: vec![input.to_string()],
            params: TransformParams {
                predicate: Some("v > 0".to_string()),
                ..TransformParams::default()
            },
        }
    }

    #[test]
    fn minimal_pipeline_validates() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![filter("t1", "d1")],
            sinks: vec!["t1".to_string()],
        };
        let check = pipeline.validate().unwrap();
        assert_eq!(check.topo_order, vec!["t1"]);
        assert!(check.unreachable.is_empty());
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![filter("t1", "t1")],
            sinks: vec!["t1".to_string()],
        };
        assert!(matches!(pipeline.validate(), Err(IrError::Cycle { .. })));
    }

    #[test]
    fn join_arity_is_enforced() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![Transform {
                id: "j".to_string(),
                kind: TransformKind::Join,
                inputs: vec!["d1".to_string()],
                params: TransformParams {
                    join_type: Some(JoinType::Inner),
                    join_on: Some(vec![]),
                    ..TransformParams::default()
                },
            }],
            sinks: vec!["j".to_string()],
        };
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::Arity { got: 1, .. })
        ));
    }

    #[test]
    fn duplicate_and_unknown_ids_are_rejected() {
        let mut pipeline = Pipeline {
            datasets: vec![dataset("d1", "a"), dataset("d1", "b")],
            transforms: vec![filter("t1", "d1")],
            sinks: vec!["t1".to_string()],
        };
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::DuplicateId(_))
        ));
        pipeline.datasets.pop();
        pipeline.transforms[0].inputs[0] = "ghost".to_string();
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::UnknownReference { .. })
        ));
    }

    #[test]
    fn diamond_topo_order_breaks_ties_by_id() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![
                filter("tb", "d1"),
                filter("ta", "d1"),
                Transform {
                    id: "tj".to_string(),
                    kind: TransformKind::Union,
                    inputs: vec!["ta".to_string(), "tb".to_string()],
                    params: TransformParams::default(),
                },
            ],
            sinks: vec!["tj".to_string()],
        };
        assert_eq!(topo_order(&pipeline).unwrap(), vec!["ta", "tb", "tj"]);
    }

    #[test]
    fn unreachable_transforms_are_flagged_not_rejected() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![filter("t1", "d1"), filter("t_orphan", "d1")],
            sinks: vec!["t1".to_string()],
        };
        let check = pipeline.validate().unwrap();
        assert_eq!(check.unreachable, vec!["t_orphan"]);
    }

    #[test]
    fn sink_must_be_a_transform() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![filter("t1", "d1")],
            sinks: vec!["d1".to_string()],
        };
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::SinkNotTransform { .. })
        ));
    }

    #[test]
    fn residency_must_include_home_site() {
        let mut d = dataset("d1", "a");
        d.allowed_sites = Some(BTreeSet::from(["b".to_string()]));
        let pipeline = Pipeline {
            datasets: vec![d],
            transforms: vec![filter("t1", "d1")],
            sinks: vec!["t1".to_string()],
        };
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::DatasetInvariant { .. })
        ));
    }

    #[test]
    fn irrelevant_params_are_rejected() {
        let mut t = filter("t1", "d1");
        t.params.columns = Some(vec!["k".to_string()]);
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![t],
            sinks: vec!["t1".to_string()],
        };
        assert!(matches!(pipeline.validate(), Err(IrError::BadParams { .. })));
    }

    #[test]
    fn unknown_function_is_rejected() {
        let mut t = filter("t1", "d1");
        t.params.predicate = Some("SOUNDEX(v) = 'x'".to_string());
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![t],
            sinks: vec!["t1".to_string()],
        };
        assert!(matches!(
            pipeline.validate(),
            Err(IrError::UnknownFunction { .. })
        ));
    }

    #[test]
    fn pipeline_round_trips_through_json() {
        let pipeline = Pipeline {
            datasets: vec![dataset("d1", "a")],
            transforms: vec![filter("t1", "d1")],
            sinks: vec!["t1".to_string()],
        };
        let text = serde_json::to_string(&pipeline).unwrap();
        let back: Pipeline = serde_json::from_str(&text).unwrap();
        assert_eq!(pipeline, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"datasets":[],"transforms":[],"sinks":[],"extra":1}"#;
        assert!(serde_json::from_str::<Pipeline>(text).is_err());
    }
}
