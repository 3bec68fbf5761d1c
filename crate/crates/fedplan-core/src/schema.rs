//! Schema inference and type checking over the pipeline DAG.
//!
//! Every dataset and transform node gets an output schema. Inference is
//! deterministic and validates all column references, predicate types, join
//! key compatibility, and function usage contexts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dialect::{self, ArgSpec, FunctionKind, RetSpec};
use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::ir::{IrError, Pipeline, ScalarType, Transform, TransformKind};

/// Ordered output schema of one pipeline node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<(String, ScalarType)>,
}

impl Schema {
    pub fn get(&self, name: &str) -> Option<ScalarType> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, ty)| *ty)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemaError {
    Ir(IrError),
    UnknownColumn { transform: String, column: String },
    AmbiguousColumn { transform: String, column: String },
    TypeMismatch { transform: String, detail: String },
    NotJson { transform: String, column: String },
    DuplicateColumn { transform: String, column: String },
    BadCall { transform: String, detail: String },
}

impl core::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SchemaError::Ir(e) => write!(f, "{e}"),
            SchemaError::UnknownColumn { transform, column } => {
                write!(f, "transform {transform:?}: unknown column {column:?}")
            }
            SchemaError::AmbiguousColumn { transform, column } => {
                write!(f, "transform {transform:?}: column {column:?} is ambiguous; qualify it with an input id")
            }
            SchemaError::TypeMismatch { transform, detail } => {
                write!(f, "transform {transform:?}: type mismatch: {detail}")
            }
            SchemaError::NotJson { transform, column } => {
                write!(f, "transform {transform:?}: column {column:?} is not json")
            }
            SchemaError::DuplicateColumn { transform, column } => {
                write!(f, "transform {transform:?}: duplicate output column {column:?}")
            }
            SchemaError::BadCall { transform, detail } => {
                write!(f, "transform {transform:?}: {detail}")
            }
        }
    }
}

impl From<IrError> for SchemaError {
    fn from(e: IrError) -> Self {
        SchemaError::Ir(e)
    }
}

enum Resolution {
    Found(ScalarType),
    Unknown,
    Ambiguous,
}

enum TypeIssue {
    Unknown(String),
    Ambiguous(String),
    Mismatch(String),
    BadCall(String),
}

fn issue_to_error(transform: &str, issue: TypeIssue) -> SchemaError {
    match issue {
        TypeIssue::Unknown(column) => SchemaError::UnknownColumn {
            transform: transform.to_string(),
            column,
        },
        TypeIssue::Ambiguous(column) => SchemaError::AmbiguousColumn {
            transform: transform.to_string(),
            column,
        },
        TypeIssue::Mismatch(detail) => SchemaError::TypeMismatch {
            transform: transform.to_string(),
            detail,
        },
        TypeIssue::BadCall(detail) => SchemaError::BadCall {
            transform: transform.to_string(),
            detail,
        },
    }
}

fn infer_type(
    expr: &Expr,
    resolve: &dyn Fn(&str) -> Resolution,
    allow_aggregates: bool,
) -> Result<ScalarType, TypeIssue> {
    match expr {
        Expr::Column(name) => match resolve(name) {
            Resolution::Found(ty) => Ok(ty),
            Resolution::Unknown => Err(TypeIssue::Unknown(name.clone())),
            Resolution::Ambiguous => Err(TypeIssue::Ambiguous(name.clone())),
        },
        Expr::Int(_) => Ok(ScalarType::Int64),
        Expr::Float(_) => Ok(ScalarType::Float64),
        Expr::Str(_) => Ok(ScalarType::String),
        Expr::Bool(_) => Ok(ScalarType::Bool),
        Expr::Call { name, args } => {
            let sig = dialect::function_catalog()
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| TypeIssue::BadCall(format!("unknown function {name:?}")))?;
            match sig.kind {
                FunctionKind::Window => {
                    return Err(TypeIssue::BadCall(format!(
                        "window function {name} is only valid as a Window transform"
                    )))
                }
                FunctionKind::Aggregate if !allow_aggregates => {
                    return Err(TypeIssue::BadCall(format!(
                        "aggregate function {name} is not allowed in a scalar expression"
                    )))
                }
                _ => {}
            }
            if args.len() != sig.args.len() {
                return Err(TypeIssue::BadCall(format!(
                    "{name} takes {} argument(s), got {}",
                    sig.args.len(),
                    args.len()
                )));
            }
            let mut arg_types = Vec::with_capacity(args.len());
            for (arg, spec) in args.iter().zip(sig.args) {
                let ty = infer_type(arg, resolve, false)?;
                let ok = match spec {
                    ArgSpec::Exact(expected) => ty == *expected,
                    ArgSpec::Numeric => ty.is_numeric(),
                    ArgSpec::Any => true,
                };
                if !ok {
                    return Err(TypeIssue::Mismatch(format!(
                        "argument of {name} has type {ty}, expected {}",
                        match spec {
                            ArgSpec::Exact(e) => format!("{e}"),
                            ArgSpec::Numeric => "a numeric type".to_string(),
                            ArgSpec::Any => "any type".to_string(),
                        }
                    )));
                }
                arg_types.push(ty);
            }
            Ok(match sig.ret {
                RetSpec::Exact(ty) => ty,
                RetSpec::SameAsFirstArg => arg_types[0],
            })
        }
        Expr::Unary { op, operand } => {
            let ty = infer_type(operand, resolve, allow_aggregates)?;
            match op {
                UnaryOp::Not => {
                    if ty == ScalarType::Bool {
                        Ok(ScalarType::Bool)
                    } else {
                        Err(TypeIssue::Mismatch(format!("NOT applied to {ty}")))
                    }
                }
                UnaryOp::Neg => {
                    if ty.is_numeric() {
                        Ok(ty)
                    } else {
                        Err(TypeIssue::Mismatch(format!("negation applied to {ty}")))
                    }
                }
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let lt = infer_type(lhs, resolve, allow_aggregates)?;
            let rt = infer_type(rhs, resolve, allow_aggregates)?;
            match op {
                BinaryOp::And | BinaryOp::Or => {
                    if lt == ScalarType::Bool && rt == ScalarType::Bool {
                        Ok(ScalarType::Bool)
                    } else {
                        Err(TypeIssue::Mismatch(format!(
                            "{} requires bool operands, got {lt} and {rt}",
                            op.sql_symbol()
                        )))
                    }
                }
                op if op.is_comparison() => {
                    let comparable = (lt.is_numeric() && rt.is_numeric())
                        || (lt == rt && lt != ScalarType::Json);
                    if comparable {
                        Ok(ScalarType::Bool)
                    } else {
                        Err(TypeIssue::Mismatch(format!(
                            "cannot compare {lt} with {rt}"
                        )))
                    }
                }
                _ => {
                    if lt.is_numeric() && rt.is_numeric() {
                        if *op == BinaryOp::Div {
                            Ok(ScalarType::Float64)
                        } else if lt == ScalarType::Int64 && rt == ScalarType::Int64 {
                            Ok(ScalarType::Int64)
                        } else {
                            Ok(ScalarType::Float64)
                        }
                    } else {
                        Err(TypeIssue::Mismatch(format!(
                            "arithmetic on {lt} and {rt}"
                        )))
                    }
                }
            }
        }
    }
}

fn single_resolver(schema: &Schema) -> impl Fn(&str) -> Resolution + '_ {
    move |name| match schema.get(name) {
        Some(ty) => Resolution::Found(ty),
        None => Resolution::Unknown,
    }
}

/// Resolver over multiple join inputs: a name resolves if it matches one
/// input column exactly, or as `input_id.column` after splitting at the
/// first dot, or as a bare column unique across inputs.
fn multi_resolver<'a>(
    inputs: &'a [(&'a str, &'a Schema)],
) -> impl Fn(&str) -> Resolution + 'a {
    move |name| {
        let exact: Vec<ScalarType> = inputs
            .iter()
            .filter_map(|(_, schema)| schema.get(name))
            .collect();
        match exact.len() {
            1 => return Resolution::Found(exact[0]),
            n if n > 1 => return Resolution::Ambiguous,
            _ => {}
        }
        if let Some((qualifier, column)) = name.split_once('.') {
            if let Some((_, schema)) = inputs.iter().find(|(id, _)| *id == qualifier) {
                return match schema.get(column) {
                    Some(ty) => Resolution::Found(ty),
                    None => Resolution::Unknown,
                };
            }
        }
        Resolution::Unknown
    }
}

/// Infers the output schema of every node. Project narrows columns,
/// Aggregate outputs group keys plus one column per aggregate, Join emits the
/// disjoint union of its inputs with name collisions qualified by input id,
/// and JsonParse appends extracted columns typed per declaration.
pub fn infer_schemas(pipeline: &Pipeline) -> Result<BTreeMap<String, Schema>, SchemaError> {
    let check = pipeline.validate()?;
    let mut schemas: BTreeMap<String, Schema> = BTreeMap::new();
    for dataset in &pipeline.datasets {
        schemas.insert(
            dataset.id.clone(),
            Schema {
                columns: dataset
                    .columns
                    .iter()
                    .map(|c| (c.name.clone(), c.ty))
                    .collect(),
            },
        );
    }
    for id in &check.topo_order {
        let transform = pipeline.transform(id).expect("topo ids are transforms");
        let schema = infer_transform_schema(transform, &schemas)?;
        schemas.insert(id.clone(), schema);
    }
    Ok(schemas)
}

fn infer_transform_schema(
    transform: &Transform,
    schemas: &BTreeMap<String, Schema>,
) -> Result<Schema, SchemaError> {
    let tid = transform.id.as_str();
    let input_schemas: Vec<(&str, &Schema)> = transform
        .inputs
        .iter()
        .map(|input| (input.as_str(), schemas.get(input).expect("validated input")))
        .collect();
    let first = input_schemas[0].1;

    match transform.kind {
        TransformKind::Filter => {
            let predicate = transform.predicate_expr()?;
            let resolve = single_resolver(first);
            let ty = infer_type(&predicate, &resolve, false)
                .map_err(|e| issue_to_error(tid, e))?;
            if ty != ScalarType::Bool {
                return Err(SchemaError::TypeMismatch {
                    transform: tid.to_string(),
                    detail: format!("filter predicate has type {ty}, expected bool"),
                });
            }
            Ok(first.clone())
        }
        TransformKind::Project => {
            let columns = transform.params.columns.as_deref().unwrap_or_default();
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(columns.len());
            for name in columns {
                let ty = first.get(name).ok_or_else(|| SchemaError::UnknownColumn {
                    transform: tid.to_string(),
                    column: name.clone(),
                })?;
                if !seen.insert(name.as_str()) {
                    return Err(SchemaError::DuplicateColumn {
                        transform: tid.to_string(),
                        column: name.clone(),
                    });
                }
                out.push((name.clone(), ty));
            }
            Ok(Schema { columns: out })
        }
        TransformKind::Aggregate => {
            let keys = transform.params.group_keys.as_deref().unwrap_or_default();
            let mut out = Vec::new();
            let mut seen = BTreeSet::new();
            for key in keys {
                let ty = first.get(key).ok_or_else(|| SchemaError::UnknownColumn {
                    transform: tid.to_string(),
                    column: key.clone(),
                })?;
                if !seen.insert(key.clone()) {
                    return Err(SchemaError::DuplicateColumn {
                        transform: tid.to_string(),
                        column: key.clone(),
                    });
                }
                out.push((key.clone(), ty));
            }
            let resolve = single_resolver(first);
            for aliased in transform.aggregate_exprs()? {
                let alias = aliased.alias.expect("alias enforced by validate");
                match &aliased.expr {
                    Expr::Call { name, .. } => {
                        let sig = dialect::function_catalog()
                            .iter()
                            .find(|s| s.name == name)
                            .expect("catalog membership checked by validate");
                        if sig.kind != FunctionKind::Aggregate {
                            return Err(SchemaError::BadCall {
                                transform: tid.to_string(),
                                detail: format!("{name} is not an aggregate function"),
                            });
                        }
                    }
                    _ => {
                        return Err(SchemaError::BadCall {
                            transform: tid.to_string(),
                            detail: "each aggregate must be a single aggregate function call"
                                .to_string(),
                        })
                    }
                }
                let ty = infer_type(&aliased.expr, &resolve, true)
                    .map_err(|e| issue_to_error(tid, e))?;
                if !seen.insert(alias.clone()) {
                    return Err(SchemaError::DuplicateColumn {
                        transform: tid.to_string(),
                        column: alias,
                    });
                }
                out.push((alias, ty));
            }
            Ok(Schema { columns: out })
        }
        TransformKind::Join => {
            let resolve = multi_resolver(&input_schemas);
            for condition in transform.join_conditions()? {
                let ty = infer_type(&condition, &resolve, false)
                    .map_err(|e| issue_to_error(tid, e))?;
                if ty != ScalarType::Bool {
                    return Err(SchemaError::TypeMismatch {
                        transform: tid.to_string(),
                        detail: format!("join condition has type {ty}, expected bool"),
                    });
                }
            }
            // Disjoint union; bare names that appear in several inputs are
            // qualified as `input_id.column`.
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, schema) in &input_schemas {
                for (name, _) in &schema.columns {
                    *counts.entry(name.as_str()).or_default() += 1;
                }
            }
            let mut out = Vec::new();
            for (input_id, schema) in &input_schemas {
                for (name, ty) in &schema.columns {
                    let out_name = if counts[name.as_str()] > 1 {
                        format!("{input_id}.{name}")
                    } else {
                        name.clone()
                    };
                    out.push((out_name, *ty));
                }
            }
            Ok(Schema { columns: out })
        }
        TransformKind::Window => {
            let function = transform
                .params
                .function
                .as_deref()
                .expect("shape checked")
                .to_ascii_uppercase();
            let sig = dialect::function_catalog()
                .iter()
                .find(|s| s.name == function)
                .ok_or_else(|| SchemaError::BadCall {
                    transform: tid.to_string(),
                    detail: format!("unknown function {function:?}"),
                })?;
            if sig.kind != FunctionKind::Window {
                return Err(SchemaError::BadCall {
                    transform: tid.to_string(),
                    detail: format!("{function} is not a window function"),
                });
            }
            for name in transform
                .params
                .partition_by
                .iter()
                .flatten()
                .chain(transform.params.order_by.iter().flatten())
            {
                if first.get(name).is_none() {
                    return Err(SchemaError::UnknownColumn {
                        transform: tid.to_string(),
                        column: name.clone(),
                    });
                }
            }
            let alias = transform.params.alias.clone().expect("shape checked");
            if first.get(&alias).is_some() {
                return Err(SchemaError::DuplicateColumn {
                    transform: tid.to_string(),
                    column: alias,
                });
            }
            let ret = match sig.ret {
                RetSpec::Exact(ty) => ty,
                RetSpec::SameAsFirstArg => ScalarType::Int64,
            };
            let mut columns = first.columns.clone();
            columns.push((alias, ret));
            Ok(Schema { columns })
        }
        TransformKind::JsonParse => {
            let column = transform.params.column.as_deref().expect("shape checked");
            match first.get(column) {
                Some(ScalarType::Json) => {}
                Some(_) => {
                    return Err(SchemaError::NotJson {
                        transform: tid.to_string(),
                        column: column.to_string(),
                    })
                }
                None => {
                    return Err(SchemaError::UnknownColumn {
                        transform: tid.to_string(),
                        column: column.to_string(),
                    })
                }
            }
            let mut columns = first.columns.clone();
            let mut names: BTreeSet<String> = first.names().map(str::to_string).collect();
            for field in transform.params.fields.iter().flatten() {
                if !names.insert(field.alias.clone()) {
                    return Err(SchemaError::DuplicateColumn {
                        transform: tid.to_string(),
                        column: field.alias.clone(),
                    });
                }
                columns.push((field.alias.clone(), field.ty));
            }
            Ok(Schema { columns })
        }
        TransformKind::Expression => {
            let resolve = single_resolver(first);
            let mut out = Vec::new();
            let mut seen = BTreeSet::new();
            for aliased in transform.expression_exprs()? {
                let alias = aliased.alias.expect("alias enforced by validate");
                let ty = infer_type(&aliased.expr, &resolve, false)
                    .map_err(|e| issue_to_error(tid, e))?;
                if !seen.insert(alias.clone()) {
                    return Err(SchemaError::DuplicateColumn {
                        transform: tid.to_string(),
                        column: alias,
                    });
                }
                out.push((alias, ty));
            }
            Ok(Schema { columns: out })
        }
        TransformKind::Union => {
            for (input_id, schema) in &input_schemas[1..] {
                if schema.columns != first.columns {
                    return Err(SchemaError::TypeMismatch {
                        transform: tid.to_string(),
                        detail: format!(
                            "union input {input_id:?} schema does not match the first input"
                        ),
                    });
                }
            }
            Ok(first.clone())
        }
        TransformKind::Recursive => {
            let parent = transform.params.parent_key.as_deref().expect("shape checked");
            let child = transform.params.child_key.as_deref().expect("shape checked");
            let parent_ty = first.get(parent).ok_or_else(|| SchemaError::UnknownColumn {
                transform: tid.to_string(),
                column: parent.to_string(),
            })?;
            let child_ty = first.get(child).ok_or_else(|| SchemaError::UnknownColumn {
                transform: tid.to_string(),
                column: child.to_string(),
            })?;
            let comparable = (parent_ty.is_numeric() && child_ty.is_numeric())
                || (parent_ty == child_ty && parent_ty != ScalarType::Json);
            if !comparable {
                return Err(SchemaError::TypeMismatch {
                    transform: tid.to_string(),
                    detail: format!(
                        "recursive keys {parent:?} ({parent_ty}) and {child:?} ({child_ty}) are not comparable"
                    ),
                });
            }
            let anchor = transform.anchor_expr()?;
            let resolve = single_resolver(first);
            let ty = infer_type(&anchor, &resolve, false).map_err(|e| issue_to_error(tid, e))?;
            if ty != ScalarType::Bool {
                return Err(SchemaError::TypeMismatch {
                    transform: tid.to_string(),
                    detail: format!("recursive anchor has type {ty}, expected bool"),
                });
            }
            if first.get("depth").is_some() {
                return Err(SchemaError::DuplicateColumn {
                    transform: tid.to_string(),
                    column: "depth".to_string(),
                });
            }
            let mut columns = first.columns.clone();
            columns.push(("depth".to_string(), ScalarType::Int64));
            Ok(Schema { columns })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{ColumnDef, Dataset, JoinType, TransformParams};
    use alloc::vec;

    fn people() -> Dataset {
        Dataset {
            id: "people".to_string(),
            site: "a".to_string(),
            columns: vec![
                ColumnDef { name: "name".to_string(), ty: ScalarType::String },
                ColumnDef { name: "age".to_string(), ty: ScalarType::Int64 },
            ],
            size_bytes: 1_000,
            row_count: 10,
            allowed_sites: None,
        }
    }

    fn pipeline_with(transforms: Vec<Transform>, sinks: Vec<&str>) -> Pipeline {
        Pipeline {
            datasets: vec![people()],
            transforms,
            sinks: sinks.into_iter().map(str::to_string).collect(),
        }
    }

    #[test]
    fn project_narrows_columns() {
        let pipeline = pipeline_with(
            vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::Project,
                inputs: vec!["people".to_string()],
                params: TransformParams {
                    columns: Some(vec!["name".to_string()]),
                    ..TransformParams::default()
                },
            }],
            vec!["t"],
        );
        let schemas = infer_schemas(&pipeline).unwrap();
        assert_eq!(
            schemas["t"].columns,
            vec![("name".to_string(), ScalarType::String)]
        );
    }

    #[test]
    fn aggregate_outputs_keys_plus_aggregates() {
        let pipeline = Pipeline {
            datasets: vec![Dataset {
                id: "sales".to_string(),
                site: "a".to_string(),
                columns: vec![
                    ColumnDef { name: "region".to_string(), ty: ScalarType::String },
                    ColumnDef { name: "amount".to_string(), ty: ScalarType::Float64 },
                ],
                size_bytes: 1_000,
                row_count: 10,
                allowed_sites: None,
            }],
            transforms: vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::Aggregate,
                inputs: vec!["sales".to_string()],
                params: TransformParams {
                    group_keys: Some(vec!["region".to_string()]),
                    aggregates: Some(vec!["SUM(amount) AS total".to_string()]),
                    ..TransformParams::default()
                },
            }],
            sinks: vec!["t".to_string()],
        };
        let schemas = infer_schemas(&pipeline).unwrap();
        assert_eq!(
            schemas["t"].columns,
            vec![
                ("region".to_string(), ScalarType::String),
                ("total".to_string(), ScalarType::Float64),
            ]
        );
    }

    #[test]
    fn int_compared_to_string_literal_is_a_type_error() {
        let pipeline = pipeline_with(
            vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::Filter,
                inputs: vec!["people".to_string()],
                params: TransformParams {
                    predicate: Some("age > 'x'".to_string()),
                    ..TransformParams::default()
                },
            }],
            vec!["t"],
        );
        assert!(matches!(
            infer_schemas(&pipeline),
            Err(SchemaError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn join_qualifies_collisions_by_input_id() {
        let pipeline = Pipeline {
            datasets: vec![
                Dataset {
                    id: "l".to_string(),
                    site: "a".to_string(),
                    columns: vec![
                        ColumnDef { name: "id".to_string(), ty: ScalarType::Int64 },
                        ColumnDef { name: "v".to_string(), ty: ScalarType::Float64 },
                    ],
                    size_bytes: 10,
                    row_count: 1,
                    allowed_sites: None,
                },
                Dataset {
                    id: "r".to_string(),
                    site: "a".to_string(),
                    columns: vec![
                        ColumnDef { name: "id".to_string(), ty: ScalarType::Int64 },
                        ColumnDef { name: "w".to_string(), ty: ScalarType::String },
                    ],
                    size_bytes: 10,
                    row_count: 1,
                    allowed_sites: None,
                },
            ],
            transforms: vec![Transform {
                id: "j".to_string(),
                kind: TransformKind::Join,
                inputs: vec!["l".to_string(), "r".to_string()],
                params: TransformParams {
                    join_type: Some(JoinType::Inner),
                    join_on: Some(vec!["l.id = r.id".to_string()]),
                    ..TransformParams::default()
                },
            }],
            sinks: vec!["j".to_string()],
        };
        let schemas = infer_schemas(&pipeline).unwrap();
        assert_eq!(
            schemas["j"]
                .names()
                .collect::<Vec<_>>(),
            vec!["l.id", "v", "r.id", "w"]
        );
    }

    #[test]
    fn ambiguous_bare_column_in_join_condition_is_rejected() {
        let pipeline = Pipeline {
            datasets: vec![
                Dataset {
                    id: "l".to_string(),
                    site: "a".to_string(),
                    columns: vec![ColumnDef { name: "id".to_string(), ty: ScalarType::Int64 }],
                    size_bytes: 10,
                    row_count: 1,
                    allowed_sites: None,
                },
                Dataset {
                    id: "r".to_string(),
                    site: "a".to_string(),
                    columns: vec![ColumnDef { name: "id".to_string(), ty: ScalarType::Int64 }],
                    size_bytes: 10,
                    row_count: 1,
                    allowed_sites: None,
                },
            ],
            transforms: vec![Transform {
                id: "j".to_string(),
                kind: TransformKind::Join,
                inputs: vec!["l".to_string(), "r".to_string()],
                params: TransformParams {
                    join_type: Some(JoinType::Inner),
                    join_on: Some(vec!["id = r.id".to_string()]),
                    ..TransformParams::default()
                },
            }],
            sinks: vec!["j".to_string()],
        };
        assert!(matches!(
            infer_schemas(&pipeline),
            Err(SchemaError::AmbiguousColumn { .. })
        ));
    }

    #[test]
    fn json_parse_requires_a_json_column() {
        let pipeline = pipeline_with(
            vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::JsonParse,
                inputs: vec!["people".to_string()],
                params: TransformParams {
                    column: Some("name".to_string()),
                    fields: Some(vec![crate::ir::JsonFieldSpec {
                        path: "$.x".to_string(),
                        alias: "x".to_string(),
                        ty: ScalarType::String,
                    }]),
                    ..TransformParams::default()
                },
            }],
            vec!["t"],
        );
        assert!(matches!(
            infer_schemas(&pipeline),
            Err(SchemaError::NotJson { .. })
        ));
    }

    #[test]
    fn aggregate_in_scalar_context_is_rejected() {
        let pipeline = pipeline_with(
            vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::Filter,
                inputs: vec!["people".to_string()],
                params: TransformParams {
                    predicate: Some("SUM(age) > 10".to_string()),
                    ..TransformParams::default()
                },
            }],
            vec!["t"],
        );
        assert!(matches!(
            infer_schemas(&pipeline),
            Err(SchemaError::BadCall { .. })
        ));
    }

    #[test]
    fn inference_is_deterministic() {
        let pipeline = pipeline_with(
            vec![Transform {
                id: "t".to_string(),
                kind: TransformKind::Expression,
                inputs: vec!["people".to_string()],
                params: TransformParams {
                    expressions: Some(vec!["UPPER(TRIM(name)) AS clean".to_string()]),
                    ..TransformParams::default()
                },
            }],
            vec!["t"],
        );
        let a = infer_schemas(&pipeline).unwrap();
        let b = infer_schemas(&pipeline).unwrap();
        assert_eq!(a, b);
        assert_eq!(a["t"].columns, vec![("clean".to_string(), ScalarType::String)]);
    }
}
