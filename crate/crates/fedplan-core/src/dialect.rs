//! Dialect descriptions and SQL generation for pushed subgraphs.
//!
//! A pushed subgraph lowers to a single statement in chained-CTE form: one
//! CTE per transform in topo order, then a final `SELECT` over the group's
//! terminal output. Function names go through the dialect's rewrite map and
//! identifiers through its quote character, so the same logical group emits
//! different but structurally identical text per engine. Generation is
//! deterministic: identical inputs produce byte-identical SQL.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, UnaryOp};
use crate::ir::{ScalarType, Transform, TransformKind};
use crate::planner::PlanStep;
use crate::schema::Schema;
use crate::topology::{Site, SiteKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Scalar,
    Aggregate,
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgSpec {
    Exact(ScalarType),
    Numeric,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetSpec {
    Exact(ScalarType),
    SameAsFirstArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionSig {
    pub name: &'static str,
    pub kind: FunctionKind,
    pub args: &'static [ArgSpec],
    pub ret: RetSpec,
}

const CATALOG: [FunctionSig; 8] = [
    FunctionSig {
        name: "UPPER",
        kind: FunctionKind::Scalar,
        args: &[ArgSpec::Exact(ScalarType::String)],
        ret: RetSpec::Exact(ScalarType::String),
    },
    FunctionSig {
        name: "TRIM",
        kind: FunctionKind::Scalar,
        args: &[ArgSpec::Exact(ScalarType::String)],
        ret: RetSpec::Exact(ScalarType::String),
    },
    FunctionSig {
        name: "LENGTH",
        kind: FunctionKind::Scalar,
        args: &[ArgSpec::Exact(ScalarType::String)],
        ret: RetSpec::Exact(ScalarType::Int64),
    },
    FunctionSig {
        name: "SUM",
        kind: FunctionKind::Aggregate,
        args: &[ArgSpec::Numeric],
        ret: RetSpec::SameAsFirstArg,
    },
    FunctionSig {
        name: "COUNT",
        kind: FunctionKind::Aggregate,
        args: &[ArgSpec::Any],
        ret: RetSpec::Exact(ScalarType::Int64),
    },
    FunctionSig {
        name: "AVG",
        kind: FunctionKind::Aggregate,
        args: &[ArgSpec::Numeric],
        ret: RetSpec::Exact(ScalarType::Float64),
    },
    FunctionSig {
        name: "ROW_NUMBER",
        kind: FunctionKind::Window,
        args: &[],
        ret: RetSpec::Exact(ScalarType::Int64),
    },
    FunctionSig {
        name: "JSON_EXTRACT",
        kind: FunctionKind::Scalar,
        args: &[ArgSpec::Exact(ScalarType::Json), ArgSpec::Exact(ScalarType::String)],
        ret: RetSpec::Exact(ScalarType::Json),
    },
];

/// The logical function catalog: every function a pipeline may reference.
pub fn function_catalog() -> &'static [FunctionSig] {
    &CATALOG
}

/// One engine dialect: the logical-to-dialect function mapping, identifier
/// quoting, and the feature gaps that make some logic inexpressible there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialectSpec {
    pub id: String,
    pub identifier_quote: char,
    pub function_map: BTreeMap<String, String>,
    #[serde(default)]
    pub unsupported_kinds: BTreeSet<TransformKind>,
    #[serde(default)]
    pub unsupported_functions: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub remarks: String,
}

impl DialectSpec {
    /// A dialect that maps every catalog function to itself and supports
    /// everything, quoting identifiers with double quotes.
    pub fn identity(id: &str) -> DialectSpec {
        DialectSpec {
            id: id.to_string(),
            identifier_quote: '"',
            function_map: function_catalog()
                .iter()
                .map(|sig| (sig.name.to_string(), sig.name.to_string()))
                .collect(),
            unsupported_kinds: BTreeSet::new(),
            unsupported_functions: BTreeSet::new(),
            remarks: String::new(),
        }
    }

    /// The function map must cover the catalog minus the unsupported set,
    /// and must not name functions outside the catalog.
    pub fn validate(&self) -> Result<(), CodegenError> {
        for sig in function_catalog() {
            if !self.unsupported_functions.contains(sig.name)
                && !self.function_map.contains_key(sig.name)
            {
                return Err(CodegenError::InvalidDialect {
                    dialect: self.id.clone(),
                    detail: format!("function_map is missing {:?}", sig.name),
                });
            }
        }
        for name in self.function_map.keys().chain(&self.unsupported_functions) {
            if function_catalog().iter().all(|sig| sig.name != name) {
                return Err(CodegenError::InvalidDialect {
                    dialect: self.id.clone(),
                    detail: format!("{name:?} is not a catalog function"),
                });
            }
        }
        Ok(())
    }

    /// Capability profile implied by this dialect; site profiles are derived
    /// from the dialect at topology load so both describe the same facts.
    pub fn derive_capabilities(
        &self,
        supports_federation: bool,
    ) -> crate::topology::CapabilityProfile {
        crate::topology::CapabilityProfile {
            supported_kinds: TransformKind::ALL
                .iter()
                .copied()
                .filter(|k| !self.unsupported_kinds.contains(k))
                .collect(),
            supported_functions: function_catalog()
                .iter()
                .map(|sig| sig.name.to_string())
                .filter(|name| !self.unsupported_functions.contains(name))
                .collect(),
            supports_federation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodegenError {
    UnsupportedKind { transform: String, kind: TransformKind, dialect: String },
    UnsupportedFunction { name: String, dialect: String },
    FunctionNotMapped { name: String, dialect: String },
    UnknownColumn { detail: String },
    HostNotFederated { site: String },
    MissingSchema { id: String },
    InvalidDialect { dialect: String, detail: String },
    EmptyGroup,
}

impl fmt::Display for CodegenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodegenError::UnsupportedKind { transform, kind, dialect } => write!(
                f,
                "transform {transform:?}: dialect {dialect:?} cannot express {kind} (planner bug)"
            ),
            CodegenError::UnsupportedFunction { name, dialect } => {
                write!(f, "dialect {dialect:?} does not support function {name}")
            }
            CodegenError::FunctionNotMapped { name, dialect } => {
                write!(f, "dialect {dialect:?} has no mapping for function {name}")
            }
            CodegenError::UnknownColumn { detail } => write!(f, "unknown column: {detail}"),
            CodegenError::HostNotFederated { site } => {
                write!(f, "site {site:?} does not support federation")
            }
            CodegenError::MissingSchema { id } => write!(f, "missing schema for {id:?}"),
            CodegenError::InvalidDialect { dialect, detail } => {
                write!(f, "dialect {dialect:?}: {detail}")
            }
            CodegenError::EmptyGroup => f.write_str("cannot lower an empty group"),
        }
    }
}

/// Rewrites a logical function name into the dialect's name for it.
pub fn rewrite_function<'d>(name: &str, dialect: &'d DialectSpec) -> Result<&'d str, CodegenError> {
    if dialect.unsupported_functions.contains(name) {
        return Err(CodegenError::UnsupportedFunction {
            name: name.to_string(),
            dialect: dialect.id.clone(),
        });
    }
    dialect
        .function_map
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| CodegenError::FunctionNotMapped {
            name: name.to_string(),
            dialect: dialect.id.clone(),
        })
}

/// A maximal connected set of same-site steps pushed to one engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushedGroup {
    pub site: String,
    pub transform_ids: Vec<String>,
}

/// Splits a plan's engine-site steps into pushed subgraphs: maximal sets of
/// steps on the same site connected by producer/consumer edges. Steps at the
/// central ETL engine are not SQL targets and form no groups.
pub fn pushed_groups(
    steps: &[PlanStep],
    pipeline: &crate::ir::Pipeline,
    topo: &Topology,
) -> Vec<PushedGroup> {
    let engine_steps: Vec<(usize, &PlanStep)> = steps
        .iter()
        .enumerate()
        .filter(|(_, step)| {
            topo.site(&step.assigned_site)
                .is_some_and(|s| s.kind == SiteKind::DatabaseEngine)
        })
        .collect();
    let index_of: BTreeMap<&str, usize> = engine_steps
        .iter()
        .enumerate()
        .map(|(i, (_, step))| (step.transform_id.as_str(), i))
        .collect();

    // union-find over engine steps
    let mut parent: Vec<usize> = (0..engine_steps.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for (i, (_, step)) in engine_steps.iter().enumerate() {
        let transform = pipeline
            .transform(&step.transform_id)
            .expect("plan steps reference pipeline transforms");
        for input in &transform.inputs {
            if let Some(&j) = index_of.get(input.as_str()) {
                if engine_steps[j].1.assigned_site == step.assigned_site {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, PushedGroup> = BTreeMap::new();
    for (i, (_, step)) in engine_steps.iter().enumerate() {
        let root = find(&mut parent, i);
        groups
            .entry(root)
            .or_insert_with(|| PushedGroup {
                site: step.assigned_site.clone(),
                transform_ids: Vec::new(),
            })
            .transform_ids
            .push(step.transform_id.clone());
    }
    let mut out: Vec<PushedGroup> = groups.into_values().collect();
    out.sort_by(|a, b| (&a.site, &a.transform_ids[0]).cmp(&(&b.site, &b.transform_ids[0])));
    out
}

/// Lowers a pushed subgraph whose inputs are all local to the target site.
pub fn lower_subgraph(
    group: &[&Transform],
    schemas: &BTreeMap<String, Schema>,
    dialect: &DialectSpec,
) -> Result<String, CodegenError> {
    emit_group(group, schemas, dialect, &BTreeMap::new())
}

/// Lowers a pushed subgraph hosted on a federation-capable site. Inputs in
/// `remote` (node id to owning site) are referenced with site-qualified
/// names; everything else is identical to [`lower_subgraph`].
pub fn lower_federated(
    group: &[&Transform],
    host: &Site,
    remote: &BTreeMap<String, String>,
    schemas: &BTreeMap<String, Schema>,
    dialect: &DialectSpec,
) -> Result<String, CodegenError> {
    if !remote.is_empty() && !host.capabilities.supports_federation {
        return Err(CodegenError::HostNotFederated {
            site: host.id.clone(),
        });
    }
    emit_group(group, schemas, dialect, remote)
}

struct Emitter<'a> {
    dialect: &'a DialectSpec,
    schemas: &'a BTreeMap<String, Schema>,
    group_ids: BTreeSet<&'a str>,
    remote: &'a BTreeMap<String, String>,
}

impl<'a> Emitter<'a> {
    fn quote(&self, name: &str) -> String {
        let q = self.dialect.identifier_quote;
        format!("{q}{name}{q}")
    }

    /// Table expression for an input node: a CTE name inside the group, a
    /// site-qualified name for federated reads, a bare table otherwise.
    fn table_ref(&self, id: &str) -> String {
        if self.group_ids.contains(id) {
            return id.to_string();
        }
        match self.remote.get(id) {
            Some(site) => format!("{site}.{id}"),
            None => id.to_string(),
        }
    }

    fn schema(&self, id: &str) -> Result<&'a Schema, CodegenError> {
        self.schemas.get(id).ok_or_else(|| CodegenError::MissingSchema {
            id: id.to_string(),
        })
    }

    fn render_function(&self, name: &str) -> Result<&str, CodegenError> {
        rewrite_function(name, self.dialect)
    }

    fn render_literal_str(value: &str) -> String {
        format!("'{}'", value.replace('\'', "''"))
    }

    /// Renders an expression with unqualified column references.
    fn render_expr_plain(&self, expr: &Expr) -> Result<String, CodegenError> {
        self.render_expr(expr, &|name| Ok(self.quote(name)))
    }

    fn render_expr(
        &self,
        expr: &Expr,
        column: &dyn Fn(&str) -> Result<String, CodegenError>,
    ) -> Result<String, CodegenError> {
        Ok(match expr {
            Expr::Column(name) => column(name)?,
            Expr::Int(v) => format!("{v}"),
            Expr::Float(v) => format!("{v}"),
            Expr::Str(v) => Self::render_literal_str(v),
            Expr::Bool(true) => "TRUE".to_string(),
            Expr::Bool(false) => "FALSE".to_string(),
            Expr::Call { name, args } => {
                let mapped = self.render_function(name)?;
                let rendered: Vec<String> = args
                    .iter()
                    .map(|arg| self.render_expr(arg, column))
                    .collect::<Result<_, _>>()?;
                format!("{mapped}({})", rendered.join(", "))
            }
            Expr::Unary { op, operand } => {
                let inner = self.render_expr(operand, column)?;
                let wrapped = if matches!(**operand, Expr::Binary { .. }) {
                    format!("({inner})")
                } else {
                    inner
                };
                match op {
                    UnaryOp::Not => format!("NOT {wrapped}"),
                    UnaryOp::Neg => format!("-{wrapped}"),
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let render_side = |side: &Expr, right: bool| -> Result<String, CodegenError> {
                    let text = self.render_expr(side, column)?;
                    let needs_parens = match side {
                        Expr::Binary { op: child, .. } => {
                            child.precedence() < op.precedence()
                                || (right && child.precedence() == op.precedence())
                        }
                        _ => false,
                    };
                    Ok(if needs_parens { format!("({text})") } else { text })
                };
                format!(
                    "{} {} {}",
                    render_side(lhs, false)?,
                    op.sql_symbol(),
                    render_side(rhs, true)?
                )
            }
        })
    }

    /// Column resolver for multi-input bodies: references become
    /// `input_alias.{quoted column}`.
    fn qualified_column(
        &self,
        inputs: &[(String, &Schema)],
        name: &str,
    ) -> Result<String, CodegenError> {
        let owners: Vec<&String> = inputs
            .iter()
            .filter(|(_, schema)| schema.get(name).is_some())
            .map(|(id, _)| id)
            .collect();
        match owners.len() {
            1 => return Ok(format!("{}.{}", owners[0], self.quote(name))),
            n if n > 1 => {
                return Err(CodegenError::UnknownColumn {
                    detail: format!("{name:?} is ambiguous across join inputs"),
                })
            }
            _ => {}
        }
        if let Some((qualifier, column)) = name.split_once('.') {
            if let Some((id, schema)) = inputs.iter().find(|(id, _)| id == qualifier) {
                if schema.get(column).is_some() {
                    return Ok(format!("{id}.{}", self.quote(column)));
                }
            }
        }
        Err(CodegenError::UnknownColumn {
            detail: format!("{name:?} not found among join inputs"),
        })
    }

    fn select_list_all(&self, schema: &Schema) -> String {
        schema
            .names()
            .map(|n| self.quote(n))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn body(&self, transform: &Transform) -> Result<String, CodegenError> {
        if self.dialect.unsupported_kinds.contains(&transform.kind) {
            return Err(CodegenError::UnsupportedKind {
                transform: transform.id.clone(),
                kind: transform.kind,
                dialect: self.dialect.id.clone(),
            });
        }
        let input_schema = self.schema(&transform.inputs[0])?;
        let from = self.table_ref(&transform.inputs[0]);
        Ok(match transform.kind {
            TransformKind::Filter => {
                let predicate = transform.predicate_expr().map_err(ir_to_codegen)?;
                format!(
                    "SELECT {} FROM {from} WHERE {}",
                    self.select_list_all(input_schema),
                    self.render_expr_plain(&predicate)?
                )
            }
            TransformKind::Project => {
                let columns = transform.params.columns.as_deref().unwrap_or_default();
                let list = columns
                    .iter()
                    .map(|c| self.quote(c))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("SELECT {list} FROM {from}")
            }
            TransformKind::Aggregate => {
                let keys = transform.params.group_keys.as_deref().unwrap_or_default();
                let mut list: Vec<String> = keys.iter().map(|k| self.quote(k)).collect();
                for aliased in transform.aggregate_exprs().map_err(ir_to_codegen)? {
                    let alias = aliased.alias.expect("validated");
                    list.push(format!(
                        "{} AS {}",
                        self.render_expr_plain(&aliased.expr)?,
                        self.quote(&alias)
                    ));
                }
                let group_by = if keys.is_empty() {
                    String::new()
                } else {
                    format!(
                        " GROUP BY {}",
                        keys.iter().map(|k| self.quote(k)).collect::<Vec<_>>().join(", ")
                    )
                };
                format!("SELECT {} FROM {from}{group_by}", list.join(", "))
            }
            TransformKind::Join => self.join_body(transform)?,
            TransformKind::Union => {
                let branches: Vec<String> = transform
                    .inputs
                    .iter()
                    .map(|input| {
                        let schema = self.schema(input)?;
                        Ok(format!(
                            "SELECT {} FROM {}",
                            self.select_list_all(schema),
                            self.table_ref(input)
                        ))
                    })
                    .collect::<Result<_, CodegenError>>()?;
                branches.join(" UNION ALL ")
            }
            TransformKind::Window => {
                let function = transform
                    .params
                    .function
                    .as_deref()
                    .expect("validated")
                    .to_ascii_uppercase();
                let mapped = self.render_function(&function)?;
                let mut over = String::new();
                if let Some(partition) = transform.params.partition_by.as_deref() {
                    if !partition.is_empty() {
                        over.push_str("PARTITION BY ");
                        over.push_str(
                            &partition.iter().map(|c| self.quote(c)).collect::<Vec<_>>().join(", "),
                        );
                    }
                }
                if let Some(order) = transform.params.order_by.as_deref() {
                    if !order.is_empty() {
                        if !over.is_empty() {
                            over.push(' ');
                        }
                        over.push_str("ORDER BY ");
                        over.push_str(
                            &order.iter().map(|c| self.quote(c)).collect::<Vec<_>>().join(", "),
                        );
                    }
                }
                let alias = transform.params.alias.as_deref().expect("validated");
                format!(
                    "SELECT {}, {mapped}() OVER ({over}) AS {} FROM {from}",
                    self.select_list_all(input_schema),
                    self.quote(alias)
                )
            }
            TransformKind::JsonParse => {
                let source = transform.params.column.as_deref().expect("validated");
                let mapped = self.render_function("JSON_EXTRACT")?;
                let mut list = vec_of_strings(self.select_list_all(input_schema));
                for field in transform.params.fields.iter().flatten() {
                    list.push(format!(
                        "{mapped}({}, {}) AS {}",
                        self.quote(source),
                        Self::render_literal_str(&field.path),
                        self.quote(&field.alias)
                    ));
                }
                format!("SELECT {} FROM {from}", list.join(", "))
            }
            TransformKind::Expression => {
                let mut list = Vec::new();
                for aliased in transform.expression_exprs().map_err(ir_to_codegen)? {
                    let alias = aliased.alias.expect("validated");
                    list.push(format!(
                        "{} AS {}",
                        self.render_expr_plain(&aliased.expr)?,
                        self.quote(&alias)
                    ));
                }
                format!("SELECT {} FROM {from}", list.join(", "))
            }
            TransformKind::Recursive => self.recursive_body(transform)?,
        })
    }

    fn join_body(&self, transform: &Transform) -> Result<String, CodegenError> {
        let inputs: Vec<(String, &Schema)> = transform
            .inputs
            .iter()
            .map(|input| Ok((input.clone(), self.schema(input)?)))
            .collect::<Result<_, CodegenError>>()?;
        let join_type = transform.params.join_type.expect("validated");
        let conditions = transform.join_conditions().map_err(ir_to_codegen)?;

        // Collision counting mirrors schema inference: bare names owned by
        // several inputs are re-exposed as `input.column`.
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, schema) in &inputs {
            for name in schema.names() {
                *counts.entry(name).or_default() += 1;
            }
        }
        let mut select = Vec::new();
        for (id, schema) in &inputs {
            for name in schema.names() {
                let reference = format!("{id}.{}", self.quote(name));
                if counts[name] > 1 {
                    select.push(format!("{reference} AS {}", self.quote(&format!("{id}.{name}"))));
                } else {
                    select.push(reference);
                }
            }
        }

        let mut from = format!("{} AS {}", self.table_ref(&inputs[0].0), inputs[0].0);
        for (i, condition) in conditions.iter().enumerate() {
            let (id, _) = &inputs[i + 1];
            let rendered = self.render_expr(condition, &|name| self.qualified_column(&inputs, name))?;
            from.push_str(&format!(
                " {} {} AS {} ON {}",
                join_type.sql_keyword(),
                self.table_ref(id),
                id,
                rendered
            ));
        }
        Ok(format!("SELECT {} FROM {from}", select.join(", ")))
    }

    /// Two-branch recursive walk: anchor rows at depth 0, then children
    /// joined to the walk through the parent/child keys.
    fn recursive_body(&self, transform: &Transform) -> Result<String, CodegenError> {
        let input_schema = self.schema(&transform.inputs[0])?;
        let from = self.table_ref(&transform.inputs[0]);
        let parent = transform.params.parent_key.as_deref().expect("validated");
        let child = transform.params.child_key.as_deref().expect("validated");
        let anchor = transform.anchor_expr().map_err(ir_to_codegen)?;
        let depth = self.quote("depth");

        let anchor_line = format!(
            "SELECT {}, 0 AS {depth} FROM {from} WHERE {}",
            self.select_list_all(input_schema),
            self.render_expr_plain(&anchor)?
        );
        let walk_columns = input_schema
            .names()
            .map(|n| format!("c.{}", self.quote(n)))
            .collect::<Vec<_>>()
            .join(", ");
        let step_line = format!(
            "SELECT {walk_columns}, w.{depth} + 1 AS {depth} FROM {from} AS c JOIN {} AS w ON c.{} = w.{}",
            transform.id,
            self.quote(parent),
            self.quote(child)
        );
        Ok(format!("{anchor_line}\n  UNION ALL\n  {step_line}"))
    }
}

fn vec_of_strings(joined: String) -> Vec<String> {
    if joined.is_empty() {
        Vec::new()
    } else {
        alloc::vec![joined]
    }
}

fn ir_to_codegen(err: crate::ir::IrError) -> CodegenError {
    CodegenError::UnknownColumn {
        detail: err.to_string(),
    }
}

fn emit_group(
    group: &[&Transform],
    schemas: &BTreeMap<String, Schema>,
    dialect: &DialectSpec,
    remote: &BTreeMap<String, String>,
) -> Result<String, CodegenError> {
    if group.is_empty() {
        return Err(CodegenError::EmptyGroup);
    }
    let emitter = Emitter {
        dialect,
        schemas,
        group_ids: group.iter().map(|t| t.id.as_str()).collect(),
        remote,
    };
    let recursive = group.iter().any(|t| t.kind == TransformKind::Recursive);
    let mut sql = String::from(if recursive { "WITH RECURSIVE " } else { "WITH " });
    for (i, transform) in group.iter().enumerate() {
        if i > 0 {
            sql.push_str(",\n");
        }
        sql.push_str(&transform.id);
        sql.push_str(" AS (\n  ");
        sql.push_str(&emitter.body(transform)?);
        sql.push_str("\n)");
    }
    let terminal = group.last().expect("non-empty");
    let terminal_schema = emitter.schema(&terminal.id)?;
    sql.push_str(&format!(
        "\nSELECT {} FROM {}\n",
        emitter.select_list_all(terminal_schema),
        terminal.id
    ));
    Ok(sql)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{ColumnDef, Dataset, Pipeline, TransformParams};
    use crate::schema::infer_schemas;
    use alloc::vec;

    fn cleanname_pipeline() -> Pipeline {
        Pipeline {
            datasets: vec![Dataset {
                id: "customers".to_string(),
                site: "alpha".to_string(),
                columns: vec![
                    ColumnDef { name: "name".to_string(), ty: ScalarType::String },
                    ColumnDef { name: "email".to_string(), ty: ScalarType::String },
                ],
                size_bytes: 1_000_000_000,
                row_count: 10_000_000,
                allowed_sites: None,
            }],
            transforms: vec![
                Transform {
                    id: "c_long_names".to_string(),
                    kind: TransformKind::Filter,
                    inputs: vec!["customers".to_string()],
                    params: TransformParams {
                        predicate: Some("LENGTH(name) > 3".to_string()),
                        ..TransformParams::default()
                    },
                },
                Transform {
                    id: "c_clean".to_string(),
                    kind: TransformKind::Expression,
                    inputs: vec!["c_long_names".to_string()],
                    params: TransformParams {
                        expressions: Some(vec!["UPPER(TRIM(name)) AS CleanName".to_string()]),
                        ..TransformParams::default()
                    },
                },
            ],
            sinks: vec!["c_clean".to_string()],
        }
    }

    #[test]
    fn identity_dialect_reproduces_the_clean_name_shape() {
        let pipeline = cleanname_pipeline();
        let schemas = infer_schemas(&pipeline).unwrap();
        let group: Vec<&Transform> = pipeline.transforms.iter().collect();
        let sql = lower_subgraph(&group, &schemas, &DialectSpec::identity("identity")).unwrap();
        assert!(sql.contains("SELECT UPPER(TRIM(\"name\")) AS \"CleanName\""), "{sql}");
        assert!(sql.contains("WHERE LENGTH(\"name\") > 3"), "{sql}");
        assert!(sql.contains("FROM customers"), "{sql}");
        assert!(sql.ends_with('\n'));
        // byte-stable
        let again = lower_subgraph(&group, &schemas, &DialectSpec::identity("identity")).unwrap();
        assert_eq!(sql, again);
    }

    #[test]
    fn function_rewrites_follow_the_map() {
        let mut dialect = DialectSpec::identity("variant");
        dialect
            .function_map
            .insert("LENGTH".to_string(), "CHAR_LENGTH".to_string());
        let pipeline = cleanname_pipeline();
        let schemas = infer_schemas(&pipeline).unwrap();
        let group: Vec<&Transform> = pipeline.transforms.iter().collect();
        let sql = lower_subgraph(&group, &schemas, &dialect).unwrap();
        assert!(sql.contains("CHAR_LENGTH(\"name\") > 3"), "{sql}");
        assert!(!sql.contains(" LENGTH("), "{sql}");
    }

    #[test]
    fn rewrite_function_respects_unsupported_sets() {
        let dialect = DialectSpec::identity("d");
        assert_eq!(rewrite_function("UPPER", &dialect).unwrap(), "UPPER");
        let mut gapped = DialectSpec::identity("gapped");
        gapped.unsupported_functions.insert("JSON_EXTRACT".to_string());
        gapped.function_map.remove("JSON_EXTRACT");
        assert!(gapped.validate().is_ok());
        assert!(matches!(
            rewrite_function("JSON_EXTRACT", &gapped),
            Err(CodegenError::UnsupportedFunction { .. })
        ));
    }

    #[test]
    fn dialect_map_must_cover_catalog() {
        let mut dialect = DialectSpec::identity("broken");
        dialect.function_map.remove("SUM");
        assert!(matches!(
            dialect.validate(),
            Err(CodegenError::InvalidDialect { .. })
        ));
    }

    #[test]
    fn single_project_is_one_cte_plus_final_select() {
        let pipeline = Pipeline {
            datasets: cleanname_pipeline().datasets,
            transforms: vec![Transform {
                id: "p".to_string(),
                kind: TransformKind::Project,
                inputs: vec!["customers".to_string()],
                params: TransformParams {
                    columns: Some(vec!["name".to_string()]),
                    ..TransformParams::default()
                },
            }],
            sinks: vec!["p".to_string()],
        };
        let schemas = infer_schemas(&pipeline).unwrap();
        let group: Vec<&Transform> = pipeline.transforms.iter().collect();
        let sql = lower_subgraph(&group, &schemas, &DialectSpec::identity("identity")).unwrap();
        assert_eq!(
            sql,
            "WITH p AS (\n  SELECT \"name\" FROM customers\n)\nSELECT \"name\" FROM p\n"
        );
    }

    #[test]
    fn unsupported_kind_is_a_codegen_error() {
        let pipeline = cleanname_pipeline();
        let schemas = infer_schemas(&pipeline).unwrap();
        let group: Vec<&Transform> = pipeline.transforms.iter().collect();
        let mut dialect = DialectSpec::identity("no-filter");
        dialect.unsupported_kinds.insert(TransformKind::Filter);
        assert!(matches!(
            lower_subgraph(&group, &schemas, &dialect),
            Err(CodegenError::UnsupportedKind { .. })
        ));
    }
}
