//! Core engine for multi-cloud ETL push-down planning.
//!
//! This crate models ETL pipelines as DAGs of logical transforms over datasets
//! that live on different cloud sites, estimates the money and time cost of
//! executing each transform on each site, and produces execution plans under
//! several placement strategies (centralized, localized, hybrid, federated,
//! and a cost-minimizing search). Pushed subgraphs are lowered to SQL in the
//! target site's dialect, and finished plans can be run through a
//! deterministic discrete-event simulator that reports runtime, cross-cloud
//! transfer volume, and cost.
//!
//! The crate is `no_std` (with `alloc`) and fully deterministic: all money
//! arithmetic is exact decimal in integer micro-units, all collections are
//! ordered, and every tie-break is specified. IO, file formats, and the CLI
//! live in the companion `fedplan` crate.
//!
//! Unit conventions: data volumes are bytes, 1 GB = 10^9 bytes; money rates
//! are per GB; bandwidth and compute throughput are GB per second; latency
//! and simulated times are seconds.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cost;
pub mod dialect;
pub mod expr;
pub mod ir;
pub mod money;
pub mod planner;
pub mod schema;
pub mod sim;
pub mod topology;

pub use cost::{
    annotate_sizes, cost_exec, cost_move, estimate_output_size, CostError, CostEstimate,
    ExactCost, Factor, SelectivityConfig, SizeStats, TotalCost,
};
pub use dialect::{
    function_catalog, lower_federated, lower_subgraph, pushed_groups, rewrite_function,
    CodegenError, DialectSpec, FunctionKind, FunctionSig, PushedGroup,
};
pub use expr::{AliasedExpr, BinaryOp, Expr, ExprError, UnaryOp};
pub use ir::{
    topo_order, ColumnDef, Dataset, IrError, JoinType, JsonFieldSpec, Pipeline, PipelineCheck,
    ScalarType, Transform, TransformKind, TransformParams,
};
pub use money::{Money, MoneyParseError};
pub use planner::{
    decide_pushdown, plan_centralized, plan_federated, plan_hybrid, plan_localized, plan_optimal,
    total_cost, validate_plan, AccessMode, DecisionLine, InputAccess, Plan, PlanError, PlanStep,
    PlannerContext, PushDecision, SqlGroup, Strategy, TransferEdge,
};
pub use schema::{infer_schemas, Schema, SchemaError};
pub use sim::{
    compare, simulate, simulate_with_config, ImprovementRow, ImprovementTable, LineageEntry,
    SimConfig, SimError, SimEvent, SimEventKind, SimulationReport,
};
pub use topology::{
    is_pushable, CapabilityProfile, Link, Site, SiteKind, Topology, TopologyError,
};
