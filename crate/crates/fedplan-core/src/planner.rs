//! Execution planning: per-transform push-down decisions, the placement
//! strategies, and the min-cost plan search.
//!
//! A plan assigns every transform to a site and records how each input is
//! accessed there (local, moved over a link, or read through a federated
//! scan). Data flows are deduplicated per (producer, destination site): two
//! steps on one site consuming the same remote node share one transfer.
//! Every tie-break is specified, so identical inputs always produce
//! byte-identical plans; candidate comparisons use exact cost numerators so
//! rounding can never flip an argmin.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::{
    annotate_sizes, charge, charge_exact, CostError, CostEstimate, ExactCost, SizeStats,
    TotalCost,
};
use crate::dialect::{lower_federated, lower_subgraph, pushed_groups, CodegenError, DialectSpec};
use crate::ir::{IrError, Pipeline, Transform};
use crate::money::Money;
use crate::schema::{infer_schemas, Schema, SchemaError};
use crate::topology::{is_pushable, Site, SiteKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Centralized,
    Localized,
    Hybrid,
    Federated,
    Optimal,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Centralized => "centralized",
            Strategy::Localized => "localized",
            Strategy::Hybrid => "hybrid",
            Strategy::Federated => "federated",
            Strategy::Optimal => "optimal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    Local,
    Moved,
    FederatedScan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputAccess {
    pub input: String,
    pub mode: AccessMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub transform_id: String,
    pub assigned_site: String,
    pub access_modes: Vec<InputAccess>,
    pub materialized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferEdge {
    pub from: String,
    pub to: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlGroup {
    pub site: String,
    pub dialect: String,
    pub sql: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub strategy: Strategy,
    pub steps: Vec<PlanStep>,
    pub transfer_edges: Vec<TransferEdge>,
    pub sql_per_group: Vec<SqlGroup>,
    pub estimated: TotalCost,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    Ir(IrError),
    Schema(SchemaError),
    Cost(CostError),
    Codegen(CodegenError),
    UnknownSite { id: String },
    UnknownDialect { site: String, dialect: String },
    ResidencyViolation { dataset: String, site: String },
    NoFederationSite,
    NoFeasiblePlan { detail: String },
    Mismatch { detail: String },
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Ir(e) => write!(f, "{e}"),
            PlanError::Schema(e) => write!(f, "{e}"),
            PlanError::Cost(e) => write!(f, "{e}"),
            PlanError::Codegen(e) => write!(f, "{e}"),
            PlanError::UnknownSite { id } => write!(f, "unknown site {id:?}"),
            PlanError::UnknownDialect { site, dialect } => {
                write!(f, "site {site:?} names unknown dialect {dialect:?}")
            }
            PlanError::ResidencyViolation { dataset, site } => write!(
                f,
                "dataset {dataset:?} may not be moved to or scanned from site {site:?} (allowed_sites)"
            ),
            PlanError::NoFederationSite => f.write_str(
                "no federation-capable site exists; use the hybrid strategy instead",
            ),
            PlanError::NoFeasiblePlan { detail } => {
                write!(f, "no feasible plan: {detail}")
            }
            PlanError::Mismatch { detail } => write!(f, "plan does not match inputs: {detail}"),
        }
    }
}

impl From<IrError> for PlanError {
    fn from(e: IrError) -> Self {
        PlanError::Ir(e)
    }
}
impl From<SchemaError> for PlanError {
    fn from(e: SchemaError) -> Self {
        PlanError::Schema(e)
    }
}
impl From<CostError> for PlanError {
    fn from(e: CostError) -> Self {
        PlanError::Cost(e)
    }
}
impl From<CodegenError> for PlanError {
    fn from(e: CodegenError) -> Self {
        PlanError::Codegen(e)
    }
}

/// True iff pushing down wins the cost comparison: moving the data plus
/// executing remotely costs strictly more than executing locally. An exact
/// tie falls to `NoPushDown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushDecision {
    PushDown,
    NoPushDown,
}

impl fmt::Display for PushDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PushDecision::PushDown => "PushDown",
            PushDecision::NoPushDown => "NoPushDown",
        })
    }
}

pub fn decide_pushdown(cost: &CostEstimate) -> PushDecision {
    if cost.move_cost + cost.exec_remote > cost.exec_local {
        PushDecision::PushDown
    } else {
        PushDecision::NoPushDown
    }
}

/// One line of the hybrid strategy's cost audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLine {
    pub transform_id: String,
    pub cost: CostEstimate,
    pub decision: PushDecision,
    pub chosen_site: String,
}

/// Everything the planners need, computed once per (pipeline, topology).
pub struct PlannerContext<'a> {
    pub pipeline: &'a Pipeline,
    pub topo: &'a Topology,
    pub dialects: &'a BTreeMap<String, DialectSpec>,
    pub schemas: BTreeMap<String, Schema>,
    pub sizes: BTreeMap<String, SizeStats>,
    pub order: Vec<String>,
    pub unreachable: Vec<String>,
    /// Exhaustive search bound for `plan_optimal`; larger pipelines fall back
    /// to the greedy per-step search.
    pub max_exhaustive: usize,
}

impl<'a> PlannerContext<'a> {
    pub fn new(
        pipeline: &'a Pipeline,
        topo: &'a Topology,
        dialects: &'a BTreeMap<String, DialectSpec>,
    ) -> Result<PlannerContext<'a>, PlanError> {
        let check = pipeline.validate()?;
        let schemas = infer_schemas(pipeline)?;
        let sizes = annotate_sizes(pipeline, &schemas, &check.topo_order, &topo.selectivity)?;
        for dataset in &pipeline.datasets {
            if topo.site(&dataset.site).is_none() {
                return Err(PlanError::UnknownSite {
                    id: dataset.site.clone(),
                });
            }
        }
        for site in topo.engine_sites() {
            let dialect = site.dialect.as_deref().unwrap_or_default();
            if !dialects.contains_key(dialect) {
                return Err(PlanError::UnknownDialect {
                    site: site.id.clone(),
                    dialect: dialect.to_string(),
                });
            }
        }
        Ok(PlannerContext {
            pipeline,
            topo,
            dialects,
            schemas,
            sizes,
            order: check.topo_order,
            unreachable: check.unreachable,
            max_exhaustive: 10,
        })
    }

    pub fn plan(&self, strategy: Strategy) -> Result<Plan, PlanError> {
        match strategy {
            Strategy::Centralized => plan_centralized(self),
            Strategy::Localized => plan_localized(self),
            Strategy::Hybrid => plan_hybrid(self),
            Strategy::Federated => plan_federated(self),
            Strategy::Optimal => plan_optimal(self),
        }
    }

    fn transform(&self, id: &str) -> &Transform {
        self.pipeline.transform(id).expect("validated transform id")
    }

    fn size(&self, id: &str) -> SizeStats {
        self.sizes[id]
    }

    /// Site where a node's output lives under `assigned`: the home site for
    /// datasets, the assigned site for transforms.
    fn node_site<'s>(&'s self, id: &str, assigned: &'s BTreeMap<String, String>) -> &'s str {
        match self.pipeline.dataset(id) {
            Some(dataset) => dataset.site.as_str(),
            None => assigned[id].as_str(),
        }
    }

    fn is_engine(&self, site_id: &str) -> bool {
        self.topo
            .site(site_id)
            .is_some_and(|s| s.kind == SiteKind::DatabaseEngine)
    }

    /// Node site looked up against finished plan steps.
    pub(crate) fn node_site_of_plan(&self, id: &str, steps: &[PlanStep]) -> String {
        match self.pipeline.dataset(id) {
            Some(dataset) => dataset.site.clone(),
            None => steps
                .iter()
                .find(|s| s.transform_id == id)
                .expect("validated plan step")
                .assigned_site
                .clone(),
        }
    }

    /// Capability-feasible sites for a transform, ascending by site id:
    /// every engine where it is pushable, plus the central fallback.
    fn candidate_sites(&self, transform: &Transform) -> Vec<&'a Site> {
        let mut out: Vec<&Site> = self
            .topo
            .sites()
            .filter(|site| match site.kind {
                SiteKind::CentralEtl => true,
                SiteKind::DatabaseEngine => is_pushable(transform, site),
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    /// Residency gate: may `site` move in or scan this input?
    fn input_allows_site(&self, input: &str, site: &str) -> bool {
        match self.pipeline.dataset(input) {
            Some(dataset) => dataset.allows_site(site),
            None => true,
        }
    }

    /// Access mode for one input flow under a mode policy.
    fn flow_mode(&self, producer_site: &str, consumer: &Site, policy: ModePolicy) -> AccessMode {
        if producer_site == consumer.id {
            return AccessMode::Local;
        }
        let scan_possible =
            consumer.capabilities.supports_federation && self.is_engine(producer_site);
        match policy {
            ModePolicy::AlwaysMove => AccessMode::Moved,
            ModePolicy::PreferScan => {
                if scan_possible {
                    AccessMode::FederatedScan
                } else {
                    AccessMode::Moved
                }
            }
            ModePolicy::Cheapest => {
                if scan_possible {
                    let egress = self
                        .topo
                        .link(producer_site, &consumer.id)
                        .expect("complete digraph")
                        .egress_rate;
                    // tie prefers the plain move
                    if consumer.federated_scan_rate < egress {
                        AccessMode::FederatedScan
                    } else {
                        AccessMode::Moved
                    }
                } else {
                    AccessMode::Moved
                }
            }
        }
    }
}

/// How a strategy accesses inputs that are not local to the assigned site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModePolicy {
    AlwaysMove,
    PreferScan,
    Cheapest,
}

/// A deduplicated inter-site data flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Flow {
    pub(crate) producer: String,
    pub(crate) from: String,
    pub(crate) to: String,
    pub(crate) mode: AccessMode,
    pub(crate) bytes: u64,
}

static EMPTY_DIALECTS: BTreeMap<String, DialectSpec> = BTreeMap::new();

/// Context without dialect resolution, for cost recomputation and
/// simulation; SQL generation is not possible through it.
pub(crate) fn lite_context<'a>(
    pipeline: &'a Pipeline,
    topo: &'a Topology,
) -> Result<PlannerContext<'a>, PlanError> {
    let check = pipeline.validate()?;
    let schemas = infer_schemas(pipeline)?;
    let sizes = annotate_sizes(pipeline, &schemas, &check.topo_order, &topo.selectivity)?;
    for dataset in &pipeline.datasets {
        if topo.site(&dataset.site).is_none() {
            return Err(PlanError::UnknownSite {
                id: dataset.site.clone(),
            });
        }
    }
    Ok(PlannerContext {
        pipeline,
        topo,
        dialects: &EMPTY_DIALECTS,
        schemas,
        sizes,
        order: check.topo_order,
        unreachable: check.unreachable,
        max_exhaustive: 10,
    })
}

/// Assigns sites and access modes, then derives flows, materialization,
/// cost, SQL, and the finished [`Plan`].
fn build_plan(
    ctx: &PlannerContext<'_>,
    strategy: Strategy,
    assigned: &BTreeMap<String, String>,
    modes: &BTreeMap<String, Vec<AccessMode>>,
) -> Result<Plan, PlanError> {
    let mut flows: BTreeMap<(String, String), Flow> = BTreeMap::new();
    let mut steps = Vec::with_capacity(ctx.order.len());

    for id in &ctx.order {
        let transform = ctx.transform(id);
        let site_id = assigned[id].clone();
        let step_modes = &modes[id];
        let mut access_modes = Vec::with_capacity(transform.inputs.len());

        for (input, mode) in transform.inputs.iter().zip(step_modes) {
            access_modes.push(InputAccess {
                input: input.clone(),
                mode: *mode,
            });
            let producer_site = ctx.node_site(input, assigned).to_string();
            match mode {
                AccessMode::Local => {
                    debug_assert_eq!(producer_site, site_id);
                }
                AccessMode::Moved | AccessMode::FederatedScan => {
                    if !ctx.input_allows_site(input, &site_id) {
                        return Err(PlanError::ResidencyViolation {
                            dataset: input.clone(),
                            site: site_id.clone(),
                        });
                    }
                    let flow = Flow {
                        producer: input.clone(),
                        from: producer_site,
                        to: site_id.clone(),
                        mode: *mode,
                        bytes: ctx.size(input).size_bytes,
                    };
                    let key = (flow.producer.clone(), flow.to.clone());
                    if let Some(existing) = flows.get(&key) {
                        if existing.mode != flow.mode {
                            return Err(PlanError::Mismatch {
                                detail: format!(
                                    "conflicting access modes for {:?} at site {:?}",
                                    key.0, key.1
                                ),
                            });
                        }
                    } else {
                        flows.insert(key, flow);
                    }
                }
            }
        }

        // Materialized iff consumed by a step on a different site or a sink;
        // same-site consumption is pipelined for free.
        let materialized = ctx.pipeline.is_sink(id)
            || ctx
                .pipeline
                .consumers(id)
                .any(|consumer| assigned[&consumer.id] != site_id);

        steps.push(PlanStep {
            transform_id: id.clone(),
            assigned_site: site_id,
            access_modes,
            materialized,
        });
    }

    let exact = exact_cost(ctx, &steps, flows.values());
    let transfer_edges = flows
        .values()
        .map(|flow| TransferEdge {
            from: flow.from.clone(),
            to: flow.to.clone(),
            size_bytes: flow.bytes,
        })
        .collect();

    let sql_per_group = generate_sql(ctx, &steps, &flows)?;

    Ok(Plan {
        strategy,
        steps,
        transfer_edges,
        sql_per_group,
        estimated: exact.to_total_cost(),
    })
}

fn exact_cost<'f>(
    ctx: &PlannerContext<'_>,
    steps: &[PlanStep],
    flows: impl Iterator<Item = &'f Flow>,
) -> ExactCost {
    let mut cost = ExactCost::default();
    for step in steps {
        let site = ctx.topo.site(&step.assigned_site).expect("validated site");
        let transform = ctx.transform(&step.transform_id);
        let input_bytes: u64 = transform
            .inputs
            .iter()
            .map(|input| ctx.size(input).size_bytes)
            .sum();
        cost.compute += charge_exact(site.compute_rate, input_bytes);
        if step.materialized {
            cost.storage += charge_exact(site.storage_rate, ctx.size(&step.transform_id).size_bytes);
        }
    }
    for flow in flows {
        match flow.mode {
            AccessMode::Moved => {
                let link = ctx.topo.link(&flow.from, &flow.to).expect("complete digraph");
                cost.transfer += charge_exact(link.egress_rate, flow.bytes);
            }
            AccessMode::FederatedScan => {
                let site = ctx.topo.site(&flow.to).expect("validated site");
                cost.transfer += charge_exact(site.federated_scan_rate, flow.bytes);
            }
            AccessMode::Local => {}
        }
    }
    cost
}

/// Generates SQL for every pushed subgraph on a database engine site.
fn generate_sql(
    ctx: &PlannerContext<'_>,
    steps: &[PlanStep],
    flows: &BTreeMap<(String, String), Flow>,
) -> Result<Vec<SqlGroup>, PlanError> {
    let groups = pushed_groups(steps, ctx.pipeline, ctx.topo);
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let site = ctx.topo.site(&group.site).expect("validated site");
        let dialect_id = site.dialect.as_deref().expect("engines carry a dialect");
        let dialect = &ctx.dialects[dialect_id];
        let transforms: Vec<&Transform> = group
            .transform_ids
            .iter()
            .map(|id| ctx.transform(id))
            .collect();
        // Remote inputs are those read through federated scans at this site.
        let remote: BTreeMap<String, String> = transforms
            .iter()
            .flat_map(|t| t.inputs.iter())
            .filter_map(|input| {
                flows
                    .get(&(input.clone(), group.site.clone()))
                    .filter(|flow| flow.mode == AccessMode::FederatedScan)
                    .map(|flow| (input.clone(), flow.from.clone()))
            })
            .collect();
        let sql = if remote.is_empty() {
            lower_subgraph(&transforms, &ctx.schemas, dialect)?
        } else {
            lower_federated(&transforms, site, &remote, &ctx.schemas, dialect)?
        };
        out.push(SqlGroup {
            site: group.site,
            dialect: dialect_id.to_string(),
            sql,
        });
    }
    Ok(out)
}

/// Uniform mode vectors for one transform under a policy.
fn policy_modes(
    ctx: &PlannerContext<'_>,
    transform: &Transform,
    site: &Site,
    assigned: &BTreeMap<String, String>,
    policy: ModePolicy,
) -> Vec<AccessMode> {
    transform
        .inputs
        .iter()
        .map(|input| ctx.flow_mode(ctx.node_site(input, assigned), site, policy))
        .collect()
}

/// Baseline plan: every transform runs on the central ETL engine and every
/// source dataset is moved there once.
pub fn plan_centralized(ctx: &PlannerContext<'_>) -> Result<Plan, PlanError> {
    let central = ctx.topo.central();
    let mut assigned = BTreeMap::new();
    let mut modes = BTreeMap::new();
    for id in &ctx.order {
        assigned.insert(id.clone(), central.id.clone());
    }
    for id in &ctx.order {
        let transform = ctx.transform(id);
        modes.insert(
            id.clone(),
            policy_modes(ctx, transform, central, &assigned, ModePolicy::AlwaysMove),
        );
    }
    build_plan(ctx, Strategy::Centralized, &assigned, &modes)
}

/// Site of the largest input (ties to the earliest input), under the current
/// partial assignment.
fn largest_input_site<'c>(
    ctx: &'c PlannerContext<'_>,
    transform: &Transform,
    assigned: &BTreeMap<String, String>,
) -> &'c Site {
    let mut best: Option<(&str, u64)> = None;
    for input in &transform.inputs {
        let bytes = ctx.size(input).size_bytes;
        let site = ctx.node_site(input, assigned);
        match best {
            Some((_, max)) if bytes <= max => {}
            _ => best = Some((site, bytes)),
        }
    }
    let (site_id, _) = best.expect("transforms have inputs");
    ctx.topo.site(site_id).expect("validated site")
}

/// Distinct sites the transform's inputs currently live on.
fn input_sites(
    ctx: &PlannerContext<'_>,
    transform: &Transform,
    assigned: &BTreeMap<String, String>,
) -> BTreeSet<String> {
    transform
        .inputs
        .iter()
        .map(|input| ctx.node_site(input, assigned).to_string())
        .collect()
}

/// Transforms whose inputs sit on one database engine that can run them are
/// pushed there; everything else falls back to the central engine with its
/// inputs moved in. Single-site subgraphs stay pushed end to end.
pub fn plan_localized(ctx: &PlannerContext<'_>) -> Result<Plan, PlanError> {
    let central = ctx.topo.central();
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    let mut modes = BTreeMap::new();
    for id in &ctx.order {
        let transform = ctx.transform(id);
        let sites = input_sites(ctx, transform, &assigned);
        let local_site = if sites.len() == 1 {
            let only = sites.iter().next().expect("non-empty");
            ctx.topo
                .site(only)
                .filter(|site| {
                    site.kind == SiteKind::DatabaseEngine && is_pushable(transform, site)
                })
        } else {
            None
        };
        let site = local_site.unwrap_or(central);
        modes.insert(
            id.clone(),
            policy_modes(ctx, transform, site, &assigned, ModePolicy::AlwaysMove),
        );
        assigned.insert(id.clone(), site.id.clone());
    }
    build_plan(ctx, Strategy::Localized, &assigned, &modes)
}

/// The Eq-style cost triple for one transform: the remote option (move all
/// inputs to central, execute there) against the local option (execute at
/// the largest input's site, moving the other inputs in).
fn pushdown_estimate(
    ctx: &PlannerContext<'_>,
    transform: &Transform,
    local: &Site,
    assigned: &BTreeMap<String, String>,
) -> CostEstimate {
    let central = ctx.topo.central();
    let total_bytes: u64 = transform
        .inputs
        .iter()
        .map(|input| ctx.size(input).size_bytes)
        .sum();
    let mut move_cost = Money::ZERO;
    let mut local_moves = Money::ZERO;
    for input in &transform.inputs {
        let from = ctx.node_site(input, assigned);
        let bytes = ctx.size(input).size_bytes;
        if from != central.id {
            let link = ctx.topo.link(from, &central.id).expect("complete digraph");
            move_cost += charge(link.egress_rate, bytes);
        }
        if from != local.id {
            let link = ctx.topo.link(from, &local.id).expect("complete digraph");
            local_moves += charge(link.egress_rate, bytes);
        }
    }
    CostEstimate::new(
        move_cost,
        charge(central.compute_rate, total_bytes),
        charge(local.compute_rate, total_bytes) + local_moves,
    )
}

fn hybrid_with_trace(
    ctx: &PlannerContext<'_>,
) -> Result<(Vec<DecisionLine>, Plan), PlanError> {
    let central = ctx.topo.central();
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    let mut modes = BTreeMap::new();
    let mut lines = Vec::with_capacity(ctx.order.len());

    for id in &ctx.order {
        let transform = ctx.transform(id);
        let sites = input_sites(ctx, transform, &assigned);
        let single_engine = if sites.len() == 1 {
            let only = sites.iter().next().expect("non-empty");
            ctx.topo
                .site(only)
                .filter(|s| s.kind == SiteKind::DatabaseEngine && is_pushable(transform, s))
        } else {
            None
        };

        let chosen = if let Some(site) = single_engine {
            // independent single-site work stays pushed, like the localized
            // strategy
            site
        } else {
            let local = largest_input_site(ctx, transform, &assigned);
            let local_ok = local.kind == SiteKind::DatabaseEngine
                && is_pushable(transform, local)
                && transform.inputs.iter().all(|input| {
                    ctx.node_site(input, &assigned) == local.id
                        || ctx.input_allows_site(input, &local.id)
                });
            if local_ok {
                let estimate = pushdown_estimate(ctx, transform, local, &assigned);
                match decide_pushdown(&estimate) {
                    PushDecision::PushDown => local,
                    PushDecision::NoPushDown => central,
                }
            } else {
                central
            }
        };

        let local_for_line = if single_engine.is_some() {
            chosen
        } else {
            largest_input_site(ctx, transform, &assigned)
        };
        let estimate = pushdown_estimate(ctx, transform, local_for_line, &assigned);
        lines.push(DecisionLine {
            transform_id: id.clone(),
            cost: estimate,
            decision: if chosen.kind == SiteKind::DatabaseEngine {
                PushDecision::PushDown
            } else {
                PushDecision::NoPushDown
            },
            chosen_site: chosen.id.clone(),
        });

        modes.insert(
            id.clone(),
            policy_modes(ctx, transform, chosen, &assigned, ModePolicy::AlwaysMove),
        );
        assigned.insert(id.clone(), chosen.id.clone());
    }
    let plan = build_plan(ctx, Strategy::Hybrid, &assigned, &modes)?;
    Ok((lines, plan))
}

/// Like [`plan_localized`], but each cross-site or non-pushable transform is
/// individually decided by the push-down rule over its two concrete options:
/// the largest input's site versus the central engine.
pub fn plan_hybrid(ctx: &PlannerContext<'_>) -> Result<Plan, PlanError> {
    hybrid_with_trace(ctx).map(|(_, plan)| plan)
}

/// The hybrid strategy's full decision trace: per transform, the cost triple,
/// the decision, and the chosen site, plus the resulting plan.
pub fn explain_hybrid(
    ctx: &PlannerContext<'_>,
) -> Result<(Vec<DecisionLine>, Plan), PlanError> {
    hybrid_with_trace(ctx)
}

/// Cross-site transforms run on a federation-capable engine, reading remote
/// engine-resident inputs through federated scans without materialized
/// copies; among capable hosts the cheapest step wins, ties to the lowest
/// site id.
pub fn plan_federated(ctx: &PlannerContext<'_>) -> Result<Plan, PlanError> {
    if !ctx.topo.sites().any(|s| s.capabilities.supports_federation) {
        return Err(PlanError::NoFederationSite);
    }
    let central = ctx.topo.central();
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    let mut modes = BTreeMap::new();

    for id in &ctx.order {
        let transform = ctx.transform(id);
        let sites = input_sites(ctx, transform, &assigned);
        let single_engine = if sites.len() == 1 {
            let only = sites.iter().next().expect("non-empty");
            ctx.topo
                .site(only)
                .filter(|s| s.kind == SiteKind::DatabaseEngine && is_pushable(transform, s))
        } else {
            None
        };

        let chosen: &Site = if let Some(site) = single_engine {
            site
        } else if sites.len() >= 2 {
            // candidate hosts: federation-capable engines that can run the
            // transform and may access every input
            let mut best: Option<(u128, &Site)> = None;
            for host in ctx.topo.engine_sites() {
                if !host.capabilities.supports_federation || !is_pushable(transform, host) {
                    continue;
                }
                let feasible = transform.inputs.iter().all(|input| {
                    ctx.node_site(input, &assigned) == host.id
                        || ctx.input_allows_site(input, &host.id)
                });
                if !feasible {
                    continue;
                }
                let mut step_cost = charge_exact(
                    host.compute_rate,
                    transform.inputs.iter().map(|i| ctx.size(i).size_bytes).sum(),
                );
                for input in &transform.inputs {
                    let from = ctx.node_site(input, &assigned);
                    let bytes = ctx.size(input).size_bytes;
                    match ctx.flow_mode(from, host, ModePolicy::PreferScan) {
                        AccessMode::Local => {}
                        AccessMode::FederatedScan => {
                            step_cost += charge_exact(host.federated_scan_rate, bytes);
                        }
                        AccessMode::Moved => {
                            let link = ctx.topo.link(from, &host.id).expect("complete digraph");
                            step_cost += charge_exact(link.egress_rate, bytes);
                        }
                    }
                }
                // ascending site iteration plus strict less keeps the lowest id
                if best.is_none_or(|(cost, _)| step_cost < cost) {
                    best = Some((step_cost, host));
                }
            }
            best.map(|(_, site)| site).unwrap_or(central)
        } else {
            central
        };

        modes.insert(
            id.clone(),
            policy_modes(ctx, transform, chosen, &assigned, ModePolicy::PreferScan),
        );
        assigned.insert(id.clone(), chosen.id.clone());
    }
    build_plan(ctx, Strategy::Federated, &assigned, &modes)
}

/// The minimum-cost feasible plan. Pipelines up to `max_exhaustive`
/// transforms are solved by exhaustive enumeration of per-transform site
/// assignments (each remote input taking the cheaper of a move or a
/// federated scan); larger pipelines use a greedy per-step search. Ties
/// break toward the lexicographically smallest assignment vector in topo
/// order.
pub fn plan_optimal(ctx: &PlannerContext<'_>) -> Result<Plan, PlanError> {
    let assigned = if ctx.order.len() <= ctx.max_exhaustive {
        optimal_exhaustive(ctx)?
    } else {
        optimal_greedy(ctx)?
    };
    let mut modes = BTreeMap::new();
    for id in &ctx.order {
        let transform = ctx.transform(id);
        let site = ctx.topo.site(&assigned[id]).expect("validated site");
        modes.insert(
            id.clone(),
            policy_modes(ctx, transform, site, &assigned, ModePolicy::Cheapest),
        );
    }
    build_plan(ctx, Strategy::Optimal, &assigned, &modes)
}

/// Evaluates one full assignment vector; `None` when residency makes it
/// infeasible.
fn evaluate_assignment(ctx: &PlannerContext<'_>, sites: &[&Site]) -> Option<u128> {
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    for (id, site) in ctx.order.iter().zip(sites) {
        assigned.insert(id.clone(), site.id.clone());
    }
    let mut total: u128 = 0;
    let mut flows: BTreeSet<(String, String)> = BTreeSet::new();
    for (id, site) in ctx.order.iter().zip(sites) {
        let transform = ctx.transform(id);
        let mut input_bytes: u64 = 0;
        for input in &transform.inputs {
            let bytes = ctx.size(input).size_bytes;
            input_bytes += bytes;
            let from = ctx.node_site(input, &assigned);
            if from == site.id {
                continue;
            }
            if !ctx.input_allows_site(input, &site.id) {
                return None;
            }
            if !flows.insert((input.clone(), site.id.clone())) {
                continue; // deduplicated flow, already charged
            }
            match ctx.flow_mode(from, site, ModePolicy::Cheapest) {
                AccessMode::FederatedScan => {
                    total += charge_exact(site.federated_scan_rate, bytes);
                }
                _ => {
                    let link = ctx.topo.link(from, &site.id).expect("complete digraph");
                    total += charge_exact(link.egress_rate, bytes);
                }
            }
        }
        total += charge_exact(site.compute_rate, input_bytes);
        let materialized = ctx.pipeline.is_sink(id)
            || ctx
                .pipeline
                .consumers(id)
                .any(|consumer| assigned[&consumer.id] != site.id);
        if materialized {
            total += charge_exact(site.storage_rate, ctx.size(id).size_bytes);
        }
    }
    Some(total)
}

fn optimal_exhaustive(ctx: &PlannerContext<'_>) -> Result<BTreeMap<String, String>, PlanError> {
    let candidates: Vec<Vec<&Site>> = ctx
        .order
        .iter()
        .map(|id| ctx.candidate_sites(ctx.transform(id)))
        .collect();
    for (id, options) in ctx.order.iter().zip(&candidates) {
        if options.is_empty() {
            return Err(PlanError::NoFeasiblePlan {
                detail: format!("transform {id:?} has no feasible site"),
            });
        }
    }

    let n = ctx.order.len();
    let mut indices = alloc::vec![0usize; n];
    let mut best: Option<(u128, Vec<&Site>)> = None;
    loop {
        let sites: Vec<&Site> = indices
            .iter()
            .zip(&candidates)
            .map(|(&i, options)| options[i])
            .collect();
        if let Some(total) = evaluate_assignment(ctx, &sites) {
            // enumeration is lexicographic over ascending site ids, so strict
            // less keeps the lexicographically smallest argmin
            if best.as_ref().is_none_or(|(cost, _)| total < *cost) {
                best = Some((total, sites));
            }
        }
        // odometer with the most significant digit first
        let mut position = n;
        loop {
            if position == 0 {
                break;
            }
            position -= 1;
            indices[position] += 1;
            if indices[position] < candidates[position].len() {
                break;
            }
            indices[position] = 0;
            if position == 0 {
                break;
            }
        }
        if indices.iter().all(|&i| i == 0) {
            break;
        }
    }
    let (_, sites) = best.ok_or_else(|| PlanError::NoFeasiblePlan {
        detail: "residency constraints exclude every assignment".to_string(),
    })?;
    Ok(ctx
        .order
        .iter()
        .cloned()
        .zip(sites.iter().map(|s| s.id.clone()))
        .collect())
}

/// Greedy fallback above the exhaustive bound: in topo order, each step takes
/// the feasible site with the lowest local cost (execution plus its own new
/// flows), ties to the lowest site id.
fn optimal_greedy(ctx: &PlannerContext<'_>) -> Result<BTreeMap<String, String>, PlanError> {
    let mut assigned: BTreeMap<String, String> = BTreeMap::new();
    let mut flows: BTreeSet<(String, String)> = BTreeSet::new();
    for id in &ctx.order {
        let transform = ctx.transform(id);
        let mut best: Option<(u128, &Site)> = None;
        for site in ctx.candidate_sites(transform) {
            let feasible = transform.inputs.iter().all(|input| {
                ctx.node_site(input, &assigned) == site.id
                    || ctx.input_allows_site(input, &site.id)
            });
            if !feasible {
                continue;
            }
            let mut cost = charge_exact(
                site.compute_rate,
                transform.inputs.iter().map(|i| ctx.size(i).size_bytes).sum(),
            );
            for input in &transform.inputs {
                let from = ctx.node_site(input, &assigned);
                if from == site.id || flows.contains(&(input.clone(), site.id.clone())) {
                    continue;
                }
                let bytes = ctx.size(input).size_bytes;
                match ctx.flow_mode(from, site, ModePolicy::Cheapest) {
                    AccessMode::FederatedScan => {
                        cost += charge_exact(site.federated_scan_rate, bytes);
                    }
                    _ => {
                        let link = ctx.topo.link(from, &site.id).expect("complete digraph");
                        cost += charge_exact(link.egress_rate, bytes);
                    }
                }
            }
            if best.is_none_or(|(existing, _)| cost < existing) {
                best = Some((cost, site));
            }
        }
        let (_, site) = best.ok_or_else(|| PlanError::NoFeasiblePlan {
            detail: format!("transform {id:?} has no feasible site"),
        })?;
        for input in &transform.inputs {
            if ctx.node_site(input, &assigned) != site.id {
                flows.insert((input.clone(), site.id.clone()));
            }
        }
        assigned.insert(id.clone(), site.id.clone());
    }
    Ok(assigned)
}

/// Recomputes a plan's total cost from first principles. This realizes the
/// co-location cost aggregation: compute plus storage plus transfer.
pub fn total_cost(plan: &Plan, pipeline: &Pipeline, topo: &Topology) -> Result<TotalCost, PlanError> {
    let ctx = lite_context(pipeline, topo)?;
    let flows = derive_flows(&ctx, &plan.steps)?;
    Ok(exact_cost(&ctx, &plan.steps, flows.values()).to_total_cost())
}

/// Rebuilds the deduplicated flow set implied by a plan's steps.
pub(crate) fn derive_flows(
    ctx: &PlannerContext<'_>,
    steps: &[PlanStep],
) -> Result<BTreeMap<(String, String), Flow>, PlanError> {
    let assigned: BTreeMap<String, String> = steps
        .iter()
        .map(|s| (s.transform_id.clone(), s.assigned_site.clone()))
        .collect();
    let mut flows = BTreeMap::new();
    for step in steps {
        for access in &step.access_modes {
            if access.mode == AccessMode::Local {
                continue;
            }
            let from = ctx.node_site(&access.input, &assigned).to_string();
            let key = (access.input.clone(), step.assigned_site.clone());
            let flow = Flow {
                producer: access.input.clone(),
                from,
                to: step.assigned_site.clone(),
                mode: access.mode,
                bytes: ctx.size(&access.input).size_bytes,
            };
            if let Some(existing) = flows.get(&key) {
                if *existing != flow {
                    return Err(PlanError::Mismatch {
                        detail: format!(
                            "steps disagree on the flow of {:?} into {:?}",
                            key.0, key.1
                        ),
                    });
                }
            } else {
                flows.insert(key, flow);
            }
        }
    }
    Ok(flows)
}

/// Structural and accounting checks over a produced plan: one step per
/// transform in topo order, valid sites and pushability, access-mode
/// consistency, residency, the transfer-edge accounting identity, the
/// materialization rule, and the estimated-cost identity.
pub fn validate_plan(
    plan: &Plan,
    pipeline: &Pipeline,
    topo: &Topology,
) -> Result<(), PlanError> {
    let ctx = lite_context(pipeline, topo)?;

    if plan.steps.len() != ctx.order.len() {
        return Err(PlanError::Mismatch {
            detail: format!(
                "plan has {} steps for {} transforms",
                plan.steps.len(),
                ctx.order.len()
            ),
        });
    }
    let assigned: BTreeMap<String, String> = plan
        .steps
        .iter()
        .map(|s| (s.transform_id.clone(), s.assigned_site.clone()))
        .collect();
    for (step, expected_id) in plan.steps.iter().zip(&ctx.order) {
        if &step.transform_id != expected_id {
            return Err(PlanError::Mismatch {
                detail: format!(
                    "steps out of topo order: found {:?}, expected {:?}",
                    step.transform_id, expected_id
                ),
            });
        }
        let site = ctx
            .topo
            .site(&step.assigned_site)
            .ok_or_else(|| PlanError::UnknownSite {
                id: step.assigned_site.clone(),
            })?;
        let transform = ctx.transform(&step.transform_id);
        if site.kind == SiteKind::DatabaseEngine && !is_pushable(transform, site) {
            return Err(PlanError::Mismatch {
                detail: format!(
                    "transform {:?} is not pushable at site {:?}",
                    step.transform_id, site.id
                ),
            });
        }
        if step.access_modes.len() != transform.inputs.len() {
            return Err(PlanError::Mismatch {
                detail: format!("step {:?} has the wrong access-mode count", step.transform_id),
            });
        }
        for (access, input) in step.access_modes.iter().zip(&transform.inputs) {
            if &access.input != input {
                return Err(PlanError::Mismatch {
                    detail: format!(
                        "step {:?} access modes are not aligned with inputs",
                        step.transform_id
                    ),
                });
            }
            let from = ctx.node_site(input, &assigned);
            match access.mode {
                AccessMode::Local => {
                    if from != step.assigned_site {
                        return Err(PlanError::Mismatch {
                            detail: format!(
                                "step {:?} marks remote input {input:?} as local",
                                step.transform_id
                            ),
                        });
                    }
                }
                AccessMode::Moved | AccessMode::FederatedScan => {
                    if from == step.assigned_site {
                        return Err(PlanError::Mismatch {
                            detail: format!(
                                "step {:?} marks local input {input:?} as remote",
                                step.transform_id
                            ),
                        });
                    }
                    if !ctx.input_allows_site(input, &step.assigned_site) {
                        return Err(PlanError::ResidencyViolation {
                            dataset: input.clone(),
                            site: step.assigned_site.clone(),
                        });
                    }
                    if access.mode == AccessMode::FederatedScan
                        && (!site.capabilities.supports_federation || !ctx.is_engine(from))
                    {
                        return Err(PlanError::Mismatch {
                            detail: format!(
                                "step {:?} scans {input:?} without federation support",
                                step.transform_id
                            ),
                        });
                    }
                }
            }
        }
        let expected_materialized = ctx.pipeline.is_sink(&step.transform_id)
            || ctx
                .pipeline
                .consumers(&step.transform_id)
                .any(|consumer| assigned[&consumer.id] != step.assigned_site);
        if step.materialized != expected_materialized {
            return Err(PlanError::Mismatch {
                detail: format!(
                    "step {:?} materialization flag should be {expected_materialized}",
                    step.transform_id
                ),
            });
        }
    }

    let flows = derive_flows(&ctx, &plan.steps)?;
    let mut expected_edges: Vec<TransferEdge> = flows
        .values()
        .map(|flow| TransferEdge {
            from: flow.from.clone(),
            to: flow.to.clone(),
            size_bytes: flow.bytes,
        })
        .collect();
    let mut actual_edges = plan.transfer_edges.clone();
    let edge_key = |e: &TransferEdge| (e.from.clone(), e.to.clone(), e.size_bytes);
    expected_edges.sort_by_key(edge_key);
    actual_edges.sort_by_key(edge_key);
    if expected_edges != actual_edges {
        return Err(PlanError::Mismatch {
            detail: "transfer edges do not match the flows implied by the steps".to_string(),
        });
    }

    let recomputed = exact_cost(&ctx, &plan.steps, flows.values()).to_total_cost();
    if recomputed != plan.estimated {
        return Err(PlanError::Mismatch {
            detail: format!(
                "estimated cost {} does not match recomputed {}",
                plan.estimated.total, recomputed.total
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SelectivityConfig;
    use crate::ir::{ColumnDef, Dataset, ScalarType, TransformKind, TransformParams};
    use crate::topology::{CapabilityProfile, Link};
    use alloc::vec;

    fn decide(move_cost: i64, remote: i64, local: i64) -> PushDecision {
        decide_pushdown(&CostEstimate::new(
            Money::from_micros(move_cost),
            Money::from_micros(remote),
            Money::from_micros(local),
        ))
    }

    #[test]
    fn pushdown_rule_matches_the_inequality() {
        // 10 + 5 > 8
        assert_eq!(decide(10, 5, 8), PushDecision::PushDown);
        // 5 + 3 > 10 is false
        assert_eq!(decide(5, 3, 10), PushDecision::NoPushDown);
        // exact tie falls to the otherwise branch
        assert_eq!(decide(4, 4, 8), PushDecision::NoPushDown);
    }

    fn site(id: &str, kind: SiteKind, fed: bool, compute: &str, storage: &str, scan: &str) -> Site {
        Site {
            id: id.to_string(),
            provider_label: "p".to_string(),
            kind,
            dialect: match kind {
                SiteKind::DatabaseEngine => Some("identity".to_string()),
                SiteKind::CentralEtl => None,
            },
            capabilities: CapabilityProfile::universal(fed),
            compute_rate: Money::parse(compute).unwrap(),
            compute_throughput: 1.0,
            storage_rate: Money::parse(storage).unwrap(),
            federated_scan_rate: Money::parse(scan).unwrap(),
        }
    }

    fn link(src: &str, dst: &str, egress: &str) -> Link {
        Link {
            src: src.to_string(),
            dst: dst.to_string(),
            egress_rate: Money::parse(egress).unwrap(),
            bandwidth: 1.0,
            latency: 0.0,
        }
    }

    fn micro_topology() -> Topology {
        Topology::new(
            vec![
                site("a", SiteKind::DatabaseEngine, false, "0.04", "0.01", "0"),
                site("b", SiteKind::DatabaseEngine, true, "0.03", "0.01", "0.02"),
                site("central", SiteKind::CentralEtl, false, "0.1", "0.02", "0"),
            ],
            vec![
                link("a", "b", "0.05"),
                link("b", "a", "0.05"),
                link("a", "central", "0.06"),
                link("b", "central", "0.06"),
                link("central", "a", "0.01"),
                link("central", "b", "0.01"),
            ],
            SelectivityConfig::default(),
        )
        .unwrap()
    }

    fn micro_pipeline() -> Pipeline {
        Pipeline {
            datasets: vec![
                Dataset {
                    id: "users".to_string(),
                    site: "a".to_string(),
                    columns: vec![
                        ColumnDef { name: "uid".to_string(), ty: ScalarType::Int64 },
                        ColumnDef { name: "name".to_string(), ty: ScalarType::String },
                        ColumnDef { name: "age".to_string(), ty: ScalarType::Int64 },
                    ],
                    size_bytes: 10_000_000_000,
                    row_count: 100_000_000,
                    allowed_sites: None,
                },
                Dataset {
                    id: "sales".to_string(),
                    site: "b".to_string(),
                    columns: vec![
                        ColumnDef { name: "uid".to_string(), ty: ScalarType::Int64 },
                        ColumnDef { name: "amount".to_string(), ty: ScalarType::Float64 },
                        ColumnDef { name: "region".to_string(), ty: ScalarType::String },
                    ],
                    size_bytes: 40_000_000_000,
                    row_count: 400_000_000,
                    allowed_sites: None,
                },
            ],
            transforms: vec![
                Transform {
                    id: "m_adults".to_string(),
                    kind: TransformKind::Filter,
                    inputs: vec!["users".to_string()],
                    params: TransformParams {
                        predicate: Some("age >= 21".to_string()),
                        selectivity: Some(0.5),
                        ..TransformParams::default()
                    },
                },
                Transform {
                    id: "m_join".to_string(),
                    kind: TransformKind::Join,
                    inputs: vec!["m_adults".to_string(), "sales".to_string()],
                    params: TransformParams {
                        join_type: Some(crate::ir::JoinType::Inner),
                        join_on: Some(vec!["m_adults.uid = sales.uid".to_string()]),
                        ..TransformParams::default()
                    },
                },
                Transform {
                    id: "m_totals".to_string(),
                    kind: TransformKind::Aggregate,
                    inputs: vec!["m_join".to_string()],
                    params: TransformParams {
                        group_keys: Some(vec!["region".to_string()]),
                        aggregates: Some(vec!["SUM(amount) AS revenue".to_string()]),
                        selectivity: Some(0.05),
                        ..TransformParams::default()
                    },
                },
            ],
            sinks: vec!["m_totals".to_string()],
        }
    }

    fn identity_dialects() -> BTreeMap<String, DialectSpec> {
        let mut map = BTreeMap::new();
        map.insert("identity".to_string(), DialectSpec::identity("identity"));
        map
    }

    #[test]
    fn centralized_moves_every_source_once() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let plan = plan_centralized(&ctx).unwrap();
        assert!(plan.steps.iter().all(|s| s.assigned_site == "central"));
        assert_eq!(plan.transfer_edges.len(), 2);
        validate_plan(&plan, &pipeline, &topo).unwrap();
        // users 10 GB at 0.06 + sales 40 GB at 0.06
        assert_eq!(plan.estimated.transfer, Money::parse("3").unwrap());
        // all execution on central at 0.1/GB over 10 + 45 + 40 GB of input
        assert_eq!(plan.estimated.compute, Money::parse("9.5").unwrap());
        // only the sink materializes: 2 GB at 0.02
        assert_eq!(plan.estimated.storage, Money::parse("0.04").unwrap());
        assert_eq!(plan.estimated.total, Money::parse("12.54").unwrap());
    }

    #[test]
    fn localized_pushes_single_site_work_and_falls_back_to_central() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let plan = plan_localized(&ctx).unwrap();
        let by_id: BTreeMap<&str, &str> = plan
            .steps
            .iter()
            .map(|s| (s.transform_id.as_str(), s.assigned_site.as_str()))
            .collect();
        assert_eq!(by_id["m_adults"], "a");
        assert_eq!(by_id["m_join"], "central");
        assert_eq!(by_id["m_totals"], "central");
        validate_plan(&plan, &pipeline, &topo).unwrap();
        assert_eq!(plan.estimated.total, Money::parse("11.69").unwrap());
    }

    #[test]
    fn hybrid_beats_localized_on_the_cross_site_join() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let plan = plan_hybrid(&ctx).unwrap();
        let by_id: BTreeMap<&str, &str> = plan
            .steps
            .iter()
            .map(|s| (s.transform_id.as_str(), s.assigned_site.as_str()))
            .collect();
        // moving the 5 GB filtered side to b beats hauling both to central
        assert_eq!(by_id["m_join"], "b");
        assert_eq!(by_id["m_totals"], "b");
        validate_plan(&plan, &pipeline, &topo).unwrap();
        assert_eq!(plan.estimated.total, Money::parse("3.27").unwrap());
    }

    #[test]
    fn federated_scans_instead_of_moving() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let plan = plan_federated(&ctx).unwrap();
        let join_step = plan
            .steps
            .iter()
            .find(|s| s.transform_id == "m_join")
            .unwrap();
        assert_eq!(join_step.assigned_site, "b");
        assert_eq!(join_step.access_modes[0].mode, AccessMode::FederatedScan);
        validate_plan(&plan, &pipeline, &topo).unwrap();
        assert_eq!(plan.estimated.total, Money::parse("3.12").unwrap());
    }

    #[test]
    fn optimal_matches_the_hand_computed_micro_plan() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let plan = plan_optimal(&ctx).unwrap();
        validate_plan(&plan, &pipeline, &topo).unwrap();
        // evaluated term by term by hand: compute 0.40 + 1.35 + 1.20,
        // transfer one 5 GB scan at 0.02, storage 0.05 + 0.02
        assert_eq!(plan.estimated.compute, Money::parse("2.95").unwrap());
        assert_eq!(plan.estimated.transfer, Money::parse("0.1").unwrap());
        assert_eq!(plan.estimated.storage, Money::parse("0.07").unwrap());
        assert_eq!(plan.estimated.total, Money::parse("3.12").unwrap());
    }

    #[test]
    fn optimal_never_loses_to_the_named_strategies() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let optimal = plan_optimal(&ctx).unwrap().estimated.total;
        for strategy in [
            Strategy::Centralized,
            Strategy::Localized,
            Strategy::Hybrid,
            Strategy::Federated,
        ] {
            let plan = ctx.plan(strategy).unwrap();
            assert!(optimal <= plan.estimated.total, "{strategy} beat optimal");
        }
    }

    #[test]
    fn residency_blocks_the_centralized_baseline() {
        let mut pipeline = micro_pipeline();
        pipeline.datasets[0].allowed_sites =
            Some(BTreeSet::from(["a".to_string(), "b".to_string()]));
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        assert!(matches!(
            plan_centralized(&ctx),
            Err(PlanError::ResidencyViolation { .. })
        ));
        // the optimal planner routes around the residency constraint
        let plan = plan_optimal(&ctx).unwrap();
        validate_plan(&plan, &pipeline, &topo).unwrap();
    }

    #[test]
    fn federated_requires_a_capable_site() {
        let pipeline = micro_pipeline();
        let topo = Topology::new(
            vec![
                site("a", SiteKind::DatabaseEngine, false, "0.04", "0.01", "0"),
                site("b", SiteKind::DatabaseEngine, false, "0.03", "0.01", "0"),
                site("central", SiteKind::CentralEtl, false, "0.1", "0.02", "0"),
            ],
            vec![
                link("a", "b", "0.05"),
                link("b", "a", "0.05"),
                link("a", "central", "0.06"),
                link("b", "central", "0.06"),
                link("central", "a", "0.01"),
                link("central", "b", "0.01"),
            ],
            SelectivityConfig::default(),
        )
        .unwrap();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        assert!(matches!(
            plan_federated(&ctx),
            Err(PlanError::NoFederationSite)
        ));
    }

    #[test]
    fn explain_lines_cover_every_transform_and_resum() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        let (lines, plan) = explain_hybrid(&ctx).unwrap();
        assert_eq!(lines.len(), 3);
        // the chosen side of each decision re-sums to compute + transfer
        let chosen_total: Money = lines
            .iter()
            .map(|line| match line.decision {
                PushDecision::PushDown => line.cost.exec_local,
                PushDecision::NoPushDown => line.cost.move_cost + line.cost.exec_remote,
            })
            .sum();
        assert_eq!(chosen_total, plan.estimated.compute + plan.estimated.transfer);
    }

    #[test]
    fn plans_are_deterministic() {
        let pipeline = micro_pipeline();
        let topo = micro_topology();
        let dialects = identity_dialects();
        let ctx = PlannerContext::new(&pipeline, &topo, &dialects).unwrap();
        for strategy in [
            Strategy::Centralized,
            Strategy::Localized,
            Strategy::Hybrid,
            Strategy::Federated,
            Strategy::Optimal,
        ] {
            let a = ctx.plan(strategy).unwrap();
            let b = ctx.plan(strategy).unwrap();
            assert_eq!(a, b);
        }
    }
}
