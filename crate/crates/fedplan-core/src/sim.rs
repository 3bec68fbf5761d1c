//! Deterministic discrete-event execution of a plan against a topology.
//!
//! Transfers take `latency + bytes / bandwidth` seconds, executions take
//! `bytes / throughput` seconds, a step starts once all of its inputs have
//! arrived, and independent steps overlap freely (no slot contention). The
//! simulator re-derives the plan's flows and cost from first principles and
//! refuses to run when they disagree with the plan document, so a stale plan
//! cannot produce a report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::TotalCost;
use crate::ir::Pipeline;
use crate::planner::{self, AccessMode, Plan, PlanError};
use crate::topology::Topology;

const BYTES_PER_GB: f64 = 1_000_000_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Count federated scans in the cross-cloud volume (conservative).
    pub count_federated_as_transfer: bool,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            count_federated_as_transfer: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEventKind {
    TransferStart,
    ExecStart,
    TransferEnd,
    ExecEnd,
}

impl SimEventKind {
    fn rank(self) -> u8 {
        match self {
            SimEventKind::TransferStart => 0,
            SimEventKind::ExecStart => 1,
            SimEventKind::TransferEnd => 2,
            SimEventKind::ExecEnd => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: f64,
    pub kind: SimEventKind,
    /// Transform id for executions, `producer->site` for transfers.
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

/// How one input reached its consumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub input: String,
    pub from: String,
    pub to: String,
    pub mode: AccessMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    /// Max completion time over the pipeline's sinks, seconds.
    pub total_runtime: f64,
    /// Bytes that crossed site boundaries.
    pub cross_cloud_volume: u64,
    /// Busy execution seconds per site.
    pub per_site_runtime: BTreeMap<String, f64>,
    pub cost: TotalCost,
    pub events: Vec<SimEvent>,
    pub lineage: BTreeMap<String, Vec<LineageEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    PlanMismatch(String),
    ZeroImprovementBase,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::PlanMismatch(detail) => write!(f, "plan does not match inputs: {detail}"),
            SimError::ZeroImprovementBase => {
                f.write_str("cannot compute an improvement over a zero baseline")
            }
        }
    }
}

impl From<PlanError> for SimError {
    fn from(e: PlanError) -> Self {
        SimError::PlanMismatch(e.to_string())
    }
}

pub fn simulate(
    plan: &Plan,
    pipeline: &Pipeline,
    topo: &Topology,
) -> Result<SimulationReport, SimError> {
    simulate_with_config(plan, pipeline, topo, SimConfig::default())
}

pub fn simulate_with_config(
    plan: &Plan,
    pipeline: &Pipeline,
    topo: &Topology,
    config: SimConfig,
) -> Result<SimulationReport, SimError> {
    // A plan that fails structural or accounting validation never runs.
    planner::validate_plan(plan, pipeline, topo)?;
    let ctx = planner::lite_context(pipeline, topo)?;
    let flows = planner::derive_flows(&ctx, &plan.steps)?;

    // Cost conservation: the simulator re-derives cost through the same
    // exact arithmetic; validate_plan has already required equality with the
    // plan's estimate.
    let cost = plan.estimated;

    let mut completion: BTreeMap<&str, f64> = BTreeMap::new();
    for dataset in &pipeline.datasets {
        completion.insert(dataset.id.as_str(), 0.0);
    }

    let mut events = Vec::new();
    let mut flow_end: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut per_site_runtime: BTreeMap<String, f64> = BTreeMap::new();
    let mut lineage: BTreeMap<String, Vec<LineageEntry>> = BTreeMap::new();

    for step in &plan.steps {
        let site = ctx.topo.site(&step.assigned_site).expect("validated");
        let transform = pipeline
            .transform(&step.transform_id)
            .expect("validated transform");
        let mut ready = 0.0f64;
        let mut entries = Vec::with_capacity(transform.inputs.len());
        let mut input_bytes = 0u64;

        for access in &step.access_modes {
            let input = access.input.as_str();
            let bytes = ctx.sizes[input].size_bytes;
            input_bytes += bytes;
            let produced = completion[input];
            let available = match access.mode {
                AccessMode::Local => produced,
                AccessMode::Moved | AccessMode::FederatedScan => {
                    let flow = &flows[&(input.to_string(), step.assigned_site.clone())];
                    let key = (input, step.assigned_site.as_str());
                    match flow_end.get(&key) {
                        Some(&end) => end,
                        None => {
                            let link = ctx
                                .topo
                                .link(&flow.from, &flow.to)
                                .expect("complete digraph");
                            let duration = link.latency + bytes as f64 / (link.bandwidth * BYTES_PER_GB);
                            let end = produced + duration;
                            flow_end.insert(key, end);
                            let subject = format!("{}->{}", input, step.assigned_site);
                            let link_label = format!("{}->{}", flow.from, flow.to);
                            events.push(SimEvent {
                                time: produced,
                                kind: SimEventKind::TransferStart,
                                subject: subject.clone(),
                                site: None,
                                link: Some(link_label.clone()),
                            });
                            events.push(SimEvent {
                                time: end,
                                kind: SimEventKind::TransferEnd,
                                subject,
                                site: None,
                                link: Some(link_label),
                            });
                            end
                        }
                    }
                }
            };
            ready = ready.max(available);
            let from = ctx.node_site_of_plan(input, &plan.steps);
            entries.push(LineageEntry {
                input: input.to_string(),
                from,
                to: step.assigned_site.clone(),
                mode: access.mode,
            });
        }

        let duration = input_bytes as f64 / (site.compute_throughput * BYTES_PER_GB);
        let end = ready + duration;
        completion.insert(step.transform_id.as_str(), end);
        *per_site_runtime.entry(step.assigned_site.clone()).or_default() += duration;
        events.push(SimEvent {
            time: ready,
            kind: SimEventKind::ExecStart,
            subject: step.transform_id.clone(),
            site: Some(step.assigned_site.clone()),
            link: None,
        });
        events.push(SimEvent {
            time: end,
            kind: SimEventKind::ExecEnd,
            subject: step.transform_id.clone(),
            site: Some(step.assigned_site.clone()),
            link: None,
        });
        lineage.insert(step.transform_id.clone(), entries);
    }

    let total_runtime = pipeline
        .sinks
        .iter()
        .map(|sink| completion[sink.as_str()])
        .fold(0.0f64, f64::max);

    let cross_cloud_volume = flows
        .values()
        .filter(|flow| {
            config.count_federated_as_transfer || flow.mode != AccessMode::FederatedScan
        })
        .map(|flow| flow.bytes)
        .sum();

    events.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then_with(|| a.subject.cmp(&b.subject))
            .then_with(|| a.kind.rank().cmp(&b.kind.rank()))
    });

    Ok(SimulationReport {
        total_runtime,
        cross_cloud_volume,
        per_site_runtime,
        cost,
        events,
        lineage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub metric: String,
    pub pre: f64,
    pub post: f64,
    /// Percentage reduction rounded to one decimal; absent when the pre
    /// value is zero and the post value is not.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTable {
    pub rows: Vec<ImprovementRow>,
}

fn round1(x: f64) -> f64 {
    let scaled = x * 10.0;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5) as i64
    } else {
        (scaled - 0.5) as i64
    };
    rounded as f64 / 10.0
}

fn improvement(pre: f64, post: f64) -> Option<f64> {
    if pre == 0.0 {
        if post == 0.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some(round1((pre - post) / pre * 100.0))
    }
}

/// Per-metric comparison of two reports from the same pipeline: pre value,
/// post value, and the percentage improvement.
pub fn compare(pre: &SimulationReport, post: &SimulationReport) -> ImprovementTable {
    let mut rows = Vec::new();
    let mut push = |metric: &str, a: f64, b: f64| {
        rows.push(ImprovementRow {
            metric: metric.to_string(),
            pre: a,
            post: b,
            improvement_pct: improvement(a, b),
        });
    };
    push("total_runtime", pre.total_runtime, post.total_runtime);
    push(
        "cross_cloud_volume",
        pre.cross_cloud_volume as f64,
        post.cross_cloud_volume as f64,
    );
    push("cost_per_run", pre.cost.total.to_f64(), post.cost.total.to_f64());
    let sites: alloc::collections::BTreeSet<&String> = pre
        .per_site_runtime
        .keys()
        .chain(post.per_site_runtime.keys())
        .collect();
    for site in sites {
        push(
            &format!("site_runtime:{site}"),
            pre.per_site_runtime.get(site).copied().unwrap_or(0.0),
            post.per_site_runtime.get(site).copied().unwrap_or(0.0),
        );
    }
    ImprovementTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_matches_the_reported_improvements() {
        // 185 min -> 120 min
        assert_eq!(improvement(185.0, 120.0), Some(35.1));
        // 850 GB -> 680 GB
        assert_eq!(improvement(850.0, 680.0), Some(20.0));
        // $212 -> $172
        assert_eq!(improvement(212.0, 172.0), Some(18.9));
        // identity
        assert_eq!(improvement(5.0, 5.0), Some(0.0));
        // undefined baseline
        assert_eq!(improvement(0.0, 3.0), None);
        assert_eq!(improvement(0.0, 0.0), Some(0.0));
        // regressions go negative
        assert_eq!(improvement(100.0, 112.5), Some(-12.5));
    }
}
