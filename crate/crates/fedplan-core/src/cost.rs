//! Volume estimation through the DAG and the money cost primitives.
//!
//! Data volumes flow through the pipeline under a configurable selectivity
//! model; all scaling is exact fixed-point arithmetic (micro factors, ceiling
//! rounding) so annotations are bit-for-bit reproducible. Costs are
//! rate-times-gigabytes products; exact numerators are kept alongside the
//! floored money values so plan comparisons are never decided by rounding.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{Pipeline, Transform, TransformKind};
use crate::money::{self, Money};
use crate::schema::Schema;
use crate::topology::{Site, Topology};

/// Estimated size of one node's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStats {
    pub size_bytes: u64,
    pub row_count: u64,
}

impl SizeStats {
    pub fn new(size_bytes: u64, row_count: u64) -> SizeStats {
        debug_assert!((size_bytes == 0) == (row_count == 0));
        SizeStats { size_bytes, row_count }
    }
}

/// Non-negative fixed-point scale factor with six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Factor(u64);

impl Factor {
    pub const ONE: Factor = Factor(1_000_000);

    pub const fn from_micros(micros: u64) -> Factor {
        Factor(micros)
    }

    pub fn from_f64(value: f64) -> Result<Factor, CostError> {
        if !value.is_finite() || value < 0.0 {
            return Err(CostError::BadSelectivity(format!(
                "selectivity {value} must be finite and non-negative"
            )));
        }
        // round half up; `f64::round` needs std
        Ok(Factor((value * 1_000_000.0 + 0.5) as u64))
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    /// `ceil(value * factor)` in exact integer arithmetic. Ceiling keeps the
    /// zero-size/zero-rows invariant: positive inputs scaled by a positive
    /// factor stay positive.
    pub fn scale(self, value: u64) -> u64 {
        ceil_div(value as u128 * self.0 as u128, 1_000_000)
    }
}

fn ceil_div(numerator: u128, denominator: u128) -> u64 {
    ((numerator + denominator - 1) / denominator) as u64
}

/// `ceil(value * numerator / denominator)` for column-fraction scaling.
fn scale_fraction(value: u64, numerator: u64, denominator: u64) -> u64 {
    debug_assert!(denominator > 0);
    ceil_div(value as u128 * numerator as u128, denominator as u128)
}

/// Default size factors per transform kind; a transform may override its own
/// factor via `params.selectivity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectivityConfig {
    pub filter_selectivity: Factor,
    pub aggregate_reduction: Factor,
    pub join_fanout: Factor,
    pub jsonparse_expansion: Factor,
}

impl Default for SelectivityConfig {
    fn default() -> SelectivityConfig {
        SelectivityConfig {
            filter_selectivity: Factor::from_micros(100_000),   // 0.1
            aggregate_reduction: Factor::from_micros(50_000),   // 0.05
            join_fanout: Factor::ONE,                           // 1.0
            jsonparse_expansion: Factor::from_micros(1_200_000), // 1.2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    BadSelectivity(String),
    MissingAnnotation(String),
    UnknownSite(String),
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::BadSelectivity(detail) => f.write_str(detail),
            CostError::MissingAnnotation(id) => {
                write!(f, "no size annotation for node {id:?}")
            }
            CostError::UnknownSite(id) => write!(f, "unknown site {id:?}"),
        }
    }
}

/// Estimates a transform's output size from its input sizes.
///
/// `input_widths` carries the column count of each input schema; only
/// Project uses it (uniform column width assumed).
pub fn estimate_output_size(
    transform: &Transform,
    inputs: &[SizeStats],
    input_widths: &[usize],
    config: &SelectivityConfig,
) -> Result<SizeStats, CostError> {
    debug_assert_eq!(inputs.len(), input_widths.len());
    let override_factor = transform
        .params
        .selectivity
        .map(Factor::from_f64)
        .transpose()?;
    let first = inputs[0];
    let stats = match transform.kind {
        TransformKind::Filter => {
            let f = override_factor.unwrap_or(config.filter_selectivity);
            SizeStats::new(f.scale(first.size_bytes), f.scale(first.row_count))
        }
        TransformKind::Project => {
            let retained = transform
                .params
                .columns
                .as_deref()
                .map_or(0, <[String]>::len) as u64;
            let total = input_widths[0] as u64;
            SizeStats::new(
                scale_fraction(first.size_bytes, retained, total.max(1)),
                first.row_count,
            )
        }
        TransformKind::Aggregate => {
            let f = override_factor.unwrap_or(config.aggregate_reduction);
            SizeStats::new(f.scale(first.size_bytes), f.scale(first.row_count))
        }
        TransformKind::Join => {
            let f = override_factor.unwrap_or(config.join_fanout);
            let max_bytes = inputs.iter().map(|s| s.size_bytes).max().unwrap_or(0);
            let max_rows = inputs.iter().map(|s| s.row_count).max().unwrap_or(0);
            SizeStats::new(f.scale(max_bytes), f.scale(max_rows))
        }
        TransformKind::Union => SizeStats::new(
            inputs.iter().map(|s| s.size_bytes).sum(),
            inputs.iter().map(|s| s.row_count).sum(),
        ),
        TransformKind::JsonParse => {
            let f = override_factor.unwrap_or(config.jsonparse_expansion);
            SizeStats::new(f.scale(first.size_bytes), first.row_count)
        }
        // Window, Expression, and Recursive keep their input volume unless
        // overridden.
        TransformKind::Window | TransformKind::Expression | TransformKind::Recursive => {
            let f = override_factor.unwrap_or(Factor::ONE);
            SizeStats::new(f.scale(first.size_bytes), f.scale(first.row_count))
        }
    };
    Ok(stats)
}

/// Annotates every node (datasets included) with its output size.
pub fn annotate_sizes(
    pipeline: &Pipeline,
    schemas: &BTreeMap<String, Schema>,
    order: &[String],
    config: &SelectivityConfig,
) -> Result<BTreeMap<String, SizeStats>, CostError> {
    let mut sizes: BTreeMap<String, SizeStats> = BTreeMap::new();
    for dataset in &pipeline.datasets {
        sizes.insert(
            dataset.id.clone(),
            SizeStats::new(dataset.size_bytes, dataset.row_count),
        );
    }
    for id in order {
        let transform = pipeline.transform(id).expect("topo ids are transforms");
        let inputs: Vec<SizeStats> = transform
            .inputs
            .iter()
            .map(|input| {
                sizes
                    .get(input)
                    .copied()
                    .ok_or_else(|| CostError::MissingAnnotation(input.clone()))
            })
            .collect::<Result<_, _>>()?;
        let widths: Vec<usize> = transform
            .inputs
            .iter()
            .map(|input| schemas.get(input).map_or(1, Schema::width))
            .collect();
        let stats = estimate_output_size(transform, &inputs, &widths, config)?;
        sizes.insert(id.clone(), stats);
    }
    Ok(sizes)
}

/// The three cost components compared by the push-down decision rule.
///
/// `exec_local` is the full cost of the local option: execution at the site
/// holding the largest input, plus moving the other inputs there. `move_cost`
/// and `exec_remote` together price the remote option at the central engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostEstimate {
    pub move_cost: Money,
    pub exec_remote: Money,
    pub exec_local: Money,
}

impl CostEstimate {
    pub fn new(move_cost: Money, exec_remote: Money, exec_local: Money) -> CostEstimate {
        debug_assert!(!move_cost.is_negative());
        debug_assert!(!exec_remote.is_negative());
        debug_assert!(!exec_local.is_negative());
        CostEstimate { move_cost, exec_remote, exec_local }
    }
}

/// Total plan cost split into its components; `total` is always the exact
/// decimal sum of the other three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotalCost {
    pub compute: Money,
    pub storage: Money,
    pub transfer: Money,
    pub total: Money,
}

impl TotalCost {
    pub fn new(compute: Money, storage: Money, transfer: Money) -> TotalCost {
        TotalCost {
            compute,
            storage,
            transfer,
            total: compute + storage + transfer,
        }
    }
}

/// Cost components as exact numerators over 10^9 (micro-money times bytes
/// per GB). Planners compare these, so argmin decisions are independent of
/// the floor applied when presenting money.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactCost {
    pub compute: u128,
    pub storage: u128,
    pub transfer: u128,
}

impl ExactCost {
    pub fn total(&self) -> u128 {
        self.compute + self.storage + self.transfer
    }

    pub fn to_total_cost(&self) -> TotalCost {
        TotalCost::new(
            Money::from_micros((self.compute / 1_000_000_000) as i64),
            Money::from_micros((self.storage / 1_000_000_000) as i64),
            Money::from_micros((self.transfer / 1_000_000_000) as i64),
        )
    }
}

/// Exact charge numerator for `rate` money-per-GB applied to `bytes`.
pub fn charge_exact(rate: Money, bytes: u64) -> u128 {
    money::charge_exact(rate, bytes)
}

/// Floored money charge for `rate` money-per-GB applied to `bytes`.
pub fn charge(rate: Money, bytes: u64) -> Money {
    money::charge(rate, bytes)
}

/// Money cost of moving `volume` from `src` to `dst`: zero within a site,
/// otherwise the link's egress rate times the volume in GB.
pub fn cost_move(volume: SizeStats, src: &str, dst: &str, topo: &Topology) -> Money {
    if src == dst {
        return Money::ZERO;
    }
    let link = topo.link(src, dst).expect("topologies are complete digraphs");
    charge(link.egress_rate, volume.size_bytes)
}

/// Money cost of executing a transform over `volume` input bytes at `site`.
/// At the data's own site this realizes the local execution cost; at any
/// other site (after a move) it realizes the remote one.
pub fn cost_exec(volume: SizeStats, site: &Site) -> Money {
    charge(site.compute_rate, volume.size_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::TransformParams;
    use alloc::vec;

    fn filter(selectivity: Option<f64>) -> Transform {
        Transform {
            id: "t".to_string(),
            kind: TransformKind::Filter,
            inputs: vec!["d".to_string()],
            params: TransformParams {
                predicate: Some("v > 0".to_string()),
                selectivity,
                ..TransformParams::default()
            },
        }
    }

    #[test]
    fn filter_scales_by_selectivity() {
        let out = estimate_output_size(
            &filter(None),
            &[SizeStats::new(100_000_000_000, 1_000_000)],
            &[2],
            &SelectivityConfig::default(),
        )
        .unwrap();
        assert_eq!(out, SizeStats::new(10_000_000_000, 100_000));
    }

    #[test]
    fn union_adds_inputs() {
        let transform = Transform {
            id: "u".to_string(),
            kind: TransformKind::Union,
            inputs: vec!["a".to_string(), "b".to_string()],
            params: TransformParams::default(),
        };
        let out = estimate_output_size(
            &transform,
            &[
                SizeStats::new(10_000_000_000, 100),
                SizeStats::new(5_000_000_000, 50),
            ],
            &[2, 2],
            &SelectivityConfig::default(),
        )
        .unwrap();
        assert_eq!(out, SizeStats::new(15_000_000_000, 150));
    }

    #[test]
    fn project_scales_by_retained_column_fraction() {
        let transform = Transform {
            id: "p".to_string(),
            kind: TransformKind::Project,
            inputs: vec!["d".to_string()],
            params: TransformParams {
                columns: Some(vec!["a".to_string(), "b".to_string()]),
                ..TransformParams::default()
            },
        };
        let out = estimate_output_size(
            &transform,
            &[SizeStats::new(8_000_000_000, 80)],
            &[4],
            &SelectivityConfig::default(),
        )
        .unwrap();
        assert_eq!(out, SizeStats::new(4_000_000_000, 80));
    }

    #[test]
    fn scaling_preserves_the_zero_invariant() {
        let out = estimate_output_size(
            &filter(Some(0.001)),
            &[SizeStats::new(5, 1000)],
            &[2],
            &SelectivityConfig::default(),
        )
        .unwrap();
        // ceiling keeps tiny positive volumes positive on both axes
        assert!(out.size_bytes > 0 && out.row_count > 0);

        let zero = estimate_output_size(
            &filter(Some(0.0)),
            &[SizeStats::new(5, 1000)],
            &[2],
            &SelectivityConfig::default(),
        )
        .unwrap();
        assert_eq!(zero, SizeStats::new(0, 0));
    }

    #[test]
    fn bad_selectivity_is_rejected() {
        assert!(matches!(
            estimate_output_size(
                &filter(Some(f64::NAN)),
                &[SizeStats::new(5, 5)],
                &[2],
                &SelectivityConfig::default(),
            ),
            Err(CostError::BadSelectivity(_))
        ));
        assert!(Factor::from_f64(-0.5).is_err());
        assert!(Factor::from_f64(f64::INFINITY).is_err());
    }

    #[test]
    fn total_cost_totals_exactly() {
        let t = TotalCost::new(
            Money::parse("2").unwrap(),
            Money::parse("1").unwrap(),
            Money::parse("0.5").unwrap(),
        );
        assert_eq!(t.total, Money::parse("3.5").unwrap());
    }

    #[test]
    fn exact_cost_floors_components_independently_of_comparison() {
        let exact = ExactCost {
            compute: 1_999_999_999, // 1.999999999 micro-GB -> floors to 1 micro
            storage: 0,
            transfer: 0,
        };
        let presented = exact.to_total_cost();
        assert_eq!(presented.compute, Money::from_micros(1));
        assert_eq!(presented.total, Money::from_micros(1));
    }
}
