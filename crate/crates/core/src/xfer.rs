// SPDX-License-Identifier: Apache-2.0

//! Layer partitioning across FPGAs and the shared-data offload scheme.
//!
//! A partition ⟨Pb, Pr, Pc, Pm⟩ splits batch, OFM rows, OFM columns and OFM
//! channels. Batch/row/column splits share weights; channel splits share the
//! IFM. In baseline mode every FPGA fetches the shared data from its own
//! memory. In transfer mode each FPGA fetches only its share and receives the
//! remainder from its peers over inter-FPGA links, one channel per peer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Dimension, ModelError, Result};
use crate::model::{self, div_ceil, AcceleratorDesign, LatencyReport, LayerSpec, PlatformSpec, PortConfig, TileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShareCategory {
    WeightShared,
    IfmShared,
    Hybrid,
    None,
}

/// Partition factors. Splitting IFM channels is not supported: it would
/// force partial OFM sums to be exchanged between FPGAs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionScheme {
    #[serde(rename = "pb")]
    pub batch: u64,
    #[serde(rename = "pr")]
    pub rows: u64,
    #[serde(rename = "pc")]
    pub cols: u64,
    #[serde(rename = "pm")]
    pub out_channels: u64,
}

impl Default for PartitionScheme {
    fn default() -> Self {
        Self::single()
    }
}

impl PartitionScheme {
    pub const fn new(batch: u64, rows: u64, cols: u64, out_channels: u64) -> Self {
        Self {
            batch,
            rows,
            cols,
            out_channels,
        }
    }

    pub const fn single() -> Self {
        Self::new(1, 1, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.rows == 0 || self.cols == 0 || self.out_channels == 0 {
            return Err(ModelError::InvalidPartition(format!(
                "every factor must be at least 1, got {self}"
            )));
        }
        Ok(())
    }

    pub fn fpga_count(&self) -> u64 {
        self.batch * self.rows * self.cols * self.out_channels
    }

    /// FPGAs sharing one weight slice (one grid column).
    pub fn weight_group(&self) -> u64 {
        self.batch * self.rows * self.cols
    }

    /// FPGAs sharing one IFM slice (one grid row).
    pub fn ifm_group(&self) -> u64 {
        self.out_channels
    }

    pub fn category(&self) -> ShareCategory {
        match (self.weight_group() > 1, self.ifm_group() > 1) {
            (true, true) => ShareCategory::Hybrid,
            (true, false) => ShareCategory::WeightShared,
            (false, true) => ShareCategory::IfmShared,
            (false, false) => ShareCategory::None,
        }
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Pb={},Pr={},Pc={},Pm={}",
            self.batch, self.rows, self.cols, self.out_channels
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XferMode {
    /// Shared data replicated in every FPGA's memory; no link traffic.
    Baseline,
    /// Shared data distributed and exchanged over inter-FPGA links.
    Xfer,
}

impl std::str::FromStr for XferMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(XferMode::Baseline),
            "xfer" => Ok(XferMode::Xfer),
            other => Err(format!("unknown transfer mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct XferContext {
    pub scheme: PartitionScheme,
    /// Lanes per inter-FPGA weight channel.
    pub weight_lanes: u64,
    /// Lanes per inter-FPGA IFM channel.
    pub ifm_lanes: u64,
    pub mode: XferMode,
}

impl XferContext {
    /// Link lanes equal to the memory-side lanes of `ports`.
    pub fn new(scheme: PartitionScheme, ports: &PortConfig, mode: XferMode) -> Self {
        Self {
            scheme,
            weight_lanes: ports.weight,
            ifm_lanes: ports.ifm,
            mode,
        }
    }

    pub fn baseline(scheme: PartitionScheme) -> Self {
        Self {
            scheme,
            weight_lanes: 0,
            ifm_lanes: 0,
            mode: XferMode::Baseline,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.mode == XferMode::Xfer {
            if self.scheme.weight_group() > 1 && self.weight_lanes == 0 {
                return Err(ModelError::InvalidContext(
                    "weight sharing needs at least one link lane".into(),
                ));
            }
            if self.scheme.ifm_group() > 1 && self.ifm_lanes == 0 {
                return Err(ModelError::InvalidContext(
                    "IFM sharing needs at least one link lane".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Largest per-FPGA slice of `layer`. Uneven splits round up: the cluster
/// waits for its slowest member.
pub fn slice_layer(layer: &LayerSpec, scheme: &PartitionScheme) -> Result<LayerSpec> {
    scheme.validate()?;
    let checks = [
        (Dimension::Batch, scheme.batch, layer.batch),
        (Dimension::Rows, scheme.rows, layer.rows),
        (Dimension::Cols, scheme.cols, layer.cols),
        (Dimension::OutChannels, scheme.out_channels, layer.out_channels),
    ];
    for (dimension, factor, size) in checks {
        if factor > size {
            return Err(ModelError::FactorExceedsDimension {
                dimension,
                factor,
                size,
            });
        }
    }
    Ok(LayerSpec {
        name: layer.name.clone(),
        batch: div_ceil(layer.batch, scheme.batch),
        out_channels: div_ceil(layer.out_channels, scheme.out_channels),
        in_channels: layer.in_channels,
        rows: div_ceil(layer.rows, scheme.rows),
        cols: div_ceil(layer.cols, scheme.cols),
        kernel: layer.kernel,
    })
}

/// Memory and link cycles for one shared tile split across a sharing group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedTransfer {
    pub memory_cycles: u64,
    /// Cycles of each inter-FPGA channel; all channels carry the same load.
    pub link_cycles: u64,
    pub channels: u64,
}

fn shared_transfer(volume: u64, memory_lanes: u64, link_lanes: u64, group: u64) -> SharedTransfer {
    if group <= 1 {
        return SharedTransfer {
            memory_cycles: div_ceil(volume, memory_lanes),
            link_cycles: 0,
            channels: 0,
        };
    }
    SharedTransfer {
        memory_cycles: div_ceil(volume, memory_lanes * group),
        link_cycles: div_ceil(volume, link_lanes * group),
        channels: group - 1,
    }
}

/// Weight tile split over the Pb·Pr·Pc FPGAs of one grid column.
pub fn xfer_weight_shared(
    tile: &TileConfig,
    kernel: u64,
    weight_ports: u64,
    scheme: &PartitionScheme,
    link_lanes: u64,
) -> SharedTransfer {
    shared_transfer(
        tile.weight_volume(kernel),
        weight_ports,
        link_lanes,
        scheme.weight_group(),
    )
}

/// IFM tile split over the Pm FPGAs of one grid row.
pub fn xfer_ifm_shared(
    tile: &TileConfig,
    ifm_ports: u64,
    scheme: &PartitionScheme,
    link_lanes: u64,
) -> SharedTransfer {
    shared_transfer(tile.ifm_volume(), ifm_ports, link_lanes, scheme.ifm_group())
}

/// Per-FPGA latency of `layer` under `ctx`: slices the layer, then applies
/// the offload revisions when the mode is [`XferMode::Xfer`].
pub fn xfer_latency(
    layer: &LayerSpec,
    design: &AcceleratorDesign,
    platform: &PlatformSpec,
    ctx: &XferContext,
) -> Result<LatencyReport> {
    let slice = slice_layer(layer, &ctx.scheme)?;
    model::latency(&slice, design, platform, Some(ctx))
}

/// Outgoing link traffic of one FPGA per inner trip, against what the link
/// can carry in that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusVerdict {
    /// Bits sent along the grid row (IFM exchange).
    pub row_bits: f64,
    /// Bits sent along the grid column (weight exchange).
    pub col_bits: f64,
    /// Inner-trip cycles the traffic must fit in.
    pub stage_cycles: u64,
    pub capacity_bits_per_cycle: u64,
    pub demand_bits_per_cycle: f64,
    pub ok: bool,
}

/// Checks D_row + D_col ≤ bandwidth · stage, where D_row = (Pm−1)/Pm of the
/// IFM tile and D_col = (G−1)/G of the weight tile (G = Pb·Pr·Pc), both in
/// bits. The comparison is exact integer arithmetic.
pub fn torus_bandwidth_check(
    design: &AcceleratorDesign,
    kernel: u64,
    scheme: &PartitionScheme,
    stage_cycles: u64,
    platform: &PlatformSpec,
) -> TorusVerdict {
    let bits = design.precision.bits() as u128;
    let size_i = design.tile.ifm_volume() as u128 * bits;
    let size_w = design.tile.weight_volume(kernel) as u128 * bits;
    let pm = scheme.ifm_group() as u128;
    let g = scheme.weight_group() as u128;
    // scaled by pm·g to stay integral
    let demand_scaled = (pm - 1) * size_i * g + (g - 1) * size_w * pm;
    let capacity_scaled = platform.interlink_bw as u128 * stage_cycles as u128 * pm * g;
    let row_bits = ((pm - 1) * size_i) as f64 / pm as f64;
    let col_bits = ((g - 1) * size_w) as f64 / g as f64;
    let demand_bits_per_cycle = if stage_cycles == 0 {
        0.0
    } else {
        (row_bits + col_bits) / stage_cycles as f64
    };
    TorusVerdict {
        row_bits,
        col_bits,
        stage_cycles,
        capacity_bits_per_cycle: platform.interlink_bw,
        demand_bits_per_cycle,
        ok: demand_scaled <= capacity_scaled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bottleneck, Precision};

    fn platform(bw: u64) -> PlatformSpec {
        PlatformSpec {
            name: "p".into(),
            dsp_budget: 2520,
            bram_budget: 1824,
            bus_width: 256,
            interlink_bw: bw,
        }
    }

    #[test]
    fn category_follows_factors() {
        assert_eq!(PartitionScheme::new(2, 1, 1, 1).category(), ShareCategory::WeightShared);
        assert_eq!(PartitionScheme::new(1, 1, 1, 2).category(), ShareCategory::IfmShared);
        assert_eq!(PartitionScheme::new(1, 2, 1, 2).category(), ShareCategory::Hybrid);
        assert_eq!(PartitionScheme::single().category(), ShareCategory::None);
        assert_eq!(PartitionScheme::new(2, 3, 1, 4).fpga_count(), 24);
    }

    #[test]
    fn slice_examples() {
        let l = LayerSpec::new("l", 4, 256, 96, 27, 27, 5).unwrap();
        assert_eq!(slice_layer(&l, &PartitionScheme::new(4, 1, 1, 1)).unwrap().batch, 1);
        assert_eq!(slice_layer(&l, &PartitionScheme::new(1, 1, 1, 2)).unwrap().out_channels, 128);
        assert_eq!(slice_layer(&l, &PartitionScheme::new(1, 2, 1, 1)).unwrap().rows, 14);
        assert_eq!(slice_layer(&l, &PartitionScheme::single()).unwrap(), l);
        let err = slice_layer(&l, &PartitionScheme::new(5, 1, 1, 1)).unwrap_err();
        assert!(matches!(err, ModelError::FactorExceedsDimension { dimension: Dimension::Batch, .. }));
    }

    #[test]
    fn weight_shared_revision() {
        let tile = TileConfig::new(64, 20, 7, 13);
        let s = xfer_weight_shared(&tile, 3, 8, &PartitionScheme::new(1, 2, 1, 1), 8);
        assert_eq!(s.memory_cycles, 720);
        assert_eq!(s.link_cycles, 720);
        assert_eq!(s.channels, 1);
        let none = xfer_weight_shared(&tile, 3, 8, &PartitionScheme::single(), 8);
        assert_eq!(none.memory_cycles, 1440);
        assert_eq!(none.channels, 0);
    }

    #[test]
    fn ifm_shared_revision_symmetric_split() {
        let tile = TileConfig::new(8, 32, 13, 13);
        let s = xfer_ifm_shared(&tile, 2, &PartitionScheme::new(1, 1, 1, 2), 2);
        assert_eq!(s.memory_cycles, 1352);
        assert_eq!(s.link_cycles, 1352);
        let none = xfer_ifm_shared(&tile, 2, &PartitionScheme::single(), 2);
        assert_eq!((none.memory_cycles, none.channels), (2704, 0));
    }

    #[test]
    fn design_b_flips_to_compute() {
        let l = LayerSpec::new("conv5", 1, 256, 192, 13, 13, 3).unwrap();
        let d = AcceleratorDesign::new(
            TileConfig::new(8, 32, 13, 13),
            Precision::Float32.default_ports(),
            Precision::Float32,
        );
        let scheme = PartitionScheme::new(1, 1, 1, 2);
        let ctx = XferContext::new(scheme, &d.ports, XferMode::Xfer);
        let r = xfer_latency(&l, &d, &platform(256), &ctx).unwrap();
        assert_eq!(r.bottleneck, Bottleneck::ComputeBound);
        assert_eq!(r.stage, 1521);
        assert_eq!(r.ifm_link_channels, 1);
    }

    #[test]
    fn baseline_matches_plain_model_on_slice() {
        let l = LayerSpec::new("conv5", 4, 256, 192, 13, 13, 3).unwrap();
        let d = AcceleratorDesign::new(
            TileConfig::new(32, 15, 13, 13),
            Precision::Fixed16.default_ports(),
            Precision::Fixed16,
        );
        let scheme = PartitionScheme::new(2, 1, 1, 2);
        let base = xfer_latency(&l, &d, &platform(256), &XferContext::baseline(scheme)).unwrap();
        let slice = slice_layer(&l, &scheme).unwrap();
        let plain = model::latency(&slice, &d, &platform(256), None).unwrap();
        assert_eq!(base, plain);
    }

    #[test]
    fn torus_no_sharing_is_free() {
        let d = AcceleratorDesign::new(
            TileConfig::new(8, 8, 8, 8),
            PortConfig::new(4, 8, 4),
            Precision::Fixed16,
        );
        let v = torus_bandwidth_check(&d, 3, &PartitionScheme::single(), 10, &platform(1));
        assert!(v.ok);
        assert_eq!(v.row_bits + v.col_bits, 0.0);
    }

    #[test]
    fn torus_zero_bandwidth_violates() {
        let d = AcceleratorDesign::new(
            TileConfig::new(8, 8, 8, 8),
            PortConfig::new(4, 8, 4),
            Precision::Fixed16,
        );
        let v = torus_bandwidth_check(&d, 3, &PartitionScheme::new(2, 1, 1, 1), 100, &platform(0));
        assert!(!v.ok);
    }

    #[test]
    fn torus_4x4_demand_is_144_bits() {
        let d = AcceleratorDesign::new(
            TileConfig::new(64, 6, 8, 8),
            PortConfig::new(4, 8, 4),
            Precision::Fixed16,
        );
        let scheme = PartitionScheme::new(4, 1, 1, 4);
        let ok = torus_bandwidth_check(&d, 1, &scheme, 64, &platform(256));
        assert_eq!(ok.demand_bits_per_cycle, 144.0);
        assert!(ok.ok);
        assert!(torus_bandwidth_check(&d, 1, &scheme, 64, &platform(144)).ok);
        assert!(!torus_bandwidth_check(&d, 1, &scheme, 64, &platform(143)).ok);
    }

    #[test]
    fn xfer_context_requires_lanes() {
        let mut ctx = XferContext::new(PartitionScheme::new(2, 1, 1, 1), &PortConfig::new(1, 1, 1), XferMode::Xfer);
        assert!(ctx.validate().is_ok());
        ctx.weight_lanes = 0;
        assert!(ctx.validate().is_err());
    }
}
