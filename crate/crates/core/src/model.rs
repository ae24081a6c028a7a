// SPDX-License-Identifier: Apache-2.0

//! Analytic model of one FPGA running a tiled convolution accelerator.
//!
//! The accelerator streams IFM, weight and OFM tiles between off-chip memory
//! and double-buffered on-chip arrays. Per inner trip it loads one IFM tile and
//! one weight tile while the processing element works on the previous pair;
//! the OFM tile is written back while the next output tile is being computed.
//! Every cycle count produced here is rounded up.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Dimension, ModelError, Result};
use crate::xfer::{self, XferContext, XferMode};

/// Capacity of one block RAM in bits (18Kb).
pub const BRAM_BLOCK_BITS: u64 = 18 * 1024;

pub(crate) fn div_ceil(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

/// One convolution layer ⟨B, M, N, R, C, K⟩. `rows`/`cols` are output
/// dimensions; stride is folded into them by the caller.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(rename = "B")]
    pub batch: u64,
    #[serde(rename = "M")]
    pub out_channels: u64,
    #[serde(rename = "N")]
    pub in_channels: u64,
    #[serde(rename = "R")]
    pub rows: u64,
    #[serde(rename = "C")]
    pub cols: u64,
    #[serde(rename = "K")]
    pub kernel: u64,
}

impl LayerSpec {
    pub fn new(
        name: impl Into<String>,
        batch: u64,
        out_channels: u64,
        in_channels: u64,
        rows: u64,
        cols: u64,
        kernel: u64,
    ) -> Result<Self> {
        let layer = Self {
            name: name.into(),
            batch,
            out_channels,
            in_channels,
            rows,
            cols,
            kernel,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        for (dim, v) in self.dims() {
            if v == 0 {
                return Err(ModelError::InvalidLayer {
                    name: self.name.clone(),
                    reason: format!("{dim} must be at least 1"),
                });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> [(Dimension, u64); 6] {
        [
            (Dimension::Batch, self.batch),
            (Dimension::OutChannels, self.out_channels),
            (Dimension::InChannels, self.in_channels),
            (Dimension::Rows, self.rows),
            (Dimension::Cols, self.cols),
            (Dimension::Kernel, self.kernel),
        ]
    }

    /// Multiply-accumulate operations in the whole layer.
    pub fn macs(&self) -> u64 {
        self.batch
            * self.out_channels
            * self.in_channels
            * self.rows
            * self.cols
            * self.kernel
            * self.kernel
    }
}

/// Arithmetic precision of the datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Float32,
    Fixed16,
}

impl Precision {
    pub const fn bits(self) -> u64 {
        match self {
            Precision::Float32 => 32,
            Precision::Fixed16 => 16,
        }
    }

    pub const fn dsp_per_mac(self) -> u64 {
        match self {
            Precision::Float32 => 5,
            Precision::Fixed16 => 1,
        }
    }

    /// Stream lanes used on the reference board for this precision.
    pub const fn default_ports(self) -> PortConfig {
        match self {
            Precision::Float32 => PortConfig::new(2, 2, 2),
            Precision::Fixed16 => PortConfig::new(4, 8, 4),
        }
    }

    /// Accelerator clock used when converting cycles to wall-clock time.
    pub const fn default_freq_mhz(self) -> f64 {
        match self {
            Precision::Float32 => 100.0,
            Precision::Fixed16 => 200.0,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Float32 => "float32",
            Precision::Fixed16 => "fixed16",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "float32" | "fp32" | "float" => Ok(Precision::Float32),
            "fixed16" | "int16" | "fixed" => Ok(Precision::Fixed16),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

/// Loop tiling ⟨Tm, Tn, Tr, Tc⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileConfig {
    #[serde(rename = "tm")]
    pub out_channels: u64,
    #[serde(rename = "tn")]
    pub in_channels: u64,
    #[serde(rename = "tr")]
    pub rows: u64,
    #[serde(rename = "tc")]
    pub cols: u64,
}

impl TileConfig {
    pub const fn new(out_channels: u64, in_channels: u64, rows: u64, cols: u64) -> Self {
        Self {
            out_channels,
            in_channels,
            rows,
            cols,
        }
    }

    /// The same tile with each edge shrunk to the layer's extent.
    pub fn clamp_to(&self, layer: &LayerSpec) -> Self {
        Self {
            out_channels: self.out_channels.min(layer.out_channels),
            in_channels: self.in_channels.min(layer.in_channels),
            rows: self.rows.min(layer.rows),
            cols: self.cols.min(layer.cols),
        }
    }

    pub fn ifm_volume(&self) -> u64 {
        self.in_channels * self.rows * self.cols
    }

    pub fn ofm_volume(&self) -> u64 {
        self.out_channels * self.rows * self.cols
    }

    pub fn weight_volume(&self, kernel: u64) -> u64 {
        self.out_channels * self.in_channels * kernel * kernel
    }
}

impl fmt::Display for TileConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{},{},{},{}>",
            self.out_channels, self.in_channels, self.rows, self.cols
        )
    }
}

/// Parallel stream lanes between off-chip memory and the IFM, weight and OFM
/// buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortConfig {
    #[serde(rename = "ip")]
    pub ifm: u64,
    #[serde(rename = "wp")]
    pub weight: u64,
    #[serde(rename = "op")]
    pub ofm: u64,
}

impl PortConfig {
    pub const fn new(ifm: u64, weight: u64, ofm: u64) -> Self {
        Self { ifm, weight, ofm }
    }

    pub fn total_lanes(&self) -> u64 {
        self.ifm + self.weight + self.ofm
    }
}

impl fmt::Display for PortConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.ifm, self.weight, self.ofm)
    }
}

/// Resource budget of one FPGA plus its inter-FPGA link bandwidth.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub name: String,
    pub dsp_budget: u64,
    /// 18Kb blocks.
    pub bram_budget: u64,
    /// Memory bus width in bits.
    pub bus_width: u64,
    /// Bits per cycle on one direction of the inter-FPGA links.
    pub interlink_bw: u64,
}

impl PlatformSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("dsp_budget", self.dsp_budget),
            ("bram_budget", self.bram_budget),
            ("bus_width", self.bus_width),
            ("interlink_bw", self.interlink_bw),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((field, _)) => Err(ModelError::InvalidContext(format!(
                "platform `{}`: {field} must be at least 1",
                self.name
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcceleratorDesign {
    pub tile: TileConfig,
    pub ports: PortConfig,
    pub precision: Precision,
}

impl AcceleratorDesign {
    pub const fn new(tile: TileConfig, ports: PortConfig, precision: Precision) -> Self {
        Self {
            tile,
            ports,
            precision,
        }
    }

    /// The design with its tile clamped to `layer`; used when one hardware
    /// tile serves several layers.
    pub fn clamped(&self, layer: &LayerSpec) -> Self {
        Self {
            tile: self.tile.clamp_to(layer),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BramUsage {
    pub ifm: u64,
    pub ofm: u64,
    pub weight: u64,
}

impl BramUsage {
    pub fn total(&self) -> u64 {
        self.ifm + self.ofm + self.weight
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub dsps: u64,
    pub bram: BramUsage,
    pub bus_bits: u64,
}

impl ResourceUsage {
    pub fn bram_total(&self) -> u64 {
        self.bram.total()
    }
}

/// A violated hardware or tiling constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    Dsp { used: u64, budget: u64 },
    Bram { used: u64, budget: u64 },
    BusWidth { used: u64, budget: u64 },
    TileExceedsLayer { dimension: Dimension, tile: u64, layer: u64 },
    ZeroTile { dimension: Dimension },
    ZeroPorts,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dsp { used, budget } => write!(f, "DSP usage {used} > budget {budget}"),
            Violation::Bram { used, budget } => write!(f, "BRAM usage {used} > budget {budget}"),
            Violation::BusWidth { used, budget } => {
                write!(f, "memory bus {used} bits > width {budget}")
            }
            Violation::TileExceedsLayer {
                dimension,
                tile,
                layer,
            } => write!(f, "tile T{dimension}={tile} exceeds layer {dimension}={layer}"),
            Violation::ZeroTile { dimension } => write!(f, "tile T{dimension} is zero"),
            Violation::ZeroPorts => f.write_str("every stream port count must be at least 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCheck {
    pub usage: ResourceUsage,
    pub violations: Vec<Violation>,
}

impl ResourceCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<ResourceUsage> {
        if self.violations.is_empty() {
            Ok(self.usage)
        } else {
            Err(ModelError::Infeasible(self.violations))
        }
    }
}

pub fn dsp_usage(tile: &TileConfig, precision: Precision) -> u64 {
    precision.dsp_per_mac() * tile.out_channels * tile.in_channels
}

/// Double-buffered block RAM for the IFM, OFM and weight arrays. IFM and OFM
/// are partitioned along channels, weights along both channel dimensions.
pub fn bram_usage(tile: &TileConfig, kernel: u64, precision: Precision) -> BramUsage {
    let bits = precision.bits();
    let plane = div_ceil(tile.rows * tile.cols * bits, BRAM_BLOCK_BITS);
    let window = div_ceil(kernel * kernel * bits, BRAM_BLOCK_BITS);
    BramUsage {
        ifm: 2 * tile.in_channels * plane,
        ofm: 2 * tile.out_channels * plane,
        weight: 2 * tile.out_channels * tile.in_channels * window,
    }
}

pub fn resource_usage(design: &AcceleratorDesign, kernel: u64) -> ResourceUsage {
    ResourceUsage {
        dsps: dsp_usage(&design.tile, design.precision),
        bram: bram_usage(&design.tile, kernel, design.precision),
        bus_bits: design.precision.bits() * design.ports.total_lanes(),
    }
}

/// Checks the design against the platform budgets and the layer extent. All
/// violated constraints are reported, not just the first.
pub fn resource_check(
    design: &AcceleratorDesign,
    layer: &LayerSpec,
    platform: &PlatformSpec,
) -> ResourceCheck {
    let mut violations = resource_violations(design, layer.kernel, platform);
    let t = &design.tile;
    let pairs = [
        (Dimension::OutChannels, t.out_channels, layer.out_channels),
        (Dimension::InChannels, t.in_channels, layer.in_channels),
        (Dimension::Rows, t.rows, layer.rows),
        (Dimension::Cols, t.cols, layer.cols),
    ];
    for (dimension, tile, extent) in pairs {
        if tile == 0 {
            violations.push(Violation::ZeroTile { dimension });
        } else if tile > extent {
            violations.push(Violation::TileExceedsLayer {
                dimension,
                tile,
                layer: extent,
            });
        }
    }
    ResourceCheck {
        usage: resource_usage(design, layer.kernel),
        violations,
    }
}

/// Budget-only part of [`resource_check`]; the tile is not compared against
/// any layer.
pub fn resource_violations(
    design: &AcceleratorDesign,
    kernel: u64,
    platform: &PlatformSpec,
) -> Vec<Violation> {
    let usage = resource_usage(design, kernel);
    let mut violations = Vec::new();
    if usage.dsps > platform.dsp_budget {
        violations.push(Violation::Dsp {
            used: usage.dsps,
            budget: platform.dsp_budget,
        });
    }
    if usage.bram_total() > platform.bram_budget {
        violations.push(Violation::Bram {
            used: usage.bram_total(),
            budget: platform.bram_budget,
        });
    }
    if usage.bus_bits > platform.bus_width {
        violations.push(Violation::BusWidth {
            used: usage.bus_bits,
            budget: platform.bus_width,
        });
    }
    let p = &design.ports;
    if p.ifm == 0 || p.weight == 0 || p.ofm == 0 {
        violations.push(Violation::ZeroPorts);
    }
    violations
}

/// Iterations of the four tiled loops: IFM channels (innermost), OFM
/// channels, spatial tiles and batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripCounts {
    pub in_channel: u64,
    pub out_channel: u64,
    pub spatial: u64,
    pub batch: u64,
}

impl TripCounts {
    /// Number of OFM tiles produced (and stored).
    pub fn output_tiles(&self) -> u64 {
        self.batch * self.spatial * self.out_channel
    }

    /// Number of IFM/weight tile pairs consumed.
    pub fn inner_trips(&self) -> u64 {
        self.output_tiles() * self.in_channel
    }
}

pub fn trip_counts(layer: &LayerSpec, tile: &TileConfig) -> TripCounts {
    TripCounts {
        in_channel: div_ceil(layer.in_channels, tile.in_channels),
        out_channel: div_ceil(layer.out_channels, tile.out_channels),
        spatial: div_ceil(layer.cols, tile.cols) * div_ceil(layer.rows, tile.rows),
        batch: layer.batch,
    }
}

/// Cycles of each pipeline phase for one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseLatencies {
    pub ifm_load: u64,
    pub weight_load: u64,
    pub ofm_store: u64,
    pub compute: u64,
}

pub fn phase_latencies(layer: &LayerSpec, design: &AcceleratorDesign) -> PhaseLatencies {
    let t = &design.tile;
    let p = &design.ports;
    PhaseLatencies {
        ifm_load: div_ceil(t.ifm_volume(), p.ifm),
        weight_load: div_ceil(t.weight_volume(layer.kernel), p.weight),
        ofm_store: div_ceil(t.ofm_volume(), p.ofm),
        compute: layer.kernel * layer.kernel * t.rows * t.cols,
    }
}

/// The phase that limits the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bottleneck {
    OfmBound,
    IfmBound,
    WeightBound,
    ComputeBound,
    LinkBound,
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bottleneck::OfmBound => "OFM",
            Bottleneck::IfmBound => "IFM",
            Bottleneck::WeightBound => "Weight",
            Bottleneck::ComputeBound => "Comp.",
            Bottleneck::LinkBound => "Link",
        })
    }
}

/// Full latency breakdown of one layer on one FPGA.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Phase cycles after any inter-FPGA offloading has been applied.
    pub phases: PhaseLatencies,
    /// Longest inter-FPGA channel transfer per inner trip; 0 without sharing.
    pub link: u64,
    pub weight_link_channels: u64,
    pub ifm_link_channels: u64,
    /// Cycles of one inner (IFM-channel) trip.
    pub stage: u64,
    /// Cycles of one output tile.
    pub tile: u64,
    /// Whole-layer latency.
    pub total: u64,
    pub trips: TripCounts,
    pub bottleneck: Bottleneck,
    pub usage: ResourceUsage,
}

impl LatencyReport {
    /// `total` minus the fill/drain tail; the value some published tables
    /// quote.
    pub fn steady_state(&self) -> u64 {
        self.trips.output_tiles() * self.tile
    }
}

/// Latency of `layer` on one FPGA. With a transfer context the layer must
/// already be the per-FPGA slice (see [`crate::xfer::xfer_latency`]).
pub fn latency(
    layer: &LayerSpec,
    design: &AcceleratorDesign,
    platform: &PlatformSpec,
    xfer: Option<&XferContext>,
) -> Result<LatencyReport> {
    layer.validate()?;
    resource_check(design, layer, platform).into_result()?;
    if let Some(ctx) = xfer {
        ctx.validate()?;
    }
    Ok(evaluate(layer, design, xfer))
}

/// [`latency`] without validation. Callers guarantee the design fits.
pub(crate) fn evaluate(
    layer: &LayerSpec,
    design: &AcceleratorDesign,
    xfer: Option<&XferContext>,
) -> LatencyReport {
    let mut phases = phase_latencies(layer, design);
    let mut link = 0;
    let mut weight_link_channels = 0;
    let mut ifm_link_channels = 0;
    if let Some(ctx) = xfer.filter(|c| c.mode == XferMode::Xfer) {
        let w = xfer::xfer_weight_shared(
            &design.tile,
            layer.kernel,
            design.ports.weight,
            &ctx.scheme,
            ctx.weight_lanes,
        );
        let i = xfer::xfer_ifm_shared(&design.tile, design.ports.ifm, &ctx.scheme, ctx.ifm_lanes);
        phases.weight_load = w.memory_cycles;
        phases.ifm_load = i.memory_cycles;
        weight_link_channels = w.channels;
        ifm_link_channels = i.channels;
        link = w.link_cycles.max(i.link_cycles);
    }
    let trips = trip_counts(layer, &design.tile);
    let stage = phases
        .compute
        .max(phases.ifm_load)
        .max(phases.weight_load)
        .max(link);
    let tile = (trips.in_channel * stage).max(phases.ofm_store);
    let total = trips.output_tiles() * tile + phases.ofm_store + stage;
    let mut report = LatencyReport {
        phases,
        link,
        weight_link_channels,
        ifm_link_channels,
        stage,
        tile,
        total,
        trips,
        bottleneck: Bottleneck::ComputeBound,
        usage: resource_usage(design, layer.kernel),
    };
    report.bottleneck = classify_bottleneck(&report);
    report
}

/// OFM-bound when the store outlasts a full sweep of IFM channels; otherwise
/// the phase that sets the inner-trip time. Exact ties resolve
/// Compute > Link > Weight > IFM.
pub fn classify_bottleneck(report: &LatencyReport) -> Bottleneck {
    let p = &report.phases;
    if p.ofm_store > report.trips.in_channel * report.stage {
        return Bottleneck::OfmBound;
    }
    let ordered = [
        (p.compute, Bottleneck::ComputeBound),
        (report.link, Bottleneck::LinkBound),
        (p.weight_load, Bottleneck::WeightBound),
        (p.ifm_load, Bottleneck::IfmBound),
    ];
    ordered
        .iter()
        .find(|(cycles, _)| *cycles == report.stage)
        .map(|(_, b)| *b)
        .unwrap_or(Bottleneck::ComputeBound)
}

/// Cycles the processing element alone needs for the layer; no design can
/// beat it.
pub fn compute_lower_bound(layer: &LayerSpec, tile: &TileConfig) -> u64 {
    trip_counts(layer, tile).inner_trips() * layer.kernel * layer.kernel * tile.rows * tile.cols
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zcu102() -> PlatformSpec {
        PlatformSpec {
            name: "zcu102".into(),
            dsp_budget: 2520,
            bram_budget: 1824,
            bus_width: 256,
            interlink_bw: 256,
        }
    }

    fn alexnet_l3() -> LayerSpec {
        LayerSpec::new("conv3", 1, 384, 256, 13, 13, 3).unwrap()
    }

    fn fixed(tile: TileConfig) -> AcceleratorDesign {
        AcceleratorDesign::new(tile, PortConfig::new(4, 8, 4), Precision::Fixed16)
    }

    #[test]
    fn dsp_usage_matches_reference_designs() {
        assert_eq!(dsp_usage(&TileConfig::new(8, 32, 1, 1), Precision::Float32), 1280);
        assert_eq!(dsp_usage(&TileConfig::new(64, 20, 1, 1), Precision::Fixed16), 1280);
        assert_eq!(dsp_usage(&TileConfig::new(1, 1, 1, 1), Precision::Fixed16), 1);
    }

    #[test]
    fn bram_usage_unit_tile() {
        let b = bram_usage(&TileConfig::new(1, 1, 1, 1), 1, Precision::Fixed16);
        assert_eq!((b.ifm, b.ofm, b.weight), (2, 2, 2));
    }

    #[test]
    fn bram_usage_alexnet_l2_tile() {
        // 2·48·⌈14·27·32/18432⌉, 2·10·⌈..⌉, 2·10·48·⌈25·32/18432⌉
        let b = bram_usage(&TileConfig::new(10, 48, 14, 27), 5, Precision::Float32);
        assert_eq!((b.ifm, b.ofm, b.weight), (96, 20, 960));
    }

    #[test]
    fn bram_usage_design_a_total() {
        let b = bram_usage(&TileConfig::new(8, 32, 13, 13), 3, Precision::Float32);
        assert_eq!(b.total(), 592);
    }

    #[test]
    fn bram_counts_are_even() {
        for tm in [1, 3, 7] {
            for k in [1, 3, 11] {
                let b = bram_usage(&TileConfig::new(tm, 5, 9, 31), k, Precision::Float32);
                assert!(b.ifm % 2 == 0 && b.ofm % 2 == 0 && b.weight % 2 == 0);
            }
        }
    }

    #[test]
    fn resource_check_accepts_reference_bus() {
        let d = fixed(TileConfig::new(64, 20, 7, 13));
        let usage = resource_usage(&d, 3);
        assert_eq!(usage.bus_bits, 256);
        assert_eq!(usage.dsps, 1280);
        let v = resource_violations(&d, 3, &zcu102());
        assert!(!v.iter().any(|x| matches!(x, Violation::Dsp { .. })));
        assert!(!v.iter().any(|x| matches!(x, Violation::BusWidth { .. })));
    }

    #[test]
    fn resource_check_flags_oversized_tile() {
        let layer = alexnet_l3();
        let d = fixed(TileConfig::new(385, 1, 1, 1));
        let check = resource_check(&d, &layer, &zcu102());
        assert!(check.violations.contains(&Violation::TileExceedsLayer {
            dimension: Dimension::OutChannels,
            tile: 385,
            layer: 384,
        }));
    }

    #[test]
    fn resource_check_reports_every_violation() {
        let layer = LayerSpec::new("big", 1, 4096, 4096, 64, 64, 3).unwrap();
        let d = AcceleratorDesign::new(
            TileConfig::new(100, 100, 64, 64),
            PortConfig::new(8, 8, 8),
            Precision::Float32,
        );
        let check = resource_check(&d, &layer, &zcu102());
        assert_eq!(check.violations.len(), 3, "{:?}", check.violations);
    }

    #[test]
    fn trip_counts_alexnet_l3() {
        let t = trip_counts(&alexnet_l3(), &TileConfig::new(55, 9, 13, 13));
        assert_eq!((t.in_channel, t.out_channel, t.spatial, t.batch), (29, 7, 1, 1));
        let full = trip_counts(&alexnet_l3(), &TileConfig::new(384, 256, 13, 13));
        assert_eq!((full.in_channel, full.out_channel, full.spatial), (1, 1, 1));
        let l = LayerSpec::new("x", 1, 8, 192, 1, 1, 1).unwrap();
        assert_eq!(trip_counts(&l, &TileConfig::new(1, 15, 1, 1)).in_channel, 13);
    }

    #[test]
    fn phase_latencies_round_up() {
        let p = phase_latencies(&alexnet_l3(), &fixed(TileConfig::new(55, 9, 13, 13)));
        assert_eq!(p.ifm_load, 381);
        assert_eq!(p.compute, 1521);
        assert_eq!(p.weight_load, 557);
        assert_eq!(p.ofm_store, 2324);
    }

    #[test]
    fn latency_alexnet_l3() {
        let r = latency(&alexnet_l3(), &fixed(TileConfig::new(55, 9, 13, 13)), &zcu102(), None)
            .unwrap();
        assert_eq!(r.total, 7 * 29 * 1521 + (2324 + 1521));
        assert_eq!(r.total, 312_608);
        assert_eq!(r.bottleneck, Bottleneck::ComputeBound);
        let dev = (r.total as f64 - 314_000.0).abs() / 314_000.0;
        assert!(dev < 0.02);
    }

    #[test]
    fn latency_unit_layer() {
        let l = LayerSpec::new("unit", 1, 1, 1, 1, 1, 1).unwrap();
        let d = fixed(TileConfig::new(1, 1, 1, 1));
        let r = latency(&l, &d, &zcu102(), None).unwrap();
        assert_eq!(r.stage, 1);
        assert_eq!(r.tile, 1);
        assert_eq!(r.total, 3);
    }

    #[test]
    fn ofm_store_dominates_tile_time() {
        // one IFM trip, 64 OFM channels over a single lane
        let l = LayerSpec::new("wide", 1, 64, 1, 8, 8, 1).unwrap();
        let d = AcceleratorDesign::new(
            TileConfig::new(64, 1, 8, 8),
            PortConfig::new(1, 1, 1),
            Precision::Fixed16,
        );
        let r = latency(&l, &d, &zcu102(), None).unwrap();
        assert_eq!(r.phases.ofm_store, 4096);
        assert_eq!(r.tile, r.phases.ofm_store);
        assert_eq!(r.bottleneck, Bottleneck::OfmBound);
    }

    #[test]
    fn latency_rejects_infeasible_design() {
        let d = fixed(TileConfig::new(384, 256, 13, 13));
        let err = latency(&alexnet_l3(), &d, &zcu102(), None).unwrap_err();
        match err {
            ModelError::Infeasible(v) => assert!(v.iter().any(|x| matches!(x, Violation::Dsp { .. }))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classify_design_a_ifm_bound() {
        let l = LayerSpec::new("conv5", 1, 256, 192, 13, 13, 3).unwrap();
        let d = AcceleratorDesign::new(
            TileConfig::new(8, 32, 13, 13),
            Precision::Float32.default_ports(),
            Precision::Float32,
        );
        let r = evaluate(&l, &d, None);
        assert_eq!(r.bottleneck, Bottleneck::IfmBound);
        assert_eq!(r.steady_state(), 519_168);
    }

    #[test]
    fn classify_design_c_weight_bound() {
        let l = LayerSpec::new("conv5", 1, 256, 192, 13, 13, 3).unwrap();
        let r = evaluate(&l, &fixed(TileConfig::new(64, 20, 7, 13)), None);
        assert_eq!(r.bottleneck, Bottleneck::WeightBound);
        assert_eq!(r.steady_state(), 115_200);
    }

    #[test]
    fn classify_tie_prefers_compute() {
        let l = LayerSpec::new("t", 1, 4, 4, 4, 4, 1).unwrap();
        // compute = 16, ifm = 4·16/4 = 16
        let d = AcceleratorDesign::new(
            TileConfig::new(4, 4, 4, 4),
            PortConfig::new(4, 1, 4),
            Precision::Fixed16,
        );
        let r = evaluate(&l, &d, None);
        assert_eq!(r.phases.ifm_load, r.phases.compute);
        assert_eq!(r.bottleneck, Bottleneck::ComputeBound);
    }

    #[test]
    fn layer_rejects_zero_dims() {
        assert!(LayerSpec::new("z", 1, 0, 1, 1, 1, 1).is_err());
    }
}
