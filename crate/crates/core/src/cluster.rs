// SPDX-License-Identifier: Apache-2.0

//! Concrete cluster layout for a partition scheme.
//!
//! FPGAs form a grid of `Pb·Pr·Pc` rows by `Pm` columns wired as a torus.
//! Every node in a grid column holds the same OFM channels and so shares
//! weights with its column; every node in a grid row works on the same
//! batch/row/column slice and so shares the IFM with its row.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{self, AcceleratorDesign, LayerSpec, PlatformSpec, Precision};
use crate::xfer::{self, PartitionScheme, TorusVerdict, XferContext, XferMode};

/// Half-open index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: u64,
    pub end: u64,
}

impl Span {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Part `index` of `parts` near-equal parts of `[0, extent)`. The largest
    /// part is ⌈extent/parts⌉ and none is empty while `parts ≤ extent`.
    pub fn split(extent: u64, parts: u64, index: u64) -> Self {
        Span {
            start: index * extent / parts,
            end: (index + 1) * extent / parts,
        }
    }
}

/// Strided OFM channel set `{first, first+stride, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelSet {
    pub first: u64,
    pub stride: u64,
    pub count: u64,
}

impl ChannelSet {
    pub fn interleaved(total: u64, stride: u64, first: u64) -> Self {
        let count = if first < total {
            (total - first).div_ceil(stride)
        } else {
            0
        };
        ChannelSet {
            first,
            stride,
            count,
        }
    }

    pub fn contains(&self, channel: u64) -> bool {
        channel >= self.first
            && (channel - self.first).is_multiple_of(self.stride)
            && (channel - self.first) / self.stride < self.count
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count).map(move |i| self.first + i * self.stride)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkDirection {
    /// To the right neighbor in the grid row; carries IFM.
    Row,
    /// To the neighbor below in the grid column; carries weights.
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub direction: LinkDirection,
}

/// The slice of work one FPGA owns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAssignment {
    pub node: usize,
    pub grid_row: u64,
    pub grid_col: u64,
    pub batch: Span,
    pub rows: Span,
    pub cols: Span,
    pub channels: ChannelSet,
}

impl NodeAssignment {
    /// The node's own sub-layer of `layer`.
    pub fn slice_of(&self, layer: &LayerSpec) -> LayerSpec {
        LayerSpec {
            name: layer.name.clone(),
            batch: self.batch.len(),
            out_channels: self.channels.count,
            in_channels: layer.in_channels,
            rows: self.rows.len(),
            cols: self.cols.len(),
            kernel: layer.kernel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub scheme: PartitionScheme,
    pub layer: LayerSpec,
    pub design: AcceleratorDesign,
    /// Node ids, `grid[row][col]`.
    pub grid: Vec<Vec<usize>>,
    pub links: Vec<Link>,
    pub nodes: Vec<NodeAssignment>,
}

impl ClusterPlan {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn grid_rows(&self) -> u64 {
        self.scheme.weight_group()
    }

    pub fn grid_cols(&self) -> u64 {
        self.scheme.ifm_group()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.links.iter().filter(|l| l.to == node).count()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.links.iter().filter(|l| l.from == node).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Lays `layer` out over the cluster described by `scheme`.
pub fn build_plan(
    layer: &LayerSpec,
    scheme: &PartitionScheme,
    design: &AcceleratorDesign,
) -> Result<ClusterPlan> {
    layer.validate()?;
    xfer::slice_layer(layer, scheme)?;
    let rows = scheme.weight_group();
    let cols = scheme.ifm_group();
    let id = |r: u64, c: u64| (r * cols + c) as usize;

    let mut grid = Vec::with_capacity(rows as usize);
    let mut nodes = Vec::with_capacity((rows * cols) as usize);
    let mut links = Vec::with_capacity(2 * (rows * cols) as usize);
    for r in 0..rows {
        // batch-major, then row partition, then column partition
        let b = r / (scheme.rows * scheme.cols);
        let rr = (r / scheme.cols) % scheme.rows;
        let cc = r % scheme.cols;
        let mut grid_row = Vec::with_capacity(cols as usize);
        for c in 0..cols {
            let node = id(r, c);
            grid_row.push(node);
            nodes.push(NodeAssignment {
                node,
                grid_row: r,
                grid_col: c,
                batch: Span::split(layer.batch, scheme.batch, b),
                rows: Span::split(layer.rows, scheme.rows, rr),
                cols: Span::split(layer.cols, scheme.cols, cc),
                channels: ChannelSet::interleaved(layer.out_channels, cols, c),
            });
            links.push(Link {
                from: node,
                to: id(r, (c + 1) % cols),
                direction: LinkDirection::Row,
            });
            links.push(Link {
                from: node,
                to: id((r + 1) % rows, c),
                direction: LinkDirection::Column,
            });
        }
        grid.push(grid_row);
    }
    Ok(ClusterPlan {
        scheme: *scheme,
        layer: layer.clone(),
        design: *design,
        grid,
        links,
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLoad {
    pub link: Link,
    /// Bits moved per exchange round.
    pub bits_per_round: f64,
    /// Rounds per inner trip (ring all-gather: group size − 1).
    pub rounds: u64,
}

impl LinkLoad {
    pub fn bits_per_trip(&self) -> f64 {
        self.bits_per_round * self.rounds as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub loads: Vec<LinkLoad>,
    pub verdict: TorusVerdict,
}

impl TrafficReport {
    fn loads_in(&self, direction: LinkDirection) -> impl Iterator<Item = f64> + '_ {
        self.loads
            .iter()
            .filter(move |l| l.link.direction == direction)
            .map(|l| l.bits_per_trip())
    }

    /// max/min load over links of one direction; 1.0 when all idle.
    pub fn imbalance(&self, direction: LinkDirection) -> f64 {
        let (lo, hi) = self
            .loads_in(direction)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if hi == 0.0 {
            1.0
        } else {
            hi / lo
        }
    }
}

/// Per-link traffic of one inner trip with every sharing group running a
/// ring all-gather, plus the torus bandwidth verdict for the plan's design.
pub fn plan_traffic(plan: &ClusterPlan, platform: &PlatformSpec) -> TrafficReport {
    let design = &plan.design;
    let bits = design.precision.bits() as f64;
    let scheme = &plan.scheme;
    let pm = scheme.ifm_group();
    let g = scheme.weight_group();
    let ifm_bits = design.tile.ifm_volume() as f64 * bits;
    let weight_bits = design.tile.weight_volume(plan.layer.kernel) as f64 * bits;
    let loads = plan
        .links
        .iter()
        .map(|link| {
            let (bits_per_round, rounds) = match link.direction {
                LinkDirection::Row if pm > 1 => (ifm_bits / pm as f64, pm - 1),
                LinkDirection::Column if g > 1 => (weight_bits / g as f64, g - 1),
                _ => (0.0, 0),
            };
            LinkLoad {
                link: *link,
                bits_per_round,
                rounds,
            }
        })
        .collect();
    let ctx = XferContext::new(*scheme, &design.ports, XferMode::Xfer);
    let slice = xfer::slice_layer(&plan.layer, scheme).expect("plan was built from a valid slice");
    let stage = model::evaluate(&slice, design, Some(&ctx)).stage;
    TrafficReport {
        loads,
        verdict: xfer::torus_bandwidth_check(design, plan.layer.kernel, scheme, stage, platform),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    NoMove,
    BorderExchange,
    InterleaveResolved,
    FullShuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterLayerMove {
    pub kind: MoveKind,
    /// Bits crossing the cluster at the layer boundary.
    pub volume_bits: u64,
}

/// Shape of the feature map handed from one layer to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryDims {
    pub batch: u64,
    pub channels: u64,
    pub rows: u64,
    pub cols: u64,
}

impl BoundaryDims {
    pub fn output_of(layer: &LayerSpec) -> Self {
        BoundaryDims {
            batch: layer.batch,
            channels: layer.out_channels,
            rows: layer.rows,
            cols: layer.cols,
        }
    }
}

/// Data that must move between FPGAs when the next layer starts.
///
/// A cut along rows or columns needs a halo of `K_next − 1` lines per cut
/// so the next convolution can slide across it. Channel splits with
/// interleaved assignment leave every row of the grid holding all channels,
/// which the next layer's IFM exchange already covers.
pub fn classify_interlayer(
    prev: &PartitionScheme,
    next: &PartitionScheme,
    boundary: &BoundaryDims,
    next_kernel: u64,
    precision: Precision,
) -> InterLayerMove {
    let bits = precision.bits();
    if prev != next {
        return InterLayerMove {
            kind: MoveKind::FullShuffle,
            volume_bits: boundary.batch * boundary.channels * boundary.rows * boundary.cols * bits,
        };
    }
    let halo = next_kernel.saturating_sub(1);
    if (prev.rows > 1 || prev.cols > 1) && halo > 0 {
        let plane = boundary.channels * boundary.batch * bits * halo;
        let volume_bits = (prev.rows - 1) * boundary.cols * plane + (prev.cols - 1) * boundary.rows * plane;
        return InterLayerMove {
            kind: MoveKind::BorderExchange,
            volume_bits,
        };
    }
    let kind = if prev.out_channels > 1 {
        MoveKind::InterleaveResolved
    } else {
        MoveKind::NoMove
    };
    InterLayerMove {
        kind,
        volume_bits: 0,
    }
}

/// Boundary moves between consecutive layers run under one scheme.
pub fn network_moves(
    layers: &[LayerSpec],
    scheme: &PartitionScheme,
    precision: Precision,
) -> Vec<InterLayerMove> {
    layers
        .windows(2)
        .map(|w| classify_interlayer(scheme, scheme, &BoundaryDims::output_of(&w[0]), w[1].kernel, precision))
        .collect()
}
