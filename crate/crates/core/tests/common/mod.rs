//! Random (layer, design, scheme) instances shared by the property and
//! acceptance suites.

#![allow(dead_code)]

use fpgatile_core::model::{self, AcceleratorDesign, LayerSpec, PlatformSpec, PortConfig, Precision, TileConfig};
use fpgatile_core::network::fixtures;
use fpgatile_core::xfer::{slice_layer, PartitionScheme, XferContext, XferMode};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub layer: LayerSpec,
    pub slice: LayerSpec,
    pub design: AcceleratorDesign,
    pub scheme: PartitionScheme,
    pub platform: PlatformSpec,
}

impl Instance {
    pub fn xfer(&self) -> XferContext {
        XferContext::new(self.scheme, &self.design.ports, XferMode::Xfer)
    }

    pub fn baseline(&self) -> XferContext {
        XferContext::baseline(self.scheme)
    }
}

/// Raw draws; `build` turns them into an instance or rejects them.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub dims: [u64; 5],
    pub kernel: u64,
    pub factors: [u64; 4],
    /// Tile edges as divisors of the slice extents (keeps trip counts small).
    pub tile_div: [u64; 4],
    pub ports: [u64; 3],
    pub fixed: bool,
}

pub const KERNELS: [u64; 4] = [1, 3, 5, 7];

pub fn build(d: Draw) -> Option<Instance> {
    let [b, m, n, r, c] = d.dims;
    let layer = LayerSpec::new("rand", b, m, n, r, c, d.kernel).ok()?;
    let [pb, pr, pc, pm] = d.factors;
    let scheme = PartitionScheme::new(pb.min(b), pr.min(r), pc.min(c), pm.min(m));
    if scheme.fpga_count() > 16 {
        return None;
    }
    let slice = slice_layer(&layer, &scheme).ok()?;
    let edge = |extent: u64, k: u64| extent.div_ceil(k.max(1)).max(1);
    let tile = TileConfig::new(
        edge(slice.out_channels, d.tile_div[0]),
        edge(slice.in_channels, d.tile_div[1]),
        edge(slice.rows, d.tile_div[2]),
        edge(slice.cols, d.tile_div[3]),
    );
    let precision = if d.fixed { Precision::Fixed16 } else { Precision::Float32 };
    let ports = PortConfig::new(d.ports[0], d.ports[1], d.ports[2]);
    let design = AcceleratorDesign::new(tile, ports, precision);
    let platform = fixtures::zcu102();
    if !model::resource_check(&design, &slice, &platform).is_ok() {
        return None;
    }
    Some(Instance { layer, slice, design, scheme, platform })
}

pub fn draw<R: Rng>(rng: &mut R) -> Draw {
    Draw {
        dims: [
            rng.gen_range(1..=4),
            rng.gen_range(1..=96),
            rng.gen_range(1..=96),
            rng.gen_range(1..=28),
            rng.gen_range(1..=28),
        ],
        kernel: KERNELS[rng.gen_range(0..KERNELS.len())],
        factors: [
            rng.gen_range(1..=4),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=4),
        ],
        tile_div: [
            rng.gen_range(1..=6),
            rng.gen_range(1..=6),
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
        ],
        ports: [rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4)],
        fixed: rng.gen_bool(0.5),
    }
}

/// Draws until a feasible instance comes up.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    loop {
        if let Some(i) = build(draw(rng)) {
            return i;
        }
    }
}

pub mod strategy {
    use super::*;
    use proptest::prelude::*;

    pub fn draw() -> impl Strategy<Value = Draw> {
        (
            (1u64..=4, 1u64..=96, 1u64..=96, 1u64..=28, 1u64..=28),
            0usize..KERNELS.len(),
            (1u64..=4, 1u64..=3, 1u64..=3, 1u64..=4),
            (1u64..=6, 1u64..=6, 1u64..=4, 1u64..=4),
            (1u64..=4, 1u64..=4, 1u64..=4),
            any::<bool>(),
        )
            .prop_map(|(dims, k, f, t, p, fixed)| Draw {
                dims: [dims.0, dims.1, dims.2, dims.3, dims.4],
                kernel: KERNELS[k],
                factors: [f.0, f.1, f.2, f.3],
                tile_div: [t.0, t.1, t.2, t.3],
                ports: [p.0, p.1, p.2],
                fixed,
            })
    }

    pub fn instance() -> impl Strategy<Value = Instance> {
        draw().prop_filter_map("design does not fit", build)
    }
}
