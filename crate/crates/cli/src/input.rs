// SPDX-License-Identifier: Apache-2.0

//! Loading inputs and the best-design document.

use std::path::Path;

use fpgatile_core::model::{self, AcceleratorDesign, LayerSpec, LatencyReport, PlatformSpec, PortConfig, Precision, TileConfig};
use fpgatile_core::network::{self, fixtures, NetworkFile};
use fpgatile_core::xfer::{self, PartitionScheme, TorusVerdict, XferContext, XferMode};
use fpgatile_core::ModelError;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// A bundled name (`alexnet`, `vgg16`, ...) or a path to a JSON file.
pub fn load_network(spec: &str) -> Result<NetworkFile, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(net) = fixtures::network(spec) {
            return Ok(net);
        }
    }
    let net = NetworkFile::load(path)?;
    net.validate()?;
    Ok(net)
}

pub fn load_platform(spec: &str) -> Result<PlatformSpec, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(p) = fixtures::platform(spec) {
            return Ok(p);
        }
    }
    let p = network::load_platform(path)?;
    p.validate()?;
    Ok(p)
}

fn parse_tuple<const N: usize>(text: &str, what: &str) -> Result<[u64; N], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("{what} needs {N} comma-separated integers, got `{text}`"));
    }
    let mut out = [0; N];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| format!("{what}: `{p}` is not a non-negative integer"))?;
    }
    Ok(out)
}

pub fn parse_tile(s: &str) -> Result<TileConfig, String> {
    let [m, n, r, c] = parse_tuple::<4>(s, "tile")?;
    Ok(TileConfig::new(m, n, r, c))
}

pub fn parse_ports(s: &str) -> Result<PortConfig, String> {
    let [i, w, o] = parse_tuple::<3>(s, "ports")?;
    Ok(PortConfig::new(i, w, o))
}

pub fn parse_partition(s: &str) -> Result<PartitionScheme, String> {
    let [b, r, c, m] = parse_tuple::<4>(s, "partition")?;
    Ok(PartitionScheme::new(b, r, c, m))
}

/// Written by `optimize`, read back by `model --design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDoc {
    pub network: String,
    pub platform: String,
    pub mode: XferMode,
    pub total_cycles: u64,
    pub entries: Vec<DesignEntry>,
}

/// One design and partition and the layers it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub layers: Vec<String>,
    pub design: AcceleratorDesign,
    pub scheme: PartitionScheme,
    pub cycles: u64,
}

impl DesignDoc {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
    }

    pub fn precision(&self) -> Option<Precision> {
        self.entries.first().map(|e| e.design.precision)
    }
}

/// Design and partition for each layer, in network order.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub layer: LayerSpec,
    pub design: AcceleratorDesign,
    pub scheme: PartitionScheme,
}

pub fn uniform_assignment(layers: &[LayerSpec], design: AcceleratorDesign, scheme: PartitionScheme) -> Vec<Assignment> {
    layers
        .iter()
        .map(|l| Assignment { layer: l.clone(), design, scheme })
        .collect()
}

pub fn doc_assignment(layers: &[LayerSpec], doc: &DesignDoc) -> Result<Vec<Assignment>, Failure> {
    let mut out = Vec::new();
    for entry in &doc.entries {
        for name in &entry.layers {
            let layer = layers
                .iter()
                .find(|l| &l.name == name)
                .ok_or_else(|| Failure::parse(format!("design document names unknown layer `{name}`")))?;
            out.push(Assignment { layer: layer.clone(), design: entry.design, scheme: entry.scheme });
        }
    }
    let order = |a: &Assignment| layers.iter().position(|l| l.name == a.layer.name);
    out.sort_by_key(order);
    Ok(out)
}

/// One layer evaluated on its per-FPGA slice.
#[derive(Debug, Clone, Serialize)]
pub struct LayerEval {
    pub layer: String,
    pub slice: LayerSpec,
    pub design: AcceleratorDesign,
    pub scheme: PartitionScheme,
    pub report: LatencyReport,
    pub torus: Option<TorusVerdict>,
}

impl LayerEval {
    pub fn context(&self, mode: XferMode) -> XferContext {
        context(self.scheme, &self.design.ports, mode)
    }
}

pub fn context(scheme: PartitionScheme, ports: &PortConfig, mode: XferMode) -> XferContext {
    match mode {
        XferMode::Xfer => XferContext::new(scheme, ports, XferMode::Xfer),
        XferMode::Baseline => XferContext::baseline(scheme),
    }
}

/// Checks each design's budgets with its unclamped tile, then evaluates
/// every layer with the tile clamped to the slice.
pub fn evaluate(assignments: &[Assignment], platform: &PlatformSpec, mode: XferMode) -> Result<Vec<LayerEval>, Failure> {
    let mut violations = Vec::new();
    for a in assignments {
        let kmax = assignments
            .iter()
            .filter(|b| b.design == a.design)
            .map(|b| b.layer.kernel)
            .max()
            .unwrap_or(a.layer.kernel);
        for v in model::resource_violations(&a.design, kmax, platform) {
            if !violations.contains(&v) {
                violations.push(v);
            }
        }
    }
    if !violations.is_empty() {
        return Err(ModelError::Infeasible(violations).into());
    }
    assignments
        .iter()
        .map(|a| {
            let slice = xfer::slice_layer(&a.layer, &a.scheme)?;
            let design = a.design.clamped(&slice);
            let ctx = context(a.scheme, &design.ports, mode);
            let report = model::latency(&slice, &design, platform, Some(&ctx))?;
            let torus = (mode == XferMode::Xfer && a.scheme.fpga_count() > 1)
                .then(|| xfer::torus_bandwidth_check(&design, slice.kernel, &a.scheme, report.stage, platform));
            Ok(LayerEval { layer: a.layer.name.clone(), slice, design, scheme: a.scheme, report, torus })
        })
        .collect()
}
