// SPDX-License-Identifier: Apache-2.0

//! Network and platform description files (JSON).
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "precision": "fixed16",
//!   "layers": [
//!     {"name": "conv1", "type": "conv", "B": 1, "M": 16, "N": 3, "R": 32, "C": 32, "K": 3},
//!     {"name": "pool1", "type": "pool", "B": 1, "M": 16, "N": 16, "R": 16, "C": 16, "K": 2}
//!   ]
//! }
//! ```
//!
//! `groups` (default 1) marks a grouped convolution; each output channel then
//! reads `N/groups` input channels, which is what the model sees.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{LayerSpec, PlatformSpec, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
    Fc,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: LayerKind,
    #[serde(rename = "B", default = "one")]
    pub batch: u64,
    #[serde(rename = "M", default = "one")]
    pub out_channels: u64,
    #[serde(rename = "N", default = "one")]
    pub in_channels: u64,
    #[serde(rename = "R", default = "one")]
    pub rows: u64,
    #[serde(rename = "C", default = "one")]
    pub cols: u64,
    #[serde(rename = "K", default = "one")]
    pub kernel: u64,
    #[serde(default = "one")]
    pub groups: u64,
}

fn one() -> u64 {
    1
}

impl LayerEntry {
    pub fn is_modeled(&self) -> bool {
        self.kind == LayerKind::Conv
    }

    /// The convolution as the model sees it.
    pub fn to_layer(&self) -> Result<LayerSpec> {
        LayerSpec::new(
            self.name.clone(),
            self.batch,
            self.out_channels,
            self.in_channels / self.groups.max(1),
            self.rows,
            self.cols,
            self.kernel,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub name: String,
    #[serde(default)]
    pub precision: Option<Precision>,
    pub layers: Vec<LayerEntry>,
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: NetworkFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for l in self.layers.iter().filter(|l| l.is_modeled()) {
            if l.groups == 0 || l.out_channels % l.groups != 0 || l.in_channels % l.groups != 0 {
                return Err(ModelError::InvalidLayer {
                    name: l.name.clone(),
                    reason: format!("groups={} must divide M={} and N={}", l.groups, l.out_channels, l.in_channels),
                });
            }
            l.to_layer()?;
        }
        if !self.layers.iter().any(LayerEntry::is_modeled) {
            return Err(ModelError::Parse(format!("network `{}` has no convolution layers", self.name)));
        }
        Ok(())
    }

    /// Convolution layers in order.
    pub fn conv_layers(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .filter(|l| l.is_modeled())
            .map(|l| l.to_layer().expect("validated on load"))
            .collect()
    }

    /// The same network with every layer's batch replaced.
    pub fn with_batch(&self, batch: u64) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.batch = batch;
        }
        out
    }
}

pub fn platform_from_json(text: &str) -> Result<PlatformSpec> {
    let p: PlatformSpec = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn load_platform(path: &Path) -> Result<PlatformSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
    platform_from_json(&text)
}

/// Bundled descriptions. DSP and BRAM totals of the board come from its
/// public datasheet; BRAM is counted in 18Kb blocks.
pub mod fixtures {
    use super::*;

    pub const ZCU102: &str = include_str!("../fixtures/zcu102.json");
    pub const ALEXNET: &str = include_str!("../fixtures/alexnet.json");
    pub const VGG16: &str = include_str!("../fixtures/vgg16.json");
    pub const YOLO: &str = include_str!("../fixtures/yolo.json");
    pub const SQUEEZENET: &str = include_str!("../fixtures/squeezenet.json");

    pub const NETWORKS: [&str; 4] = ["alexnet", "vgg16", "yolo", "squeezenet"];

    pub fn zcu102() -> PlatformSpec {
        platform_from_json(ZCU102).expect("bundled platform parses")
    }

    pub fn network(name: &str) -> Option<NetworkFile> {
        let text = match name {
            "alexnet" => ALEXNET,
            "vgg16" | "vgg" => VGG16,
            "yolo" | "yolov2" => YOLO,
            "squeezenet" => SQUEEZENET,
            _ => return None,
        };
        Some(NetworkFile::from_json(text).expect("bundled network parses"))
    }

    pub fn platform(name: &str) -> Option<PlatformSpec> {
        (name == "zcu102").then(zcu102)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_networks_parse() {
        let counts = [("alexnet", 5), ("vgg16", 13), ("yolo", 23), ("squeezenet", 26)];
        for (name, convs) in counts {
            let net = fixtures::network(name).unwrap();
            assert_eq!(net.conv_layers().len(), convs, "{name}");
        }
        let p = fixtures::zcu102();
        assert_eq!((p.dsp_budget, p.bram_budget, p.bus_width, p.interlink_bw), (2520, 1824, 256, 256));
    }

    #[test]
    fn grouped_conv_halves_input_channels() {
        let net = fixtures::network("alexnet").unwrap();
        let l = net.conv_layers();
        assert_eq!(l[1].in_channels, 48);
        assert_eq!(l[4].in_channels, 192);
        assert_eq!(l[4].batch, 4);
    }

    #[test]
    fn rejects_bad_groups_and_garbage() {
        let bad = r#"{"name":"x","layers":[{"name":"c","type":"conv","B":1,"M":3,"N":4,"R":2,"C":2,"K":1,"groups":2}]}"#;
        assert!(NetworkFile::from_json(bad).is_err());
        assert!(matches!(NetworkFile::from_json("{"), Err(ModelError::Parse(_))));
        let none = r#"{"name":"x","layers":[{"name":"p","type":"pool"}]}"#;
        assert!(NetworkFile::from_json(none).is_err());
    }

    #[test]
    fn non_conv_layers_are_kept_but_unmodeled() {
        let text = r#"{"name":"x","layers":[
            {"name":"c","type":"conv","B":1,"M":4,"N":4,"R":2,"C":2,"K":1},
            {"name":"f","type":"fc","M":10,"N":16}]}"#;
        let net = NetworkFile::from_json(text).unwrap();
        assert_eq!(net.layers.len(), 2);
        assert!(!net.layers[1].is_modeled());
        assert_eq!(net.conv_layers().len(), 1);
    }
}
