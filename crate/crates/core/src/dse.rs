// SPDX-License-Identifier: Apache-2.0

//! Exhaustive design-space search over tiles, ports and partitions.
//!
//! Tile candidates for a dimension of extent `d` are the values `⌈d/k⌉`.
//! Any other tile has the same trip count as the next smaller candidate and
//! needs at least as many resources and cycles, so restricting the search to
//! candidates loses no optimum. Points whose compute-only lower bound cannot
//! beat the incumbent are skipped.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{
    self, bram_usage, compute_lower_bound, dsp_usage, AcceleratorDesign, Bottleneck, LatencyReport, LayerSpec,
    PlatformSpec, PortConfig, Precision, TileConfig,
};
use crate::xfer::{self, PartitionScheme, XferContext, XferMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub precision: Precision,
    /// Port settings to try.
    pub ports: Vec<PortConfig>,
    /// Largest cluster considered.
    pub max_fpgas: u64,
    /// Restricts the partitions to this list when set.
    pub schemes: Option<Vec<PartitionScheme>>,
    pub mode: XferMode,
    /// Skip points whose compute lower bound cannot beat the incumbent.
    pub prune: bool,
    /// Fixes ⟨Tm, Tn⟩; rows and columns are still searched.
    pub pinned: Option<(u64, u64)>,
}

impl SearchSpace {
    pub fn new(precision: Precision, max_fpgas: u64) -> Self {
        SearchSpace {
            precision,
            ports: vec![precision.default_ports()],
            max_fpgas,
            schemes: None,
            mode: XferMode::Xfer,
            prune: true,
            pinned: None,
        }
    }

    pub fn with_ports(mut self, ports: Vec<PortConfig>) -> Self {
        self.ports = ports;
        self
    }

    pub fn with_schemes(mut self, schemes: Vec<PartitionScheme>) -> Self {
        self.schemes = Some(schemes);
        self
    }

    pub fn with_mode(mut self, mode: XferMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn unpruned(mut self) -> Self {
        self.prune = false;
        self
    }

    pub fn pinned(mut self, out_channels: u64, in_channels: u64) -> Self {
        self.pinned = Some((out_channels, in_channels));
        self
    }
}

/// Every port triple whose combined width fits the memory bus.
pub fn port_sweep(precision: Precision, bus_width: u64) -> Vec<PortConfig> {
    let lanes = bus_width / precision.bits();
    let mut out = Vec::new();
    for ip in 1..=lanes {
        for wp in 1..=lanes.saturating_sub(ip) {
            for op in 1..=lanes.saturating_sub(ip + wp) {
                out.push(PortConfig::new(ip, wp, op));
            }
        }
    }
    out
}

/// Distinct values of `⌈extent/k⌉` for `k = 1..=extent`, ascending.
pub fn tile_candidates(extent: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=extent).map(|k| extent.div_ceil(k)).collect();
    out.reverse();
    out.dedup();
    out
}

fn union_candidates(extents: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut all: Vec<u64> = extents.flat_map(tile_candidates).collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// All schemes with at most `max_fpgas` FPGAs whose factors fit every layer.
pub fn partition_schemes(layers: &[LayerSpec], max_fpgas: u64) -> Vec<PartitionScheme> {
    let lim = |f: fn(&LayerSpec) -> u64| layers.iter().map(f).min().unwrap_or(1);
    let (bl, rl, cl, ml) = (lim(|l| l.batch), lim(|l| l.rows), lim(|l| l.cols), lim(|l| l.out_channels));
    let mut out = Vec::new();
    for pb in 1..=bl.min(max_fpgas) {
        for pr in 1..=rl.min(max_fpgas / pb) {
            for pc in 1..=cl.min(max_fpgas / (pb * pr)) {
                for pm in 1..=ml.min(max_fpgas / (pb * pr * pc)) {
                    out.push(PartitionScheme::new(pb, pr, pc, pm));
                }
            }
        }
    }
    out
}

/// Ordering of candidate designs: cycles, then cluster size, then block
/// RAM, then the tile, ports and partition factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignKey {
    pub cycles: u64,
    pub fpgas: u64,
    pub bram: u64,
    pub tile: TileConfig,
    pub ports: PortConfig,
    pub scheme: PartitionScheme,
}

/// Best design found for one partition scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeBest {
    pub key: DesignKey,
    pub design: AcceleratorDesign,
    pub bottleneck: Bottleneck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub fpgas: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub design: AcceleratorDesign,
    pub scheme: PartitionScheme,
    pub layer_names: Vec<String>,
    /// Per-layer reports on the per-FPGA slice, tile clamped to the slice.
    pub reports: Vec<LatencyReport>,
    pub total_cycles: u64,
    pub bottleneck: Bottleneck,
    pub per_scheme: Vec<SchemeBest>,
    /// Fewest cycles reachable with each cluster size, keeping only sizes
    /// that improve on every smaller one.
    pub pareto: Vec<ParetoPoint>,
    pub explored: u64,
    pub pruned: u64,
    pub infeasible: u64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    explored: u64,
    pruned: u64,
    infeasible: u64,
}

impl Counters {
    fn merge(&mut self, o: &Counters) {
        self.explored += o.explored;
        self.pruned += o.pruned;
        self.infeasible += o.infeasible;
    }
}

struct GroupOutcome {
    best: Option<(DesignKey, AcceleratorDesign)>,
    counts: Counters,
}

struct Problem<'a> {
    slices: Vec<LayerSpec>,
    scheme: PartitionScheme,
    ctx: XferContext,
    platform: &'a PlatformSpec,
    space: &'a SearchSpace,
    kmax: u64,
    tm: Vec<u64>,
    tn: Vec<u64>,
    tr: Vec<u64>,
    tc: Vec<u64>,
}

impl<'a> Problem<'a> {
    fn new(layers: &[LayerSpec], scheme: PartitionScheme, platform: &'a PlatformSpec, space: &'a SearchSpace) -> Result<Self> {
        let slices = layers
            .iter()
            .map(|l| xfer::slice_layer(l, &scheme))
            .collect::<Result<Vec<_>>>()?;
        let ports = space.ports.first().copied().unwrap_or(space.precision.default_ports());
        let ctx = match space.mode {
            XferMode::Xfer => XferContext::new(scheme, &ports, XferMode::Xfer),
            XferMode::Baseline => XferContext::baseline(scheme),
        };
        let dims = |f: fn(&LayerSpec) -> u64| union_candidates(slices.iter().map(f));
        let mut tm = dims(|l| l.out_channels);
        let mut tn = dims(|l| l.in_channels);
        if let Some((pm, pn)) = space.pinned {
            let max_m = slices.iter().map(|l| l.out_channels).max().unwrap_or(1);
            let max_n = slices.iter().map(|l| l.in_channels).max().unwrap_or(1);
            tm = vec![pm.min(max_m)];
            tn = vec![pn.min(max_n)];
        }
        Ok(Problem {
            kmax: slices.iter().map(|l| l.kernel).max().unwrap_or(1),
            tr: dims(|l| l.rows),
            tc: dims(|l| l.cols),
            tm,
            tn,
            slices,
            scheme,
            ctx,
            platform,
            space,
        })
    }

    fn fits(&self, tile: &TileConfig) -> bool {
        dsp_usage(tile, self.space.precision) <= self.platform.dsp_budget
            && bram_usage(tile, self.kmax, self.space.precision).total() <= self.platform.bram_budget
    }

    fn ports(&self) -> Vec<PortConfig> {
        let bits = self.space.precision.bits();
        self.space
            .ports
            .iter()
            .copied()
            .filter(|p| p.ifm > 0 && p.weight > 0 && p.ofm > 0 && bits * p.total_lanes() <= self.platform.bus_width)
            .collect()
    }

    fn context(&self, ports: &PortConfig) -> XferContext {
        match self.ctx.mode {
            XferMode::Xfer => XferContext::new(self.scheme, ports, XferMode::Xfer),
            XferMode::Baseline => self.ctx,
        }
    }

    /// Total cycles over all slices, or `None` if a torus check fails or
    /// the running sum passes `limit`.
    fn cycles(&self, design: &AcceleratorDesign, limit: Option<u64>) -> Option<std::result::Result<u64, ()>> {
        let ctx = self.context(&design.ports);
        let check_torus = self.ctx.mode == XferMode::Xfer && self.scheme.fpga_count() > 1;
        let mut total = 0u64;
        for slice in &self.slices {
            let d = design.clamped(slice);
            let r = model::evaluate(slice, &d, Some(&ctx));
            if check_torus && !xfer::torus_bandwidth_check(&d, slice.kernel, &self.scheme, r.stage, self.platform).ok {
                return Some(Err(()));
            }
            total += r.total;
            if limit.is_some_and(|l| total > l) {
                return None;
            }
        }
        Some(Ok(total))
    }

    fn lower_bound(&self, tile: &TileConfig) -> u64 {
        self.slices
            .iter()
            .map(|s| compute_lower_bound(s, &tile.clamp_to(s)))
            .sum()
    }

    fn search_group(&self, tm: u64) -> GroupOutcome {
        let mut out = GroupOutcome {
            best: None,
            counts: Counters::default(),
        };
        let ports = self.ports();
        if ports.is_empty() {
            return out;
        }
        let (tr0, tc0) = (self.tr[0], self.tc[0]);
        for &tn in &self.tn {
            if !self.fits(&TileConfig::new(tm, tn, tr0, tc0)) {
                break;
            }
            for &tr in &self.tr {
                if !self.fits(&TileConfig::new(tm, tn, tr, tc0)) {
                    break;
                }
                for &tc in &self.tc {
                    let tile = TileConfig::new(tm, tn, tr, tc);
                    if !self.fits(&tile) {
                        break;
                    }
                    let n = ports.len() as u64;
                    out.counts.explored += n;
                    let incumbent = out.best.as_ref().map(|(k, _)| k.cycles);
                    if self.space.prune && incumbent.is_some_and(|inc| self.lower_bound(&tile) >= inc) {
                        out.counts.pruned += n;
                        continue;
                    }
                    let bram = bram_usage(&tile, self.kmax, self.space.precision).total();
                    for p in &ports {
                        let design = AcceleratorDesign::new(tile, *p, self.space.precision);
                        let incumbent = out.best.as_ref().map(|(k, _)| k.cycles);
                        let limit = if self.space.prune { incumbent } else { None };
                        let cycles = match self.cycles(&design, limit) {
                            None => continue,
                            Some(Err(())) => {
                                out.counts.infeasible += 1;
                                continue;
                            }
                            Some(Ok(c)) => c,
                        };
                        let key = DesignKey {
                            cycles,
                            fpgas: self.scheme.fpga_count(),
                            bram,
                            tile,
                            ports: *p,
                            scheme: self.scheme,
                        };
                        if out.best.as_ref().is_none_or(|(k, _)| key < *k) {
                            out.best = Some((key, design));
                        }
                    }
                }
            }
        }
        out
    }

    fn reports(&self, design: &AcceleratorDesign) -> Vec<LatencyReport> {
        let ctx = self.context(&design.ports);
        self.slices
            .iter()
            .map(|s| model::evaluate(s, &design.clamped(s), Some(&ctx)))
            .collect()
    }
}

fn network_bottleneck(reports: &[LatencyReport]) -> Bottleneck {
    reports
        .iter()
        .max_by_key(|r| r.total)
        .map(|r| r.bottleneck)
        .unwrap_or(Bottleneck::ComputeBound)
}

fn search(layers: &[LayerSpec], platform: &PlatformSpec, space: &SearchSpace) -> Result<DseResult> {
    let start = Instant::now();
    if layers.is_empty() {
        return Err(ModelError::EmptySearchSpace("no layers to optimize".into()));
    }
    for l in layers {
        l.validate()?;
    }
    platform.validate()?;
    if space.ports.is_empty() {
        return Err(ModelError::EmptySearchSpace("no port settings".into()));
    }
    let schemes = match &space.schemes {
        Some(s) => s.clone(),
        None => partition_schemes(layers, space.max_fpgas.max(1)),
    };
    if schemes.is_empty() {
        return Err(ModelError::EmptySearchSpace("no partition fits the layers".into()));
    }
    let problems = schemes
        .iter()
        .map(|s| Problem::new(layers, *s, platform, space))
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(usize, u64)> = problems
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.tm.iter().map(move |&tm| (i, tm)))
        .collect();
    let outcomes: Vec<(usize, GroupOutcome)> = groups
        .par_iter()
        .map(|&(i, tm)| (i, problems[i].search_group(tm)))
        .collect();

    let mut counts = Counters::default();
    let mut best_per: Vec<Option<(DesignKey, AcceleratorDesign)>> = vec![None; problems.len()];
    for (i, o) in outcomes {
        counts.merge(&o.counts);
        if let Some((k, d)) = o.best {
            if best_per[i].as_ref().is_none_or(|(bk, _)| k < *bk) {
                best_per[i] = Some((k, d));
            }
        }
    }

    let mut per_scheme = Vec::new();
    for (i, b) in best_per.iter().enumerate() {
        if let Some((key, design)) = b {
            per_scheme.push(SchemeBest {
                key: *key,
                design: *design,
                bottleneck: network_bottleneck(&problems[i].reports(design)),
            });
        }
    }
    let Some(winner) = per_scheme.iter().min_by(|a, b| a.key.cmp(&b.key)) else {
        return Err(ModelError::NoFeasibleDesign {
            explored: counts.explored,
        });
    };
    let idx = schemes.iter().position(|s| *s == winner.key.scheme).expect("winner scheme is listed");
    let reports = problems[idx].reports(&winner.design);

    let mut by_size: Vec<ParetoPoint> = Vec::new();
    let mut sizes: Vec<u64> = per_scheme.iter().map(|s| s.key.fpgas).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for n in sizes {
        let cycles = per_scheme
            .iter()
            .filter(|s| s.key.fpgas == n)
            .map(|s| s.key.cycles)
            .min()
            .expect("size has a scheme");
        if by_size.last().is_none_or(|p| cycles < p.cycles) {
            by_size.push(ParetoPoint { fpgas: n, cycles });
        }
    }

    Ok(DseResult {
        design: winner.design,
        scheme: winner.key.scheme,
        layer_names: layers.iter().map(|l| l.name.clone()).collect(),
        total_cycles: winner.key.cycles,
        bottleneck: network_bottleneck(&reports),
        reports,
        per_scheme: per_scheme.clone(),
        pareto: by_size,
        explored: counts.explored,
        pruned: counts.pruned,
        infeasible: counts.infeasible,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Fastest design for a single layer.
pub fn optimize_layer(layer: &LayerSpec, platform: &PlatformSpec, space: &SearchSpace) -> Result<DseResult> {
    search(std::slice::from_ref(layer), platform, space)
}

/// One tile, port setting and partition shared by every layer, minimizing
/// the summed cycles. Each layer uses the tile clamped to its own extent;
/// resources are checked on the unclamped tile.
pub fn optimize_network_uniform(layers: &[LayerSpec], platform: &PlatformSpec, space: &SearchSpace) -> Result<DseResult> {
    search(layers, platform, space)
}

/// Independent optimum for every layer.
pub fn optimize_network_per_layer(
    layers: &[LayerSpec],
    platform: &PlatformSpec,
    space: &SearchSpace,
) -> Result<Vec<DseResult>> {
    layers.iter().map(|l| optimize_layer(l, platform, space)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMethod {
    /// Re-optimize everything at every cluster size.
    #[default]
    FullSearch,
    /// Keep the single-FPGA optimum's ⟨Tm, Tn⟩ and ports, i.e. the same
    /// accelerator on every board; only rows, columns and partitions vary.
    PinnedTile,
}

impl std::str::FromStr for ScaleMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full-search" | "full" => Ok(ScaleMethod::FullSearch),
            "pinned-tile" | "pinned" => Ok(ScaleMethod::PinnedTile),
            other => Err(format!("unknown scale method `{other}`")),
        }
    }
}

/// One row of a scale study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub fpgas: u64,
    pub scheme: PartitionScheme,
    pub tile: TileConfig,
    pub cycles: u64,
    pub speedup: f64,
    pub bottleneck: Bottleneck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStudy {
    pub method: ScaleMethod,
    /// Best design of every partition scheme tried.
    pub points: Vec<ScaleRow>,
    /// Best design with at most `fpgas` FPGAs, one row per requested count.
    pub curve: Vec<ScaleRow>,
}

impl ScaleStudy {
    pub fn speedup_at(&self, fpgas: u64) -> Option<f64> {
        self.curve.iter().find(|r| r.fpgas == fpgas).map(|r| r.speedup)
    }
}

/// Best uniform design for each cluster size in `counts` (ascending,
/// starting at 1) and the speedup over a single FPGA.
pub fn scale_study(
    layers: &[LayerSpec],
    platform: &PlatformSpec,
    space: &SearchSpace,
    counts: &[u64],
    method: ScaleMethod,
) -> Result<ScaleStudy> {
    if counts.first() != Some(&1) || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::EmptySearchSpace(
            "FPGA counts must ascend strictly and start at 1".into(),
        ));
    }
    let max = *counts.last().expect("non-empty");
    let mut space = SearchSpace {
        max_fpgas: max,
        ..space.clone()
    };
    if method == ScaleMethod::PinnedTile {
        let single = optimize_network_uniform(layers, platform, &SearchSpace { max_fpgas: 1, schemes: None, ..space.clone() })?;
        space = space
            .with_ports(vec![single.design.ports])
            .pinned(single.design.tile.out_channels, single.design.tile.in_channels);
    }
    let result = optimize_network_uniform(layers, platform, &space)?;
    let base = result
        .per_scheme
        .iter()
        .filter(|s| s.key.fpgas == 1)
        .map(|s| s.key.cycles)
        .min()
        .ok_or(ModelError::NoFeasibleDesign { explored: result.explored })?;
    let row = |fpgas: u64, s: &SchemeBest| ScaleRow {
        fpgas,
        scheme: s.key.scheme,
        tile: s.design.tile,
        cycles: s.key.cycles,
        speedup: base as f64 / s.key.cycles as f64,
        bottleneck: s.bottleneck,
    };
    let points = result.per_scheme.iter().map(|s| row(s.key.fpgas, s)).collect();
    let curve = counts
        .iter()
        .filter_map(|&n| {
            result
                .per_scheme
                .iter()
                .filter(|s| s.key.fpgas <= n)
                .min_by(|a, b| a.key.cmp(&b.key))
                .map(|s| row(n, s))
        })
        .collect();
    Ok(ScaleStudy { method, points, curve })
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

    #[test]
    fn candidates_are_ceiling_quotients() {
        assert_eq!(tile_candidates(1), vec![1]);
        assert_eq!(tile_candidates(13), vec![1, 2, 3, 4, 5, 7, 13]);
        for d in 1..200u64 {
            let mut brute: Vec<u64> = (1..=d).map(|k| d.div_ceil(k)).collect();
            brute.sort_unstable();
            brute.dedup();
            assert_eq!(tile_candidates(d), brute, "extent {d}");
        }
    }

    #[test]
    fn scheme_enumeration_respects_limits() {
        let l = LayerSpec::new("l", 2, 4, 4, 3, 3, 1).unwrap();
        let s = partition_schemes(&[l], 4);
        assert!(s.iter().all(|p| p.fpga_count() <= 4 && p.batch <= 2 && p.rows <= 3));
        assert!(s.contains(&PartitionScheme::new(2, 1, 1, 2)));
        assert!(!s.contains(&PartitionScheme::new(4, 1, 1, 1)));
        assert_eq!(partition_schemes(&[], 1), vec![PartitionScheme::single()]);
    }

    #[test]
    fn port_sweep_fits_bus() {
        let p = port_sweep(Precision::Fixed16, 256);
        assert!(p.contains(&PortConfig::new(4, 8, 4)));
        assert!(p.iter().all(|x| 16 * x.total_lanes() <= 256));
    }

    #[test]
    fn unit_layer_gives_unit_design() {
        let l = LayerSpec::new("u", 1, 1, 1, 1, 1, 1).unwrap();
        let r = optimize_layer(&l, &zcu102(), &SearchSpace::new(Precision::Fixed16, 1)).unwrap();
        assert_eq!(r.design.tile, TileConfig::new(1, 1, 1, 1));
        assert_eq!(r.total_cycles, 3);
    }

    #[test]
    fn alexnet_l3_search_finds_reference_tile() {
        // DSP cost of the reference designs matches single-precision floats
        let l = LayerSpec::new("conv3", 4, 384, 256, 13, 13, 3).unwrap();
        let space = SearchSpace::new(Precision::Float32, 4).with_ports(port_sweep(Precision::Float32, 256));
        let r = optimize_layer(&l, &zcu102(), &space).unwrap();
        let dev = (r.total_cycles as f64 - 314_000.0).abs() / 314_000.0;
        assert!(dev < 0.05, "{} cycles with {:?}", r.total_cycles, r.scheme);
        assert_eq!(r.scheme, PartitionScheme::new(4, 1, 1, 1));
        assert_eq!(r.design.tile, TileConfig::new(55, 9, 13, 13));
    }

    #[test]
    fn best_is_no_worse_than_any_feasible_point() {
        let l = LayerSpec::new("l", 2, 24, 12, 6, 6, 3).unwrap();
        let space = SearchSpace::new(Precision::Fixed16, 2);
        let r = optimize_layer(&l, &zcu102(), &space).unwrap();
        for s in &r.per_scheme {
            assert!(r.total_cycles <= s.key.cycles);
        }
        for t in [TileConfig::new(24, 12, 6, 6), TileConfig::new(5, 3, 2, 6)] {
            let d = AcceleratorDesign::new(t, space.ports[0], Precision::Fixed16);
            let lat = model::latency(&l, &d, &zcu102(), None).unwrap().total;
            assert!(r.total_cycles <= lat);
        }
    }

    #[test]
    fn pruning_does_not_change_the_optimum() {
        let l = LayerSpec::new("l", 2, 40, 17, 9, 11, 3).unwrap();
        let space = SearchSpace::new(Precision::Fixed16, 3);
        let a = optimize_layer(&l, &zcu102(), &space).unwrap();
        let b = optimize_layer(&l, &zcu102(), &space.clone().unpruned()).unwrap();
        assert_eq!((a.design, a.scheme, a.total_cycles), (b.design, b.scheme, b.total_cycles));
        assert!(a.pruned > 0);
        assert_eq!(b.pruned, 0);
    }

    #[test]
    fn single_layer_uniform_equals_layer_search() {
        let l = LayerSpec::new("l", 1, 64, 32, 14, 14, 3).unwrap();
        let space = SearchSpace::new(Precision::Fixed16, 2);
        let a = optimize_layer(&l, &zcu102(), &space).unwrap();
        let b = optimize_network_uniform(std::slice::from_ref(&l), &zcu102(), &space).unwrap();
        assert_eq!((a.design, a.scheme, a.total_cycles), (b.design, b.scheme, b.total_cycles));
    }

    #[test]
    fn search_is_deterministic_across_thread_counts() {
        let layers = [
            LayerSpec::new("a", 2, 48, 16, 12, 12, 3).unwrap(),
            LayerSpec::new("b", 2, 32, 48, 6, 6, 1).unwrap(),
        ];
        let space = SearchSpace::new(Precision::Fixed16, 4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| optimize_network_uniform(&layers, &zcu102(), &space).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!((a.design, a.scheme, a.total_cycles), (b.design, b.scheme, b.total_cycles));
        assert_eq!((a.explored, a.pruned), (b.explored, b.pruned));
        assert_eq!(a.per_scheme, b.per_scheme);
    }

    #[test]
    fn infeasible_space_is_reported() {
        let l = LayerSpec::new("l", 1, 8, 8, 8, 8, 3).unwrap();
        let tiny = PlatformSpec {
            bram_budget: 1,
            ..zcu102()
        };
        let err = optimize_layer(&l, &tiny, &SearchSpace::new(Precision::Fixed16, 1)).unwrap_err();
        assert!(matches!(err, ModelError::NoFeasibleDesign { .. }));
    }

    #[test]
    fn scale_curve_is_monotone() {
        let layers = [LayerSpec::new("a", 4, 64, 32, 16, 16, 3).unwrap()];
        let space = SearchSpace::new(Precision::Fixed16, 1);
        for method in [ScaleMethod::FullSearch, ScaleMethod::PinnedTile] {
            let s = scale_study(&layers, &zcu102(), &space, &[1, 2, 3, 4], method).unwrap();
            assert_eq!(s.curve.len(), 4);
            assert_eq!(s.curve[0].speedup, 1.0);
            assert!(s.curve.windows(2).all(|w| w[1].cycles <= w[0].cycles));
            assert!(s.points.iter().all(|p| p.fpgas == p.scheme.fpga_count()));
        }
        assert!(scale_study(&layers, &zcu102(), &space, &[2, 4], ScaleMethod::FullSearch).is_err());
    }

    #[test]
    fn compute_bound_layer_scales_at_most_linearly() {
        // 1×1 kernel, few channels: compute dominates at every size
        let layers = [LayerSpec::new("c", 4, 16, 4, 32, 32, 1).unwrap()];
        let space = SearchSpace::new(Precision::Fixed16, 1);
        let s = scale_study(&layers, &zcu102(), &space, &[1, 2, 3, 4], ScaleMethod::FullSearch).unwrap();
        for r in &s.curve {
            assert!(r.speedup <= r.fpgas as f64 + 1e-9, "{r:?}");
        }
    }
}
