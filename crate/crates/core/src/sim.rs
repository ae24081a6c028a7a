// SPDX-License-Identifier: Apache-2.0

//! Discrete-event simulator of the double-buffered tile pipeline.
//!
//! Two controllers are provided.
//!
//! [`Semantics::Lockstep`] issues work in fixed-length steps: a prologue that
//! fetches the first tile pair, then for every output tile a sweep of inner
//! steps (compute trip `t` while fetching trip `t+1`) that runs alongside the
//! store of the previous output tile, then a final store. A step ends when
//! all of its operations have finished. Slots that have nothing to do still
//! occupy their full duration, the way a fixed-schedule controller behaves.
//!
//! [`Semantics::Handshake`] drops the step barrier. Every unit starts as soon
//! as its inputs are present and its destination buffer slot is free, so the
//! pipeline fills and drains faster than the fixed schedule.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterPlan, InterLayerMove};
use crate::error::{ModelError, Result};
use crate::model::{self, div_ceil, AcceleratorDesign, Bottleneck, LayerSpec, PlatformSpec};
use crate::xfer::{self, TorusVerdict, XferContext, XferMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    #[default]
    Lockstep,
    Handshake,
}

impl std::str::FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lockstep" => Ok(Semantics::Lockstep),
            "handshake" => Ok(Semantics::Handshake),
            other => Err(format!("unknown simulation semantics `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub semantics: Semantics,
    /// Keep an event log.
    pub record_events: bool,
    /// Events beyond this many are counted but not stored.
    pub event_cap: usize,
    /// Node id stamped on logged events.
    pub node: usize,
    /// Caps inter-FPGA traffic at this many bits per cycle per node; link
    /// transfers stretch when the lanes alone would exceed it.
    pub link_bandwidth: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            semantics: Semantics::Lockstep,
            record_events: false,
            event_cap: 1_000_000,
            node: 0,
            link_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    StoreOfmDone,
    ComputeDone,
    LoadIfmDone,
    LoadWeiDone,
    B2bDone,
}

impl EventKind {
    /// Processing order among events at the same cycle.
    fn rank(self) -> u8 {
        match self {
            EventKind::StoreOfmDone => 0,
            EventKind::ComputeDone => 1,
            EventKind::LoadIfmDone | EventKind::LoadWeiDone => 2,
            EventKind::B2bDone => 3,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::StoreOfmDone => "store",
            EventKind::ComputeDone => "compute",
            EventKind::LoadIfmDone => "load_ifm",
            EventKind::LoadWeiDone => "load_weight",
            EventKind::B2bDone => "b2b",
        })
    }
}

/// Loop indices (batch, spatial, out-channel, in-channel). Store events
/// carry the in-channel index of the last trip of their tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripIndex {
    pub f: u64,
    pub e: u64,
    pub d: u64,
    pub c: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: u64,
    pub node: usize,
    pub kind: EventKind,
    pub slot: u8,
    pub trip: TripIndex,
}

/// Cycles per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCycles {
    pub ifm: u64,
    pub weight: u64,
    pub compute: u64,
    pub store: u64,
    pub link: u64,
}

impl PhaseCycles {
    fn add(&mut self, kind: EventKind, cycles: u64) {
        match kind {
            EventKind::LoadIfmDone => self.ifm += cycles,
            EventKind::LoadWeiDone => self.weight += cycles,
            EventKind::ComputeDone => self.compute += cycles,
            EventKind::StoreOfmDone => self.store += cycles,
            EventKind::B2bDone => self.link += cycles,
        }
    }

    fn accumulate(&mut self, other: &PhaseCycles) {
        self.ifm += other.ifm;
        self.weight += other.weight;
        self.compute += other.compute;
        self.store += other.store;
        self.link += other.link;
    }

    pub fn max(&self) -> u64 {
        self.ifm
            .max(self.weight)
            .max(self.compute)
            .max(self.store)
            .max(self.link)
    }

    /// The largest phase; ties resolve Compute > Link > Weight > IFM > OFM.
    pub fn dominant(&self) -> Bottleneck {
        let ordered = [
            (self.compute, Bottleneck::ComputeBound),
            (self.link, Bottleneck::LinkBound),
            (self.weight, Bottleneck::WeightBound),
            (self.ifm, Bottleneck::IfmBound),
            (self.store, Bottleneck::OfmBound),
        ];
        let top = self.max();
        ordered
            .iter()
            .find(|(c, _)| *c == top)
            .map(|(_, b)| *b)
            .unwrap_or(Bottleneck::ComputeBound)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub semantics: Semantics,
    pub total_cycles: u64,
    /// Cycles each unit spent on real work. Link cycles count each trip's
    /// exchange once, however many channels it uses.
    pub busy: PhaseCycles,
    /// Cycles the pipeline spent waiting on each phase. Under lockstep each
    /// step is charged to its longest operation; under handshake this equals
    /// `busy`.
    pub stall: PhaseCycles,
    pub events: Vec<SimEvent>,
    pub events_dropped: u64,
}

impl SimTrace {
    /// Writes the event log as one JSON object per line.
    pub fn write_events_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// The phase that held the simulated pipeline up the longest.
pub fn stall_attribution(trace: &SimTrace) -> Bottleneck {
    trace.stall.dominant()
}

/// Operation durations and loop geometry, derived from the tile volumes.
#[derive(Debug, Clone, Copy)]
struct Plan {
    ifm: u64,
    weight: u64,
    compute: u64,
    store: u64,
    weight_link: u64,
    weight_channels: u64,
    ifm_link: u64,
    ifm_channels: u64,
    /// Inner trips per output tile.
    sweep: u64,
    tiles: u64,
    out_tiles_per_spatial: u64,
    spatial: u64,
}

impl Plan {
    fn new(layer: &LayerSpec, design: &AcceleratorDesign, ctx: Option<&XferContext>, opts: &SimOptions) -> Self {
        let t = &design.tile;
        let p = &design.ports;
        let k2 = layer.kernel * layer.kernel;
        let ifm_words = t.in_channels * t.rows * t.cols;
        let weight_words = t.out_channels * t.in_channels * k2;
        let ofm_words = t.out_channels * t.rows * t.cols;

        let (mut ifm_share, mut weight_share) = (1, 1);
        let (mut ifm_lanes, mut weight_lanes) = (0, 0);
        if let Some(c) = ctx.filter(|c| c.mode == XferMode::Xfer) {
            ifm_share = c.scheme.out_channels;
            weight_share = c.scheme.batch * c.scheme.rows * c.scheme.cols;
            ifm_lanes = c.ifm_lanes;
            weight_lanes = c.weight_lanes;
        }
        let mut weight_link = if weight_share > 1 {
            div_ceil(weight_words, weight_lanes * weight_share)
        } else {
            0
        };
        let mut ifm_link = if ifm_share > 1 {
            div_ceil(ifm_words, ifm_lanes * ifm_share)
        } else {
            0
        };
        if let Some(bw) = opts.link_bandwidth.filter(|_| weight_share * ifm_share > 1) {
            let bits = design.precision.bits() as u128;
            let (pm, g) = (ifm_share as u128, weight_share as u128);
            let scaled = (pm - 1) * ifm_words as u128 * bits * g + (g - 1) * weight_words as u128 * bits * pm;
            let floor = if bw == 0 {
                u64::MAX / 4
            } else {
                scaled.div_ceil(bw as u128 * pm * g) as u64
            };
            if weight_share > 1 {
                weight_link = weight_link.max(floor);
            }
            if ifm_share > 1 {
                ifm_link = ifm_link.max(floor);
            }
        }

        let sweep = div_ceil(layer.in_channels, t.in_channels);
        let out_tiles_per_spatial = div_ceil(layer.out_channels, t.out_channels);
        let spatial = div_ceil(layer.rows, t.rows) * div_ceil(layer.cols, t.cols);
        Plan {
            ifm: div_ceil(ifm_words, p.ifm * ifm_share),
            weight: div_ceil(weight_words, p.weight * weight_share),
            compute: k2 * t.rows * t.cols,
            store: div_ceil(ofm_words, p.ofm),
            weight_link,
            weight_channels: weight_share.saturating_sub(1),
            ifm_link,
            ifm_channels: ifm_share.saturating_sub(1),
            sweep,
            tiles: layer.batch * spatial * out_tiles_per_spatial,
            out_tiles_per_spatial,
            spatial,
        }
    }

    fn trips(&self) -> u64 {
        self.tiles * self.sweep
    }

    fn link(&self) -> u64 {
        self.weight_link.max(self.ifm_link)
    }

    fn index_of_tile(&self, tile: u64, c: u64) -> TripIndex {
        TripIndex {
            f: tile / (self.spatial * self.out_tiles_per_spatial),
            e: (tile / self.out_tiles_per_spatial) % self.spatial,
            d: tile % self.out_tiles_per_spatial,
            c,
        }
    }

    fn index_of_trip(&self, trip: u64) -> TripIndex {
        self.index_of_tile(trip / self.sweep, trip % self.sweep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    time: u64,
    rank: u8,
    seq: u64,
    kind: EventKind,
    /// Trip for loads, compute and links; output tile for stores.
    index: u64,
    phantom: bool,
}

struct Engine {
    plan: Plan,
    node: usize,
    queue: BinaryHeap<Reverse<Pending>>,
    now: u64,
    seq: u64,
    busy: PhaseCycles,
    record: bool,
    cap: usize,
    events: Vec<SimEvent>,
    dropped: u64,
}

impl Engine {
    fn new(plan: Plan, opts: &SimOptions) -> Self {
        Engine {
            plan,
            node: opts.node,
            queue: BinaryHeap::new(),
            now: 0,
            seq: 0,
            busy: PhaseCycles::default(),
            record: opts.record_events,
            cap: opts.event_cap,
            events: Vec::new(),
            dropped: 0,
        }
    }

    fn start(&mut self, kind: EventKind, index: u64, duration: u64, phantom: bool) {
        if !phantom && kind != EventKind::B2bDone {
            self.busy.add(kind, duration);
        }
        self.seq += 1;
        self.queue.push(Reverse(Pending {
            time: self.now + duration,
            rank: kind.rank(),
            seq: self.seq,
            kind,
            index,
            phantom,
        }));
    }

    /// Starts the link exchange for a trip: one transfer per channel, all
    /// of the same length within a sharing group. Returns the number of
    /// transfers started.
    fn start_links(&mut self, trip: u64, phantom: bool) -> usize {
        let p = self.plan;
        if !phantom {
            self.busy.link += p.link();
        }
        let mut started = 0;
        for (cycles, channels) in [(p.weight_link, p.weight_channels), (p.ifm_link, p.ifm_channels)] {
            for _ in 0..channels {
                self.start(EventKind::B2bDone, trip, cycles, phantom);
                started += 1;
            }
        }
        started
    }

    fn next(&mut self) -> Option<Pending> {
        let Reverse(ev) = self.queue.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        if self.record && !ev.phantom {
            if self.events.len() < self.cap {
                let (slot, trip) = match ev.kind {
                    EventKind::StoreOfmDone => {
                        ((ev.index % 2) as u8, self.plan.index_of_tile(ev.index, self.plan.sweep - 1))
                    }
                    _ => ((ev.index % 2) as u8, self.plan.index_of_trip(ev.index)),
                };
                self.events.push(SimEvent {
                    time: ev.time,
                    node: self.node,
                    kind: ev.kind,
                    slot,
                    trip,
                });
            } else {
                self.dropped += 1;
            }
        }
        Some(ev)
    }

    fn finish(self, semantics: Semantics, stall: PhaseCycles) -> SimTrace {
        SimTrace {
            semantics,
            total_cycles: self.now,
            busy: self.busy,
            stall,
            events: self.events,
            events_dropped: self.dropped,
        }
    }
}

/// Which trip each half of a double buffer currently holds, once loaded.
#[derive(Debug, Default)]
struct Slots {
    ifm: [Option<u64>; 2],
    weight: [Option<u64>; 2],
    link_pending: [usize; 2],
    link_trip: [Option<u64>; 2],
    ofm: [Option<u64>; 2],
}

impl Slots {
    fn input_ready(&self, trip: u64, has_link: bool) -> bool {
        let s = (trip % 2) as usize;
        self.ifm[s] == Some(trip)
            && self.weight[s] == Some(trip)
            && (!has_link || (self.link_trip[s] == Some(trip) && self.link_pending[s] == 0))
    }
}

fn hazard(time: u64, detail: String) -> ModelError {
    ModelError::BufferHazard { time, detail }
}

fn run_lockstep(plan: Plan, opts: &SimOptions) -> Result<SimTrace> {
    let mut eng = Engine::new(plan, opts);
    let mut slots = Slots::default();
    let trips = plan.trips();
    let has_link = plan.link() > 0;
    let mut stall = PhaseCycles::default();

    // Longest operation of an inner step: compute, link, weight, IFM.
    let inner_critical = {
        let len = plan.compute.max(plan.link()).max(plan.weight).max(plan.ifm);
        let kind = if plan.compute == len {
            EventKind::ComputeDone
        } else if plan.link() == len {
            EventKind::B2bDone
        } else if plan.weight == len {
            EventKind::LoadWeiDone
        } else {
            EventKind::LoadIfmDone
        };
        (kind, len)
    };

    let fetch = |eng: &mut Engine, slots: &mut Slots, trip: u64, phantom: bool| -> usize {
        let s = (trip % 2) as usize;
        if !phantom {
            slots.link_trip[s] = Some(trip);
        }
        eng.start(EventKind::LoadIfmDone, trip, plan.ifm, phantom);
        eng.start(EventKind::LoadWeiDone, trip, plan.weight, phantom);
        let links = if has_link { eng.start_links(trip, phantom) } else { 0 };
        if !phantom {
            slots.link_pending[s] = links;
        }
        2 + links
    };

    // prologue: first fetch against an idle compute slot
    let mut inner_left = fetch(&mut eng, &mut slots, 0, false);
    eng.start(EventKind::ComputeDone, 0, plan.compute, true);
    inner_left += 1;
    let mut step_start = 0;
    while let Some(ev) = eng.next() {
        inner_left -= 1;
        on_done(&ev, &mut slots, eng.now)?;
        if inner_left == 0 {
            break;
        }
    }
    stall.add(inner_critical.0, eng.now - step_start);

    for tile in 0..plan.tiles {
        let tile_start = eng.now;
        let mut sweep_stall = PhaseCycles::default();
        // store of the previous tile, or an idle store slot for the first
        let store_phantom = tile == 0;
        if !store_phantom {
            let s = ((tile - 1) % 2) as usize;
            if slots.ofm[s] != Some(tile - 1) {
                return Err(hazard(eng.now, format!("OFM tile {} not complete before store", tile - 1)));
            }
        }
        eng.start(EventKind::StoreOfmDone, tile.saturating_sub(1), plan.store, store_phantom);
        let mut store_left = 1usize;
        let mut c = 0;
        let mut sweep_done = false;
        inner_left = 0;
        while !(sweep_done && store_left == 0) {
            if inner_left == 0 && !sweep_done {
                let trip = tile * plan.sweep + c;
                if !slots.input_ready(trip, has_link) {
                    return Err(hazard(eng.now, format!("inputs of trip {trip} not loaded before compute")));
                }
                step_start = eng.now;
                eng.start(EventKind::ComputeDone, trip, plan.compute, false);
                inner_left = 1 + fetch(&mut eng, &mut slots, trip + 1, trip + 1 >= trips);
            }
            let ev = eng
                .next()
                .ok_or_else(|| ModelError::Deadlock { time: eng.now, detail: format!("tile {tile} stalled") })?;
            if ev.kind == EventKind::StoreOfmDone {
                store_left -= 1;
                continue;
            }
            inner_left -= 1;
            on_done(&ev, &mut slots, eng.now)?;
            if ev.kind == EventKind::ComputeDone && !ev.phantom && ev.index % plan.sweep == plan.sweep - 1 {
                slots.ofm[(tile % 2) as usize] = Some(tile);
            }
            if inner_left == 0 {
                sweep_stall.add(inner_critical.0, eng.now - step_start);
                c += 1;
                sweep_done = c == plan.sweep;
            }
        }
        let sweep_len = plan.sweep * inner_critical.1;
        if plan.store > sweep_len {
            stall.store += eng.now - tile_start;
        } else {
            stall.accumulate(&sweep_stall);
        }
    }

    let last = plan.tiles - 1;
    if slots.ofm[(last % 2) as usize] != Some(last) {
        return Err(hazard(eng.now, format!("OFM tile {last} not complete before store")));
    }
    let drain_start = eng.now;
    eng.start(EventKind::StoreOfmDone, last, plan.store, false);
    eng.next();
    stall.store += eng.now - drain_start;
    Ok(eng.finish(Semantics::Lockstep, stall))
}

fn on_done(ev: &Pending, slots: &mut Slots, now: u64) -> Result<()> {
    if ev.phantom {
        return Ok(());
    }
    let s = (ev.index % 2) as usize;
    match ev.kind {
        EventKind::LoadIfmDone => slots.ifm[s] = Some(ev.index),
        EventKind::LoadWeiDone => slots.weight[s] = Some(ev.index),
        EventKind::B2bDone if slots.link_trip[s] == Some(ev.index) => {
            if slots.link_pending[s] == 0 {
                return Err(hazard(now, format!("unexpected link transfer for trip {}", ev.index)));
            }
            slots.link_pending[s] -= 1;
        }
        _ => {}
    }
    Ok(())
}

fn run_handshake(plan: Plan, opts: &SimOptions) -> Result<SimTrace> {
    let mut eng = Engine::new(plan, opts);
    let trips = plan.trips();
    let has_link = plan.link() > 0;

    let (mut ifm_next, mut ifm_busy, mut ifm_done) = (0u64, false, 0u64);
    let (mut wei_next, mut wei_busy, mut wei_done) = (0u64, false, 0u64);
    let (mut link_next, mut link_left, mut link_done) = (0u64, 0usize, 0u64);
    let (mut comp_next, mut comp_busy, mut comp_done) = (0u64, false, 0u64);
    let (mut store_next, mut store_busy, mut store_done) = (0u64, false, 0u64);

    loop {
        // a fetch may overwrite the slot of trip t−2 once it has been consumed
        let slot_free = |t: u64, comp_done: u64| t < 2 || comp_done + 1 >= t;
        if !ifm_busy && ifm_next < trips && slot_free(ifm_next, comp_done) {
            eng.start(EventKind::LoadIfmDone, ifm_next, plan.ifm, false);
            ifm_busy = true;
        }
        if !wei_busy && wei_next < trips && slot_free(wei_next, comp_done) {
            eng.start(EventKind::LoadWeiDone, wei_next, plan.weight, false);
            wei_busy = true;
        }
        if has_link && link_left == 0 && link_next < trips && slot_free(link_next, comp_done) {
            link_left = eng.start_links(link_next, false);
        }
        if !comp_busy && comp_next < trips {
            let t = comp_next;
            let tile = t / plan.sweep;
            let inputs = ifm_done > t && wei_done > t && (!has_link || link_done > t);
            // the first trip of a tile writes an OFM slot that must be drained
            let ofm_free = t % plan.sweep != 0 || tile < 2 || store_done + 1 >= tile;
            if inputs && ofm_free {
                eng.start(EventKind::ComputeDone, t, plan.compute, false);
                comp_busy = true;
            }
        }
        if !store_busy && store_next < plan.tiles && comp_done >= (store_next + 1) * plan.sweep {
            eng.start(EventKind::StoreOfmDone, store_next, plan.store, false);
            store_busy = true;
        }

        let Some(ev) = eng.next() else {
            break;
        };
        match ev.kind {
            EventKind::LoadIfmDone => {
                ifm_busy = false;
                ifm_done += 1;
                ifm_next += 1;
            }
            EventKind::LoadWeiDone => {
                wei_busy = false;
                wei_done += 1;
                wei_next += 1;
            }
            EventKind::B2bDone => {
                link_left -= 1;
                if link_left == 0 {
                    link_done += 1;
                    link_next += 1;
                }
            }
            EventKind::ComputeDone => {
                comp_busy = false;
                comp_done += 1;
                comp_next += 1;
            }
            EventKind::StoreOfmDone => {
                store_busy = false;
                store_done += 1;
                store_next += 1;
            }
        }
    }
    if store_done != plan.tiles {
        return Err(ModelError::Deadlock {
            time: eng.now,
            detail: format!(
                "stored {store_done}/{} tiles, computed {comp_done}/{trips} trips",
                plan.tiles
            ),
        });
    }
    let busy = eng.busy;
    Ok(eng.finish(Semantics::Handshake, busy))
}

/// Simulates `layer` on one FPGA. With a context the layer is sliced by its
/// partition first, and under [`XferMode::Xfer`] the shared data arrives
/// partly over inter-FPGA links.
pub fn simulate(
    layer: &LayerSpec,
    design: &AcceleratorDesign,
    platform: &PlatformSpec,
    ctx: Option<&XferContext>,
    opts: &SimOptions,
) -> Result<SimTrace> {
    let slice = match ctx {
        Some(c) => {
            c.validate()?;
            xfer::slice_layer(layer, &c.scheme)?
        }
        None => {
            layer.validate()?;
            layer.clone()
        }
    };
    simulate_slice(&slice, design, platform, ctx, opts)
}

fn simulate_slice(
    slice: &LayerSpec,
    design: &AcceleratorDesign,
    platform: &PlatformSpec,
    ctx: Option<&XferContext>,
    opts: &SimOptions,
) -> Result<SimTrace> {
    model::resource_check(design, slice, platform).into_result()?;
    let plan = Plan::new(slice, design, ctx, opts);
    match opts.semantics {
        Semantics::Lockstep => run_lockstep(plan, opts),
        Semantics::Handshake => run_handshake(plan, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRun {
    pub layer: String,
    /// Total cycles of every node, indexed by node id.
    pub node_cycles: Vec<u64>,
    pub total_cycles: u64,
    pub bottleneck: Bottleneck,
    pub torus: TorusVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrace {
    pub layers: Vec<LayerRun>,
    /// Boundary moves between consecutive layers; they overlap execution
    /// and are not added to the cycle count.
    pub moves: Vec<InterLayerMove>,
    pub hidden_move_bits: u64,
    pub total_cycles: u64,
}

/// Runs every node of the cluster on its own share of each layer, using the
/// plan's scheme and design. A layer finishes when its slowest node does;
/// layers run back to back. Link traffic above the platform's inter-FPGA
/// bandwidth stretches the exchanges instead of failing.
pub fn simulate_cluster(
    plan: &ClusterPlan,
    layers: &[LayerSpec],
    platform: &PlatformSpec,
    mode: XferMode,
    opts: &SimOptions,
) -> Result<ClusterTrace> {
    let scheme = plan.scheme;
    let mut runs = Vec::with_capacity(layers.len());
    for layer in layers {
        let layer_plan = cluster::build_plan(layer, &scheme, &plan.design)?;
        let largest = xfer::slice_layer(layer, &scheme)?;
        let design = plan.design.clamped(&largest);
        let ctx = match mode {
            XferMode::Xfer => XferContext::new(scheme, &design.ports, XferMode::Xfer),
            XferMode::Baseline => XferContext::baseline(scheme),
        };
        let node_opts = SimOptions {
            record_events: false,
            link_bandwidth: (mode == XferMode::Xfer).then_some(platform.interlink_bw),
            ..opts.clone()
        };

        // nodes with the same slice behave identically
        let mut shapes: BTreeMap<(u64, u64, u64, u64), Vec<usize>> = BTreeMap::new();
        for node in &layer_plan.nodes {
            let s = node.slice_of(layer);
            shapes
                .entry((s.batch, s.out_channels, s.rows, s.cols))
                .or_default()
                .push(node.node);
        }
        let jobs: Vec<_> = shapes.into_iter().collect();
        let results: Vec<Result<(Vec<usize>, SimTrace)>> = jobs
            .into_par_iter()
            .map(|((batch, out_channels, rows, cols), nodes)| {
                let slice = LayerSpec {
                    batch,
                    out_channels,
                    rows,
                    cols,
                    ..layer.clone()
                };
                let node_design = design.clamped(&slice);
                let trace = simulate_slice(&slice, &node_design, platform, Some(&ctx), &node_opts)?;
                Ok((nodes, trace))
            })
            .collect();

        let mut node_cycles = vec![0; layer_plan.node_count()];
        let mut slowest: Option<SimTrace> = None;
        for r in results {
            let (nodes, trace) = r?;
            for n in nodes {
                node_cycles[n] = trace.total_cycles;
            }
            if slowest.as_ref().is_none_or(|s| trace.total_cycles > s.total_cycles) {
                slowest = Some(trace);
            }
        }
        let slowest = slowest.expect("plan has at least one node");
        let stage = model::evaluate(&largest, &design, Some(&ctx)).stage;
        runs.push(LayerRun {
            layer: layer.name.clone(),
            total_cycles: slowest.total_cycles,
            bottleneck: stall_attribution(&slowest),
            node_cycles,
            torus: xfer::torus_bandwidth_check(&design, layer.kernel, &scheme, stage, platform),
        });
    }
    let moves = cluster::network_moves(layers, &scheme, plan.design.precision);
    Ok(ClusterTrace {
        total_cycles: runs.iter().map(|r| r.total_cycles).sum(),
        hidden_move_bits: moves.iter().map(|m| m.volume_bits).sum(),
        layers: runs,
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PortConfig, Precision, TileConfig};
    use crate::xfer::PartitionScheme;

    fn platform() -> PlatformSpec {
        PlatformSpec {
            name: "p".into(),
            dsp_budget: 2520,
            bram_budget: 4096,
            bus_width: 256,
            interlink_bw: 256,
        }
    }

    fn conv5() -> LayerSpec {
        LayerSpec::new("conv5", 1, 256, 192, 13, 13, 3).unwrap()
    }

    fn design_a() -> AcceleratorDesign {
        AcceleratorDesign::new(TileConfig::new(8, 32, 13, 13), PortConfig::new(2, 2, 2), Precision::Float32)
    }

    fn design_c() -> AcceleratorDesign {
        AcceleratorDesign::new(TileConfig::new(64, 20, 7, 13), PortConfig::new(4, 8, 4), Precision::Fixed16)
    }

    fn lockstep() -> SimOptions {
        SimOptions::default()
    }

    #[test]
    fn single_trip_has_no_overlap() {
        let l = LayerSpec::new("one", 1, 4, 4, 4, 4, 3).unwrap();
        let d = AcceleratorDesign::new(TileConfig::new(4, 4, 4, 4), PortConfig::new(1, 1, 1), Precision::Fixed16);
        let r = model::latency(&l, &d, &platform(), None).unwrap();
        let t = simulate(&l, &d, &platform(), None, &lockstep()).unwrap();
        assert_eq!(t.total_cycles, r.phases.ofm_store + r.stage + r.tile);
        assert_eq!(t.total_cycles, r.total);
    }

    #[test]
    fn lockstep_matches_model_on_reference_designs() {
        for d in [design_a(), design_c()] {
            let r = model::latency(&conv5(), &d, &platform(), None).unwrap();
            let t = simulate(&conv5(), &d, &platform(), None, &lockstep()).unwrap();
            assert_eq!(t.total_cycles, r.total);
            assert_eq!(stall_attribution(&t), r.bottleneck);
        }
    }

    #[test]
    fn design_a_is_ifm_bound_in_simulation() {
        let t = simulate(&conv5(), &design_a(), &platform(), None, &lockstep()).unwrap();
        assert_eq!(stall_attribution(&t), Bottleneck::IfmBound);
        assert!(t.busy.ifm > t.busy.compute);
    }

    #[test]
    fn design_c_and_d_bounds() {
        let c = simulate(&conv5(), &design_c(), &platform(), None, &lockstep()).unwrap();
        assert_eq!(stall_attribution(&c), Bottleneck::WeightBound);
        let ctx = XferContext::new(PartitionScheme::new(1, 2, 1, 1), &design_c().ports, XferMode::Xfer);
        let d = simulate(&conv5(), &design_c(), &platform(), Some(&ctx), &lockstep()).unwrap();
        assert_eq!(stall_attribution(&d), Bottleneck::ComputeBound);
        let r = xfer::xfer_latency(&conv5(), &design_c(), &platform(), &ctx).unwrap();
        assert_eq!(d.total_cycles, r.total);
    }

    #[test]
    fn compute_busy_is_work_conserving() {
        for semantics in [Semantics::Lockstep, Semantics::Handshake] {
            let opts = SimOptions { semantics, ..SimOptions::default() };
            let t = simulate(&conv5(), &design_c(), &platform(), None, &opts).unwrap();
            assert_eq!(t.busy.compute, model::compute_lower_bound(&conv5(), &design_c().tile));
            assert!(t.total_cycles >= t.busy.max());
        }
    }

    #[test]
    fn handshake_never_slower_than_fixed_schedule() {
        for d in [design_a(), design_c()] {
            let lock = simulate(&conv5(), &d, &platform(), None, &lockstep()).unwrap();
            let opts = SimOptions { semantics: Semantics::Handshake, ..SimOptions::default() };
            let hs = simulate(&conv5(), &d, &platform(), None, &opts).unwrap();
            let r = model::latency(&conv5(), &d, &platform(), None).unwrap();
            assert!(hs.total_cycles <= lock.total_cycles);
            assert!(hs.total_cycles + r.phases.ofm_store + r.stage >= lock.total_cycles);
        }
    }

    #[test]
    fn event_log_ends_at_total_and_is_ordered() {
        let l = LayerSpec::new("small", 2, 8, 8, 4, 4, 3).unwrap();
        let d = AcceleratorDesign::new(TileConfig::new(4, 4, 2, 4), PortConfig::new(2, 2, 2), Precision::Fixed16);
        let opts = SimOptions { record_events: true, ..SimOptions::default() };
        let t = simulate(&l, &d, &platform(), None, &opts).unwrap();
        assert_eq!(t.events.last().unwrap().time, t.total_cycles);
        assert!(t.events.windows(2).all(|w| w[0].time <= w[1].time));
        let stores = t.events.iter().filter(|e| e.kind == EventKind::StoreOfmDone).count() as u64;
        assert_eq!(stores, model::trip_counts(&l, &d.tile).output_tiles());
        let mut buf = Vec::new();
        t.write_events_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), t.events.len());
    }

    #[test]
    fn event_cap_counts_overflow() {
        let l = LayerSpec::new("small", 2, 8, 8, 4, 4, 3).unwrap();
        let d = AcceleratorDesign::new(TileConfig::new(4, 4, 2, 4), PortConfig::new(2, 2, 2), Precision::Fixed16);
        let full = simulate(&l, &d, &platform(), None, &SimOptions { record_events: true, ..SimOptions::default() }).unwrap();
        let capped = simulate(
            &l,
            &d,
            &platform(),
            None,
            &SimOptions { record_events: true, event_cap: 5, ..SimOptions::default() },
        )
        .unwrap();
        assert_eq!(capped.events.len(), 5);
        assert_eq!(capped.events_dropped as usize, full.events.len() - 5);
        assert_eq!(capped.total_cycles, full.total_cycles);
    }

    #[test]
    fn simulation_is_deterministic() {
        let opts = SimOptions { record_events: true, semantics: Semantics::Handshake, ..SimOptions::default() };
        let a = simulate(&conv5(), &design_c(), &platform(), None, &opts).unwrap();
        let b = simulate(&conv5(), &design_c(), &platform(), None, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_design_is_rejected() {
        let d = AcceleratorDesign::new(TileConfig::new(256, 192, 13, 13), PortConfig::new(4, 8, 4), Precision::Fixed16);
        assert!(matches!(
            simulate(&conv5(), &d, &platform(), None, &lockstep()),
            Err(ModelError::Infeasible(_))
        ));
    }

    #[test]
    fn one_node_cluster_equals_simulate() {
        let l = conv5();
        let plan = cluster::build_plan(&l, &PartitionScheme::single(), &design_c()).unwrap();
        let c = simulate_cluster(&plan, &[l.clone()], &platform(), XferMode::Xfer, &lockstep()).unwrap();
        let s = simulate(&l, &design_c(), &platform(), None, &lockstep()).unwrap();
        assert_eq!(c.total_cycles, s.total_cycles);
        assert_eq!(c.layers[0].node_cycles, vec![s.total_cycles]);
    }

    #[test]
    fn symmetric_cluster_nodes_agree_and_xfer_beats_baseline() {
        let l = LayerSpec::new("l", 2, 256, 192, 13, 13, 3).unwrap();
        let scheme = PartitionScheme::new(2, 1, 1, 1);
        let plan = cluster::build_plan(&l, &scheme, &design_c()).unwrap();
        let x = simulate_cluster(&plan, &[l.clone()], &platform(), XferMode::Xfer, &lockstep()).unwrap();
        let b = simulate_cluster(&plan, &[l.clone()], &platform(), XferMode::Baseline, &lockstep()).unwrap();
        assert!(x.layers[0].node_cycles.iter().all(|&c| c == x.total_cycles));
        assert!(x.total_cycles <= b.total_cycles);
        let ctx = XferContext::new(scheme, &design_c().ports, XferMode::Xfer);
        assert_eq!(x.total_cycles, xfer::xfer_latency(&l, &design_c(), &platform(), &ctx).unwrap().total);
    }

    #[test]
    fn oversubscribed_links_stall_instead_of_failing() {
        let l = LayerSpec::new("l", 4, 256, 48, 16, 16, 1).unwrap();
        let d = AcceleratorDesign::new(TileConfig::new(64, 6, 8, 8), PortConfig::new(4, 8, 4), Precision::Fixed16);
        let plan = cluster::build_plan(&l, &PartitionScheme::new(4, 1, 1, 4), &d).unwrap();
        let roomy = simulate_cluster(&plan, &[l.clone()], &platform(), XferMode::Xfer, &lockstep()).unwrap();
        let narrow = PlatformSpec { interlink_bw: 16, ..platform() };
        let tight = simulate_cluster(&plan, &[l.clone()], &narrow, XferMode::Xfer, &lockstep()).unwrap();
        assert!(roomy.layers[0].torus.ok);
        assert!(!tight.layers[0].torus.ok);
        assert!(tight.total_cycles > roomy.total_cycles);
        assert_eq!(tight.layers[0].bottleneck, Bottleneck::LinkBound);
    }

    #[test]
    fn cluster_reports_hidden_border_moves() {
        let a = LayerSpec::new("a", 1, 16, 8, 8, 8, 3).unwrap();
        let b = LayerSpec::new("b", 1, 16, 16, 8, 8, 3).unwrap();
        let d = AcceleratorDesign::new(TileConfig::new(8, 8, 4, 8), PortConfig::new(4, 8, 4), Precision::Fixed16);
        let plan = cluster::build_plan(&a, &PartitionScheme::new(1, 2, 1, 1), &d).unwrap();
        let t = simulate_cluster(&plan, &[a, b], &platform(), XferMode::Xfer, &lockstep()).unwrap();
        assert_eq!(t.moves.len(), 1);
        assert!(t.hidden_move_bits > 0);
        assert_eq!(t.total_cycles, t.layers.iter().map(|r| r.total_cycles).sum::<u64>());
    }
}
