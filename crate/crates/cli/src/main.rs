// SPDX-License-Identifier: Apache-2.0

//! `fpgatile`: evaluate, search, scale, simulate and plan tiled CNN
//! accelerators on one or more FPGAs.

mod input;
mod report;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpgatile_core::cluster::{build_plan, network_moves, plan_traffic, LinkDirection};
use fpgatile_core::dse::{
    optimize_network_per_layer, optimize_network_uniform, port_sweep, scale_study, ScaleMethod, ScaleRow,
    SearchSpace,
};
use fpgatile_core::model::{LayerSpec, PlatformSpec, PortConfig, Precision, TileConfig};
use fpgatile_core::network::NetworkFile;
use fpgatile_core::sim::{simulate, stall_attribution, Semantics, SimOptions};
use fpgatile_core::xfer::{PartitionScheme, XferMode};
use fpgatile_core::ModelError;
use serde_json::{json, Value};

use input::{Assignment, DesignDoc, DesignEntry, LayerEval};
use report::{Format, Report};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn parse(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::Parse(_) | ModelError::InvalidLayer { .. } | ModelError::EmptySearchSpace(_) => 2,
            ModelError::Infeasible(_)
            | ModelError::FactorExceedsDimension { .. }
            | ModelError::InvalidPartition(_)
            | ModelError::InvalidContext(_)
            | ModelError::NoFeasibleDesign { .. } => 3,
            ModelError::Deadlock { .. } | ModelError::BufferHazard { .. } => 4,
        };
        let message = match &e {
            ModelError::Infeasible(v) => {
                let list: Vec<String> = v.iter().map(|v| format!("  - {v}")).collect();
                format!("infeasible design:\n{}", list.join("\n"))
            }
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{e:#}") }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "fpgatile", version, about = "Latency model, design search and simulator for tiled CNN accelerators on FPGA clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a fixed design on every convolution layer.
    Model {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Search tiles, ports and partitions for the fastest design.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Largest cluster to consider.
        #[arg(long, default_value_t = 1)]
        fpgas: u64,
        /// One design for all layers (default).
        #[arg(long, conflicts_with = "per_layer")]
        uniform: bool,
        /// A separate design for each layer.
        #[arg(long)]
        per_layer: bool,
        #[command(flatten)]
        ports: PortArgs,
        /// Write the best-design document here (readable by `model --design`).
        #[arg(long)]
        design_out: Option<PathBuf>,
    },
    /// Best uniform design and speedup for each cluster size up to a limit.
    Scale {
        #[command(flatten)]
        common: Common,
        #[arg(long, visible_alias = "fpgas", default_value_t = 4)]
        max_fpgas: u64,
        /// full-search re-optimizes everything per size; pinned-tile keeps the
        /// single-FPGA Tm, Tn and ports.
        #[arg(long, default_value = "full-search")]
        method: ScaleMethod,
        #[command(flatten)]
        ports: PortArgs,
    },
    /// Run the cycle simulator and compare it with the model.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value = "lockstep")]
        semantics: Semantics,
        /// Write the event log as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        event_cap: usize,
    },
    /// Lay out the cluster for one layer: grid, links, assignments, traffic.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        design: DesignArgs,
        /// Layer to plan; defaults to the first convolution.
        #[arg(long)]
        layer: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Network JSON file or a bundled name (alexnet, vgg16, yolo, squeezenet).
    #[arg(long)]
    network: String,
    /// Platform JSON file or a bundled name.
    #[arg(long, default_value = "zcu102")]
    platform: String,
    /// Overrides the network's precision.
    #[arg(long)]
    precision: Option<Precision>,
    /// Overrides the batch size of every layer.
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long, default_value = "xfer")]
    mode: XferMode,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Clock for wall-time columns; 200 MHz for fixed16, 100 MHz for float32
    /// when unset.
    #[arg(long)]
    freq_mhz: Option<f64>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, value_parser = input::parse_tile, value_name = "TM,TN,TR,TC")]
    tile: Option<TileConfig>,
    #[arg(long, value_parser = input::parse_ports, value_name = "IP,WP,OP")]
    ports: Option<PortConfig>,
    #[arg(long, value_parser = input::parse_partition, value_name = "PB,PR,PC,PM")]
    partition: Option<PartitionScheme>,
    /// Best-design document written by `optimize`.
    #[arg(long, conflicts_with_all = ["tile", "ports", "partition"])]
    design: Option<PathBuf>,
}

#[derive(Args)]
struct PortArgs {
    #[arg(long, value_parser = input::parse_ports, value_name = "IP,WP,OP")]
    ports: Option<PortConfig>,
    /// Try every port split that fits the memory bus.
    #[arg(long, conflicts_with = "ports")]
    port_sweep: bool,
}

/// Inputs shared by every command after loading.
struct Context {
    network: NetworkFile,
    layers: Vec<LayerSpec>,
    platform: PlatformSpec,
    precision: Precision,
    mode: XferMode,
    freq_mhz: f64,
}

impl Context {
    fn load(common: &Common, doc_precision: Option<Precision>) -> Result<Self, Failure> {
        let mut network = input::load_network(&common.network)?;
        if let Some(b) = common.batch {
            if b == 0 {
                return Err(Failure::parse("--batch must be at least 1"));
            }
            network = network.with_batch(b);
        }
        let platform = input::load_platform(&common.platform)?;
        let precision = common
            .precision
            .or(doc_precision)
            .or(network.precision)
            .unwrap_or(Precision::Fixed16);
        let layers = network.conv_layers();
        if layers.is_empty() {
            return Err(Failure::parse(format!("network `{}` has no convolution layers", network.name)));
        }
        let freq_mhz = common.freq_mhz.unwrap_or(match precision {
            Precision::Fixed16 => 200.0,
            Precision::Float32 => 100.0,
        });
        if !freq_mhz.is_finite() || freq_mhz <= 0.0 {
            return Err(Failure::parse("--freq-mhz must be positive"));
        }
        Ok(Context { network, layers, platform, precision, mode: common.mode, freq_mhz })
    }

    fn millis(&self, cycles: u64) -> f64 {
        cycles as f64 / (self.freq_mhz * 1e3)
    }

    fn batch(&self) -> Value {
        let sizes: BTreeSet<u64> = self.layers.iter().map(|l| l.batch).collect();
        match sizes.len() {
            1 => json!(sizes.into_iter().next()),
            _ => json!(sizes.into_iter().collect::<Vec<_>>()),
        }
    }

    /// The assumption block every report starts with.
    fn assumptions(&self, report: &mut Report, ports: &[PortConfig]) {
        let ports: BTreeSet<String> = ports.iter().map(|p| p.to_string()).collect();
        report.assume("network", self.network.name.clone());
        report.assume("platform", self.platform.name.clone());
        report.assume("precision", self.precision.to_string());
        report.assume("ports (ifm,weight,ofm)", ports.into_iter().collect::<Vec<_>>().join(" "));
        report.assume("batch", self.batch());
        report.assume("transfer mode", mode_name(self.mode));
        report.assume("clock MHz", self.freq_mhz);
    }

    fn assignments(&self, args: &DesignArgs, doc: Option<&DesignDoc>) -> Result<Vec<Assignment>, Failure> {
        if let Some(doc) = doc {
            return input::doc_assignment(&self.layers, doc);
        }
        let tile = args
            .tile
            .ok_or_else(|| Failure::parse("a design needs --tile or --design"))?;
        let ports = args.ports.unwrap_or(self.precision.default_ports());
        let scheme = args.partition.unwrap_or_default();
        let design = fpgatile_core::model::AcceleratorDesign::new(tile, ports, self.precision);
        Ok(input::uniform_assignment(&self.layers, design, scheme))
    }
}

fn mode_name(mode: XferMode) -> &'static str {
    match mode {
        XferMode::Xfer => "xfer",
        XferMode::Baseline => "baseline",
    }
}

fn load_doc(args: &DesignArgs) -> Result<Option<DesignDoc>, Failure> {
    args.design.as_deref().map(DesignDoc::load).transpose()
}

fn scheme_text(s: &PartitionScheme) -> String {
    format!("{},{},{},{}", s.batch, s.rows, s.cols, s.out_channels)
}

const LAYER_COLUMNS: [&str; 16] = [
    "layer", "B", "M", "N", "R", "C", "K", "tile", "partition", "fpgas", "cycles", "time_ms", "bottleneck", "dsp",
    "bram", "link_ok",
];

fn layer_row(ctx: &Context, e: &LayerEval) -> Vec<Value> {
    let s = &e.slice;
    let r = &e.report;
    vec![
        json!(e.layer),
        json!(s.batch),
        json!(s.out_channels),
        json!(s.in_channels),
        json!(s.rows),
        json!(s.cols),
        json!(s.kernel),
        json!(e.design.tile.to_string()),
        json!(scheme_text(&e.scheme)),
        json!(e.scheme.fpga_count()),
        json!(r.total),
        json!(ctx.millis(r.total)),
        json!(r.bottleneck.to_string()),
        json!(r.usage.dsps),
        json!(r.usage.bram_total()),
        e.torus.as_ref().map_or(Value::Null, |t| json!(t.ok)),
    ]
}

fn layer_report(ctx: &Context, title: &str, evals: &[LayerEval]) -> Report {
    let mut report = Report::new(title, &LAYER_COLUMNS);
    let ports: Vec<PortConfig> = evals.iter().map(|e| e.design.ports).collect();
    ctx.assumptions(&mut report, &ports);
    report.section("", evals.iter().map(|e| layer_row(ctx, e)).collect());
    let total: u64 = evals.iter().map(|e| e.report.total).sum();
    report.note("total cycles", total);
    report.note("total time ms", ctx.millis(total));
    report.note("fpgas", evals.iter().map(|e| e.scheme.fpga_count()).max().unwrap_or(1));
    if evals.iter().any(|e| e.torus.as_ref().is_some_and(|t| !t.ok)) {
        report.note("warning", "inter-FPGA link bandwidth exceeded on some layers");
    }
    report
}

fn emit(common: &Common, report: &Report) -> Result<(), Failure> {
    match &common.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            report.render(common.format, &mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            report.render(common.format, stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_model(common: &Common, args: &DesignArgs) -> Result<u8, Failure> {
    let doc = load_doc(args)?;
    let ctx = Context::load(common, doc.as_ref().and_then(DesignDoc::precision))?;
    let mode = doc.as_ref().map_or(ctx.mode, |d| d.mode);
    let ctx = Context { mode, ..ctx };
    let evals = input::evaluate(&ctx.assignments(args, doc.as_ref())?, &ctx.platform, ctx.mode)?;
    let mut report = layer_report(&ctx, "model", &evals);
    if let Some(doc) = &doc {
        let total: u64 = evals.iter().map(|e| e.report.total).sum();
        report.note("design document cycles", doc.total_cycles);
        if total != doc.total_cycles {
            report.note("warning", "cycles differ from the design document");
        }
    }
    report.extra = Some(("layers".into(), serde_json::to_value(&evals).map_err(anyhow::Error::from)?));
    emit(common, &report)?;
    Ok(0)
}

fn space(ctx: &Context, fpgas: u64, ports: &PortArgs) -> SearchSpace {
    let list = if ports.port_sweep {
        port_sweep(ctx.precision, ctx.platform.bus_width)
    } else {
        vec![ports.ports.unwrap_or(ctx.precision.default_ports())]
    };
    SearchSpace::new(ctx.precision, fpgas).with_ports(list).with_mode(ctx.mode)
}

fn cmd_optimize(
    common: &Common,
    fpgas: u64,
    per_layer: bool,
    ports: &PortArgs,
    design_out: Option<&PathBuf>,
) -> Result<u8, Failure> {
    if fpgas == 0 {
        return Err(Failure::parse("--fpgas must be at least 1"));
    }
    let ctx = Context::load(common, None)?;
    let space = space(&ctx, fpgas, ports);
    let (entries, stats, pareto) = if per_layer {
        let results = optimize_network_per_layer(&ctx.layers, &ctx.platform, &space)?;
        let stats = results.iter().fold((0, 0, 0, 0.0), |acc, r| {
            (acc.0 + r.explored, acc.1 + r.pruned, acc.2 + r.infeasible, acc.3 + r.elapsed_secs)
        });
        let entries: Vec<DesignEntry> = results
            .into_iter()
            .map(|r| DesignEntry { layers: r.layer_names, design: r.design, scheme: r.scheme, cycles: r.total_cycles })
            .collect();
        (entries, stats, None)
    } else {
        let r = optimize_network_uniform(&ctx.layers, &ctx.platform, &space)?;
        let stats = (r.explored, r.pruned, r.infeasible, r.elapsed_secs);
        let pareto: Vec<String> = r.pareto.iter().map(|p| format!("{}:{}", p.fpgas, p.cycles)).collect();
        let entry = DesignEntry { layers: r.layer_names, design: r.design, scheme: r.scheme, cycles: r.total_cycles };
        (vec![entry], stats, Some(pareto.join(" ")))
    };
    let doc = DesignDoc {
        network: ctx.network.name.clone(),
        platform: ctx.platform.name.clone(),
        mode: ctx.mode,
        total_cycles: entries.iter().map(|e| e.cycles).sum(),
        entries,
    };
    let evals = input::evaluate(&input::doc_assignment(&ctx.layers, &doc)?, &ctx.platform, ctx.mode)?;
    let title = if per_layer { "optimize (per-layer)" } else { "optimize (uniform)" };
    let mut report = layer_report(&ctx, title, &evals);
    report.assume("max fpgas", fpgas);
    if !per_layer {
        let e = &doc.entries[0];
        report.note("design", format!("tile {} ports {} {}", e.design.tile, e.design.ports, e.scheme));
    }
    if let Some(p) = pareto {
        report.note("best cycles by cluster size", p);
    }
    report.note("explored", stats.0);
    report.note("pruned", stats.1);
    report.note("infeasible", stats.2);
    report.note("elapsed s", stats.3);
    let doc_json = serde_json::to_value(&doc).map_err(anyhow::Error::from)?;
    if let Some(path) = design_out {
        std::fs::write(path, serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)? + "\n")?;
    }
    report.extra = Some(("design_document".into(), doc_json));
    emit(common, &report)?;
    Ok(0)
}

const SCALE_COLUMNS: [&str; 12] =
    ["fpgas", "Pb", "Pr", "Pc", "Pm", "Tm", "Tn", "Tr", "Tc", "cycles", "speedup", "bottleneck"];

fn scale_row(r: &ScaleRow) -> Vec<Value> {
    let (s, t) = (&r.scheme, &r.tile);
    vec![
        json!(r.fpgas),
        json!(s.batch),
        json!(s.rows),
        json!(s.cols),
        json!(s.out_channels),
        json!(t.out_channels),
        json!(t.in_channels),
        json!(t.rows),
        json!(t.cols),
        json!(r.cycles),
        json!(r.speedup),
        json!(r.bottleneck.to_string()),
    ]
}

fn cmd_scale(common: &Common, max_fpgas: u64, method: ScaleMethod, ports: &PortArgs) -> Result<u8, Failure> {
    if max_fpgas == 0 {
        return Err(Failure::parse("--max-fpgas must be at least 1"));
    }
    let ctx = Context::load(common, None)?;
    let space = space(&ctx, max_fpgas, ports);
    let counts: Vec<u64> = (1..=max_fpgas).collect();
    let study = scale_study(&ctx.layers, &ctx.platform, &space, &counts, method)?;
    let mut report = Report::new("scale", &SCALE_COLUMNS);
    ctx.assumptions(&mut report, &space.ports);
    report.assume("method", serde_json::to_value(method).map_err(anyhow::Error::from)?);
    let mut points = study.points.clone();
    points.sort_by_key(|r| (r.fpgas, r.cycles, r.scheme));
    report.section("explored partitions", points.iter().map(scale_row).collect());
    report.section("best per cluster size", study.curve.iter().map(scale_row).collect());
    if let Some(last) = study.curve.last() {
        report.note("speedup at max", last.speedup);
    }
    emit(common, &report)?;
    Ok(0)
}

fn cmd_simulate(
    common: &Common,
    args: &DesignArgs,
    semantics: Semantics,
    trace_path: Option<&PathBuf>,
    event_cap: usize,
) -> Result<u8, Failure> {
    let doc = load_doc(args)?;
    let ctx = Context::load(common, doc.as_ref().and_then(DesignDoc::precision))?;
    let mode = doc.as_ref().map_or(ctx.mode, |d| d.mode);
    let ctx = Context { mode, ..ctx };
    let assignments = ctx.assignments(args, doc.as_ref())?;
    let evals = input::evaluate(&assignments, &ctx.platform, ctx.mode)?;
    let opts = SimOptions { semantics, record_events: trace_path.is_some(), event_cap, ..SimOptions::default() };

    let mut rows = Vec::new();
    let mut events = Vec::new();
    let mut dropped = 0;
    let (mut model_total, mut sim_total) = (0u64, 0u64);
    let mut worst: f64 = 0.0;
    for (a, e) in assignments.iter().zip(&evals) {
        let sim_ctx = e.context(ctx.mode);
        let trace = simulate(&a.layer, &e.design, &ctx.platform, Some(&sim_ctx), &opts)?;
        let deviation = trace.total_cycles.abs_diff(e.report.total) as f64 / e.report.total as f64;
        worst = worst.max(deviation);
        for ev in &trace.events {
            let mut ev = *ev;
            ev.time += sim_total;
            events.push(ev);
        }
        dropped += trace.events_dropped;
        rows.push(vec![
            json!(e.layer),
            json!(e.report.total),
            json!(trace.total_cycles),
            json!(deviation * 100.0),
            json!(e.report.bottleneck.to_string()),
            json!(stall_attribution(&trace).to_string()),
            json!(trace.busy.compute),
        ]);
        model_total += e.report.total;
        sim_total += trace.total_cycles;
    }

    let columns = ["layer", "model_cycles", "sim_cycles", "deviation_pct", "model_bottleneck", "sim_bottleneck", "compute_busy"];
    let mut report = Report::new("simulate", &columns);
    let ports: Vec<PortConfig> = evals.iter().map(|e| e.design.ports).collect();
    ctx.assumptions(&mut report, &ports);
    report.assume("semantics", serde_json::to_value(semantics).map_err(anyhow::Error::from)?);
    report.section("", rows);
    report.note("model cycles", model_total);
    report.note("sim cycles", sim_total);
    report.note("sim time ms", ctx.millis(sim_total));
    report.note("max deviation pct", worst * 100.0);
    if let Some(path) = trace_path {
        let mut f = BufWriter::new(File::create(path)?);
        for ev in &events {
            serde_json::to_writer(&mut f, ev).map_err(anyhow::Error::from)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        report.note("events written", events.len() as u64);
        report.note("events dropped", dropped);
    }
    emit(common, &report)?;
    if worst > 0.01 {
        eprintln!("model and simulator disagree by {:.3}%", worst * 100.0);
        return Ok(1);
    }
    Ok(0)
}

fn cmd_plan(common: &Common, args: &DesignArgs, layer: Option<&str>) -> Result<u8, Failure> {
    let doc = load_doc(args)?;
    let ctx = Context::load(common, doc.as_ref().and_then(DesignDoc::precision))?;
    let assignments = ctx.assignments(args, doc.as_ref())?;
    let chosen = match layer {
        Some(name) => assignments
            .iter()
            .find(|a| a.layer.name == name)
            .ok_or_else(|| Failure::parse(format!("no convolution layer named `{name}`")))?,
        None => &assignments[0],
    };
    let eval = input::evaluate(std::slice::from_ref(chosen), &ctx.platform, ctx.mode)?.remove(0);
    let plan = build_plan(&chosen.layer, &chosen.scheme, &eval.design)?;
    let traffic = plan_traffic(&plan, &ctx.platform);
    let moves = network_moves(&ctx.layers, &chosen.scheme, ctx.precision);

    let columns = ["node", "grid_row", "grid_col", "batch", "rows", "cols", "channels", "out_links"];
    let mut report = Report::new(format!("plan for {}", chosen.layer.name), &columns);
    ctx.assumptions(&mut report, &[eval.design.ports]);
    report.assume("partition", chosen.scheme.to_string());
    report.assume("tile", eval.design.tile.to_string());
    let span = |s: fpgatile_core::cluster::Span| format!("{}..{}", s.start, s.end);
    let rows = plan
        .nodes
        .iter()
        .map(|n| {
            let out: Vec<String> = plan
                .links
                .iter()
                .filter(|l| l.from == n.node)
                .map(|l| match l.direction {
                    LinkDirection::Row => format!("row->{}", l.to),
                    LinkDirection::Column => format!("col->{}", l.to),
                })
                .collect();
            vec![
                json!(n.node),
                json!(n.grid_row),
                json!(n.grid_col),
                json!(span(n.batch)),
                json!(span(n.rows)),
                json!(span(n.cols)),
                json!(format!("{}+{}k x{}", n.channels.first, n.channels.stride, n.channels.count)),
                json!(out.join(" ")),
            ]
        })
        .collect();
    report.section("", rows);
    let v = &traffic.verdict;
    report.note("grid", format!("{} rows x {} cols", plan.grid_rows(), plan.grid_cols()));
    report.note("row bits per trip", v.row_bits);
    report.note("column bits per trip", v.col_bits);
    report.note("demand bits/cycle", v.demand_bits_per_cycle);
    report.note("capacity bits/cycle", v.capacity_bits_per_cycle);
    report.note("link bandwidth ok", v.ok);
    report.note("row load imbalance", traffic.imbalance(LinkDirection::Row));
    report.note("column load imbalance", traffic.imbalance(LinkDirection::Column));
    let moved: Vec<String> = ctx
        .layers
        .windows(2)
        .zip(&moves)
        .map(|(w, m)| format!("{}->{} {:?} {} bits", w[0].name, w[1].name, m.kind, m.volume_bits))
        .collect();
    report.note("inter-layer moves", moved.join("; "));
    let plan_json: Value = serde_json::from_str(&plan.to_json()).map_err(anyhow::Error::from)?;
    report.extra = Some((
        "plan".into(),
        json!({"cluster": plan_json, "traffic": traffic, "moves": moves}),
    ));
    emit(common, &report)?;
    if !v.ok {
        eprintln!("warning: link demand {:.1} bits/cycle exceeds {}", v.demand_bits_per_cycle, v.capacity_bits_per_cycle);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Model { common, design } => cmd_model(common, design),
        Command::Optimize { common, fpgas, uniform: _, per_layer, ports, design_out } => {
            cmd_optimize(common, *fpgas, *per_layer, ports, design_out.as_ref())
        }
        Command::Scale { common, max_fpgas, method, ports } => cmd_scale(common, *max_fpgas, *method, ports),
        Command::Simulate { common, design, semantics, trace, event_cap } => {
            cmd_simulate(common, design, *semantics, trace.as_ref(), *event_cap)
        }
        Command::Plan { common, design, layer } => cmd_plan(common, design, layer.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
