//! Experiment orchestration: configs, per-point bundles, sweeps and CSV
//! output.
//!
//! A sweep visits every (family, N, substrate, pattern) point in config
//! order, runs generate → route → saturation search → latency run, and
//! writes `results.csv` and `validation.csv`. Failures at a point become
//! rows with a `skipped_reason`; they never abort the sweep.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{assign_kinds, build_placement, centered_hex_radius, Arrangement, Dims, KindScheme, Placement, PhyPolicy};
use crate::routing::Routing;
use crate::sim::{find_saturation, replay_trace, simulate, load_trace, SimParams, Trace, TrafficPattern, TrafficSpec};
use crate::techmodel::{absolute_throughput, chiplet_area_mm2, system_power_w, RateTable, Substrate, TechParams, Technology};
use crate::topology::{check_table1, generate_topology_with, graph_metrics, GraphMetrics, Topology, TopologyKind, ValidationReport};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "ICI_OUT_DIR";

pub const DEFAULT_COUNTS: [usize; 7] = [16, 36, 64, 100, 144, 196, 256];

pub const RESULT_HEADER: [&str; 15] = [
    "family",
    "N",
    "substrate",
    "pattern",
    "T_r",
    "T_a_bits_per_s",
    "avg_latency_ns",
    "diameter",
    "radix",
    "max_range",
    "L_hat_mm",
    "area_mm2_per_chiplet",
    "power_w",
    "skipped_reason",
    "validation_note",
];

pub const VALIDATION_HEADER: [&str; 12] = [
    "family",
    "N",
    "shape",
    "diameter",
    "diameter_expected",
    "radix",
    "radix_expected",
    "link_range",
    "link_range_expected",
    "pass",
    "note",
    "routing",
];

/// Optional replacements for technology defaults, applied per substrate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TechOverrides {
    pub spacing_um: Option<f64>,
    pub chiplet_area_mm2: Option<f64>,
    pub phy_area_mm2: Option<f64>,
    pub chiplet_power_w: Option<f64>,
    pub energy_per_bit_pj: Option<f64>,
    pub phy_latency_ns: Option<f64>,
    pub router_latency_ns: Option<f64>,
    pub power_bump_fraction: Option<f64>,
    pub io_bump_fraction: Option<f64>,
    pub cores_per_chiplet: Option<usize>,
    pub bump_pitch_um: Option<f64>,
    pub non_data_wires: Option<u64>,
    pub dielectric_constant: Option<f64>,
    pub cycle_time_ns: Option<f64>,
    /// (length mm, fraction) anchors replacing the substrate's rate table.
    pub rate_anchors: Option<Vec<(f64, f64)>>,
    pub rate_cutoff_mm: Option<f64>,
}

impl TechOverrides {
    pub fn apply(&self, substrate: Substrate, max_wire_rate_gbps: f64) -> Result<Technology> {
        let mut p = TechParams::defaults(substrate, max_wire_rate_gbps);
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(
            spacing_um,
            chiplet_area_mm2,
            phy_area_mm2,
            chiplet_power_w,
            energy_per_bit_pj,
            phy_latency_ns,
            router_latency_ns,
            power_bump_fraction,
            io_bump_fraction,
            cores_per_chiplet,
            bump_pitch_um,
            non_data_wires,
            dielectric_constant,
            cycle_time_ns
        );
        let mut rates = RateTable::default_for(substrate);
        if let Some(a) = &self.rate_anchors {
            rates.anchors = a.clone();
        }
        if let Some(c) = self.rate_cutoff_mm {
            rates.cutoff_mm = c;
        }
        Technology::new(p, rates)
    }
}

/// Optional replacements for simulator defaults. Router and PHY latencies
/// always follow the technology.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOverrides {
    pub vcs: Option<usize>,
    pub buf_flits_per_vc: Option<usize>,
    pub warmup_cycles: Option<u64>,
    pub measure_cycles: Option<u64>,
    pub drain_cycle_cap: Option<u64>,
    pub packet_flits: Option<usize>,
    pub stall_cycles: Option<u64>,
    pub sat_accept_ratio: Option<f64>,
    pub sat_latency_factor: Option<f64>,
    pub sat_resolution: Option<u32>,
    pub trace_cycle_cap: Option<u64>,
}

impl SimOverrides {
    pub fn apply(&self, tech: &Technology, seed: u64) -> Result<SimParams> {
        let mut p = SimParams { seed, ..SimParams::from_tech(tech) };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(
            vcs,
            buf_flits_per_vc,
            warmup_cycles,
            measure_cycles,
            drain_cycle_cap,
            packet_flits,
            stall_cycles,
            sat_accept_ratio,
            sat_latency_factor,
            sat_resolution,
            trace_cycle_cap
        );
        p.validate()?;
        Ok(p)
    }
}

/// Sweep description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub families: Vec<TopologyKind>,
    pub chiplet_counts: Vec<usize>,
    pub substrates: Vec<Substrate>,
    /// Forces one arrangement for every family; by default grids for grid
    /// families and hexagons or hex blocks for hex families.
    pub arrangement: Option<Arrangement>,
    pub kind_scheme: KindScheme,
    pub patterns: Vec<TrafficPattern>,
    /// Memory-bound share of hetero_mix packets.
    pub mix_core_to_mem: f64,
    /// Trace file replayed for the `trace` pattern.
    pub trace_path: Option<PathBuf>,
    pub tech: TechOverrides,
    pub sim_params: SimOverrides,
    pub phy_policy: PhyPolicy,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; all available cores when unset.
    pub jobs: Option<usize>,
    /// Load, as a fraction of saturation, at which latency is measured.
    pub latency_load_fraction: f64,
    pub max_wire_rate_gbps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            families: TopologyKind::BUILTIN.to_vec(),
            chiplet_counts: DEFAULT_COUNTS.to_vec(),
            substrates: vec![Substrate::Organic],
            arrangement: None,
            kind_scheme: KindScheme::Homogeneous,
            patterns: vec![TrafficPattern::Uniform],
            mix_core_to_mem: 0.5,
            trace_path: None,
            tech: TechOverrides::default(),
            sim_params: SimOverrides::default(),
            phy_policy: PhyPolicy::Edge,
            output_dir: PathBuf::from("out"),
            seed: 1,
            jobs: None,
            latency_load_fraction: 0.3,
            max_wire_rate_gbps: 32.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&n) = self.chiplet_counts.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("chiplet count {n} is below 2")));
        }
        if !(self.latency_load_fraction > 0.0 && self.latency_load_fraction <= 1.0) {
            return Err(Error::Config("latency_load_fraction must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mix_core_to_mem) {
            return Err(Error::Config("mix_core_to_mem must lie in [0, 1]".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for &s in &self.substrates {
            let tech = self.tech.apply(s, self.max_wire_rate_gbps)?;
            self.sim_params.apply(&tech, self.seed)?;
        }
        Ok(())
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn technology(&self, substrate: Substrate) -> Result<Technology> {
        self.tech.apply(substrate, self.max_wire_rate_gbps)
    }
}

/// Factorization `r × c = n` with `r ≤ c` and `r` as large as possible.
pub fn squarest(n: usize) -> (usize, usize) {
    let mut r = (n as f64).sqrt() as usize;
    while r > 1 && n % r != 0 {
        r -= 1;
    }
    (r.max(1), n / r.max(1))
}

/// Placement shape a family uses for `n` chiplets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub arrangement: Arrangement,
    pub dims: Dims,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dims {
            Dims::Rect { rows, cols } => write!(f, "{} {rows}x{cols}", self.arrangement),
            Dims::Hex { radius } => write!(f, "{} r{radius}", self.arrangement),
        }
    }
}

pub fn shape_for(kind: &TopologyKind, n: usize, arrangement: Option<Arrangement>) -> Result<Shape> {
    if n == 0 {
        return Err(Error::InvalidArgument("chiplet count must be positive".into()));
    }
    let arrangement = arrangement.unwrap_or_else(|| kind.default_arrangement(n));
    let dims = match arrangement {
        Arrangement::HexSpiral => Dims::Hex {
            radius: centered_hex_radius(n)
                .ok_or_else(|| Error::Config(format!("{n} is not a centered hexagonal number")))?,
        },
        Arrangement::Grid | Arrangement::HexBlock => {
            let (rows, cols) = squarest(n);
            Dims::Rect { rows, cols }
        }
    };
    Ok(Shape { arrangement, dims })
}

/// Everything needed to simulate one (family, N, substrate) point.
#[derive(Debug)]
pub struct Bundle {
    pub shape: Shape,
    pub placement: Placement,
    pub topology: Topology,
    pub metrics: GraphMetrics,
    pub routing: Routing,
    pub tech: Technology,
}

pub fn build_bundle(
    kind: &TopologyKind,
    n: usize,
    tech: Technology,
    arrangement: Option<Arrangement>,
    kind_scheme: KindScheme,
    phy_policy: PhyPolicy,
) -> Result<Bundle> {
    let shape = shape_for(kind, n, arrangement)?;
    let placement = build_placement(shape.arrangement, shape.dims, tech.params.chiplet_area_mm2, tech.params.spacing_mm())?;
    let placement = assign_kinds(&placement, kind_scheme)?;
    let topology = generate_topology_with(kind, &placement, phy_policy)?;
    let metrics = graph_metrics(&topology)?;
    let routing = Routing::build(&topology)?;
    Ok(Bundle { shape, placement, topology, metrics, routing, tech })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub substrate: String,
    pub pattern: String,
    #[serde(rename = "T_r")]
    pub t_r: Option<f64>,
    #[serde(rename = "T_a_bits_per_s")]
    pub t_a_bits_per_s: Option<f64>,
    pub avg_latency_ns: Option<f64>,
    pub diameter: Option<usize>,
    pub radix: Option<usize>,
    pub max_range: Option<usize>,
    #[serde(rename = "L_hat_mm")]
    pub l_hat_mm: Option<f64>,
    pub area_mm2_per_chiplet: Option<f64>,
    pub power_w: Option<f64>,
    pub skipped_reason: Option<String>,
    pub validation_note: Option<String>,
}

impl ResultRow {
    pub fn is_skipped(&self) -> bool {
        self.skipped_reason.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub shape: String,
    pub diameter: Option<usize>,
    pub diameter_expected: Option<f64>,
    pub radix: Option<usize>,
    pub radix_expected: Option<f64>,
    pub link_range: Option<usize>,
    pub link_range_expected: Option<f64>,
    pub pass: bool,
    pub note: String,
    /// Turn strategy chosen and routing stretch.
    pub routing: String,
}

impl ValidationRow {
    fn from_report(bundle: &Bundle, report: &ValidationReport) -> ValidationRow {
        let expected = |col: &str| report.columns.iter().find(|c| c.column == col).and_then(|c| c.expected);
        let notes: Vec<&str> = report.columns.iter().map(|c| c.note.as_str()).filter(|s| !s.is_empty()).collect();
        let mut note = if report.pass() { String::new() } else { report.summary() };
        if !notes.is_empty() {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str(&notes.join("; "));
        }
        let verify = bundle.routing.verify(&bundle.topology);
        ValidationRow {
            family: report.family.clone(),
            n: report.n,
            shape: bundle.shape.to_string(),
            diameter: Some(bundle.metrics.diameter),
            diameter_expected: expected("diameter"),
            radix: Some(bundle.metrics.radix),
            radix_expected: expected("radix"),
            link_range: Some(bundle.metrics.max_range),
            link_range_expected: expected("link_range"),
            pass: report.pass() && verify.pass(),
            note,
            routing: format!("{} stretch {:.4}", bundle.routing.strategy, verify.stretch()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub validation: Vec<ValidationRow>,
}

/// Runs the sweep and writes `results.csv` and `validation.csv` to the
/// resolved output directory.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    let dir = config.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let out = sweep(config)?;
    write_outputs(&out, &dir)?;
    Ok(out)
}

/// Computes a sweep without writing anything.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let trace = match (&config.trace_path, config.patterns.contains(&TrafficPattern::Trace)) {
        (Some(p), true) => Some(load_trace(p)),
        _ => None,
    };
    let mut units = Vec::new();
    for family in &config.families {
        for &n in &config.chiplet_counts {
            for (si, &substrate) in config.substrates.iter().enumerate() {
                units.push((family, n, substrate, si == 0));
            }
        }
    }
    let run = || -> Vec<(Vec<ResultRow>, Option<ValidationRow>)> {
        units
            .par_iter()
            .map(|&(family, n, substrate, first)| evaluate_point(config, family, n, substrate, first, trace.as_ref()))
            .collect()
    };
    let results = match config.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {j} workers: {e}")))?
            .install(run),
        None => run(),
    };
    let mut out = SweepOutput::default();
    for (rows, validation) in results {
        out.rows.extend(rows);
        out.validation.extend(validation);
    }
    Ok(out)
}

fn evaluate_point(
    config: &ExperimentConfig,
    family: &TopologyKind,
    n: usize,
    substrate: Substrate,
    with_validation: bool,
    trace: Option<&Result<Trace>>,
) -> (Vec<ResultRow>, Option<ValidationRow>) {
    let base = ResultRow { family: family.name().to_string(), n, substrate: substrate.name().to_string(), ..ResultRow::default() };
    let skip_all = |reason: String| {
        let rows = config
            .patterns
            .iter()
            .map(|p| ResultRow { pattern: p.name().to_string(), skipped_reason: Some(reason.clone()), ..base.clone() })
            .collect();
        let validation = with_validation.then(|| ValidationRow {
            family: base.family.clone(),
            n,
            shape: shape_for(family, n, config.arrangement).map(|s| s.to_string()).unwrap_or_default(),
            note: format!("skipped: {reason}"),
            ..ValidationRow::default()
        });
        (rows, validation)
    };
    let bundle = config
        .technology(substrate)
        .and_then(|tech| build_bundle(family, n, tech, config.arrangement, config.kind_scheme, config.phy_policy));
    let bundle = match bundle {
        Ok(b) => b,
        Err(e) => return skip_all(e.to_string()),
    };
    let report = check_table1(family, &bundle.metrics, n);
    let validation = with_validation.then(|| ValidationRow::from_report(&bundle, &report));
    let table_note = (!report.pass()).then(|| report.summary());
    let rows = config
        .patterns
        .iter()
        .map(|&pattern| {
            let mut row = ResultRow {
                pattern: pattern.name().to_string(),
                diameter: Some(bundle.metrics.diameter),
                radix: Some(bundle.metrics.radix),
                max_range: Some(bundle.metrics.max_range),
                l_hat_mm: Some(bundle.metrics.max_length_mm),
                area_mm2_per_chiplet: Some(chiplet_area_mm2(&bundle.tech.params, bundle.metrics.radix)),
                validation_note: table_note.clone(),
                ..base.clone()
            };
            if let Err(e) = measure(config, &bundle, pattern, trace, &mut row) {
                row.skipped_reason = Some(e.to_string());
            }
            row
        })
        .collect();
    (rows, validation)
}

fn append_note(row: &mut ResultRow, note: String) {
    row.validation_note = Some(match row.validation_note.take() {
        Some(prev) => format!("{prev}; {note}"),
        None => note,
    });
}

fn measure(
    config: &ExperimentConfig,
    bundle: &Bundle,
    pattern: TrafficPattern,
    trace: Option<&Result<Trace>>,
    row: &mut ResultRow,
) -> Result<()> {
    let tech = &bundle.tech;
    let params = config.sim_params.apply(tech, config.seed)?;
    let topo = &bundle.topology;
    let table = &bundle.routing.table;
    let radix = bundle.metrics.radix;
    let lhat = bundle.metrics.max_length_mm;
    let logic_only = system_power_w(&tech.params, topo.num_sites(), &[]);

    if pattern == TrafficPattern::Trace {
        let trace = match trace {
            Some(Ok(t)) => t,
            Some(Err(e)) => return Err(Error::Config(format!("trace unavailable: {e}"))),
            None => return Err(Error::Config("trace pattern needs trace_path".into())),
        };
        let stats = replay_trace(topo, table, tech, trace, &params)?;
        let t_r = stats.accepted_rate.min(1.0);
        row.t_r = Some(t_r);
        row.t_a_bits_per_s = Some(absolute_throughput(t_r, &tech.params, radix, lhat, &tech.rates)?);
        row.avg_latency_ns = (stats.delivered_packets > 0).then_some(stats.avg_latency_ns);
        row.power_w = Some(system_power_w(&tech.params, topo.num_sites(), &stats.per_channel_bits_per_s(params.cycle_time_ns)));
        if stats.deadlock_flag {
            append_note(row, "trace replay did not drain".into());
        }
        return Ok(());
    }

    let traffic = TrafficSpec { mix_core_to_mem: config.mix_core_to_mem, ..TrafficSpec::new(pattern) };
    let sat = find_saturation(topo, table, tech, &traffic, &params)?;
    row.t_r = Some(sat.rate);
    row.t_a_bits_per_s = Some(absolute_throughput(sat.rate, &tech.params, radix, lhat, &tech.rates)?);
    row.power_w = Some(match &sat.stats {
        Some(s) => system_power_w(&tech.params, topo.num_sites(), &s.per_channel_bits_per_s(params.cycle_time_ns)),
        None => logic_only,
    });
    if sat.rate > 0.0 {
        let stats = simulate(topo, table, tech, &traffic, &params, sat.rate * config.latency_load_fraction)?;
        row.avg_latency_ns = (stats.delivered_packets > 0).then_some(stats.avg_latency_ns);
        if stats.deadlock_flag {
            append_note(row, "latency run did not drain".into());
        }
    }
    if let Some(d) = sat.diagnostic {
        append_note(row, format!("T_r = 0: {d}"));
    }
    Ok(())
}

/// Writes both CSV files into `dir`.
pub fn write_outputs(out: &SweepOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(&out.rows)?)?;
    fs::write(dir.join("validation.csv"), validation_csv(&out.validation)?)?;
    Ok(())
}

fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(&RESULT_HEADER, rows)
}

pub fn validation_csv(rows: &[ValidationRow]) -> Result<String> {
    to_csv(&VALIDATION_HEADER, rows)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
