use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chiplet_ici::harness::{build_bundle, run_sweep, Bundle, ExperimentConfig};
use chiplet_ici::placement::{Arrangement, KindScheme, PhyPolicy};
use chiplet_ici::sim::{find_saturation, gen_trace, load_trace, replay_trace, simulate, GenTraceParams, SimStats, TrafficPattern, TrafficSpec};
use chiplet_ici::techmodel::{absolute_throughput, Substrate};
use chiplet_ici::topology::{check_table1, TopologyKind};
use chiplet_ici::{Error, Result};

#[derive(Parser)]
#[command(name = "ici", version, about = "Inter-chiplet interconnect topologies, routing and simulation")]
struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Pretty,
}

#[derive(Subcommand)]
enum Command {
    /// Write placement.json and topology.json.
    Generate(Point),
    /// Graph metrics and the closed-form table check.
    Analyze(Point),
    /// Routing tables and the deadlock-freedom report.
    Route(Point),
    /// One simulation run; finds saturation when --rate is omitted.
    Simulate {
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value = "uniform")]
        pattern: TrafficPattern,
        /// Injection rate in flits per core per cycle.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Full experiment grid to results.csv and validation.csv.
    Sweep {
        /// Restrict to these families (comma separated).
        #[arg(long, value_delimiter = ',')]
        family: Vec<TopologyKind>,
        /// Restrict to these chiplet counts (comma separated).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
    /// Replay a trace file.
    Trace {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Synthetic coherence-style trace on the compute/memory/io placement.
    GenTrace {
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 20.0)]
        misses_per_kcycle: f64,
    },
}

#[derive(Args, Clone)]
struct Point {
    #[arg(long)]
    family: TopologyKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    substrate: Option<Substrate>,
    #[arg(long)]
    arrangement: Option<Arrangement>,
    #[arg(long)]
    kind_scheme: Option<KindScheme>,
    #[arg(long)]
    phy_policy: Option<PhyPolicy>,
}

enum Outcome {
    Ok,
    ValidationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    let fmt = cli.format;
    match cli.command {
        Command::Generate(p) => {
            let b = bundle(&cfg, &p, KindScheme::Homogeneous)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("placement.json"), &b.placement.to_doc())?;
            write_json(&dir.join("topology.json"), &b.topology.to_doc())?;
            emit(fmt, &[
                ("family", b.topology.kind().to_string()),
                ("N", p.n.to_string()),
                ("shape", b.shape.to_string()),
                ("links", b.topology.links().len().to_string()),
                ("dir", dir.display().to_string()),
            ]);
            Ok(Outcome::Ok)
        }
        Command::Analyze(p) => {
            let b = bundle(&cfg, &p, KindScheme::Homogeneous)?;
            let report = check_table1(&p.family, &b.metrics, p.n);
            emit(fmt, &[
                ("family", p.family.to_string()),
                ("N", p.n.to_string()),
                ("shape", b.shape.to_string()),
                ("diameter", b.metrics.diameter.to_string()),
                ("radix", b.metrics.radix.to_string()),
                ("max range", b.metrics.max_range.to_string()),
                ("avg hops", format!("{:.4}", b.metrics.avg_hops)),
                ("max link mm", format!("{:.3}", b.metrics.max_length_mm)),
                ("table check", report.summary()),
            ]);
            if fmt == Format::Pretty {
                for c in &report.columns {
                    let exp = c.expected.map_or("-".to_string(), |e| format!("{e:.3}"));
                    println!("  {:<10} measured {:<6} expected {:<8} tol {:<4} {}{}", c.column, c.measured, exp, c.tolerance, if c.pass { "ok" } else { "FAIL" }, if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) });
                }
            }
            Ok(if report.pass() { Outcome::Ok } else { Outcome::ValidationFailed })
        }
        Command::Route(p) => {
            let b = bundle(&cfg, &p, KindScheme::Homogeneous)?;
            let r = b.routing.verify(&b.topology);
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir)?;
                write_json(&dir.join("routes.json"), &b.routing.table.to_doc())?;
            }
            match fmt {
                Format::Pretty => {
                    println!(
                        "CDG acyclic: {}; pairs routed: {}/{}",
                        if r.cdg_acyclic { "yes" } else { "no" },
                        r.pairs_routed,
                        r.pairs_total
                    );
                    println!("strategy: {}; forbidden turns: {}/{}; stretch: {:.4}", b.routing.strategy, r.forbidden_turns, r.total_turns, r.stretch());
                }
                Format::Csv => emit(fmt, &[
                    ("cdg_acyclic", r.cdg_acyclic.to_string()),
                    ("pairs_routed", r.pairs_routed.to_string()),
                    ("pairs_total", r.pairs_total.to_string()),
                    ("strategy", b.routing.strategy.to_string()),
                    ("forbidden_turns", r.forbidden_turns.to_string()),
                    ("stretch", format!("{:.4}", r.stretch())),
                ]),
            }
            Ok(if r.pass() { Outcome::Ok } else { Outcome::ValidationFailed })
        }
        Command::Simulate { point, pattern, rate } => {
            let scheme = if pattern == TrafficPattern::HeteroMix && cfg.kind_scheme == KindScheme::Homogeneous {
                KindScheme::MemColumns
            } else {
                cfg.kind_scheme
            };
            let b = bundle(&cfg, &point, scheme)?;
            let params = cfg.sim_params.apply(&b.tech, cfg.seed)?;
            let traffic = TrafficSpec { mix_core_to_mem: cfg.mix_core_to_mem, ..TrafficSpec::new(pattern) };
            let (rate, stats, note) = match rate {
                Some(r) => (r, Some(simulate(&b.topology, &b.routing.table, &b.tech, &traffic, &params, r)?), None),
                None => {
                    let sat = find_saturation(&b.topology, &b.routing.table, &b.tech, &traffic, &params)?;
                    (sat.rate, sat.stats, sat.diagnostic)
                }
            };
            let mut fields = vec![("rate", format!("{rate}"))];
            if let Some(s) = &stats {
                fields.extend(stat_fields(s, &b)?);
            }
            if let Some(n) = note {
                fields.push(("note", n));
            }
            emit(fmt, &fields);
            Ok(Outcome::Ok)
        }
        Command::Sweep { family, n } => {
            if !family.is_empty() {
                cfg.families = family;
            }
            if !n.is_empty() {
                cfg.chiplet_counts = n;
            }
            if let Some(dir) = cli.out {
                cfg.output_dir = dir;
                std::env::remove_var(chiplet_ici::harness::OUT_DIR_ENV);
            }
            let dir = cfg.resolved_output_dir();
            let out = run_sweep(&cfg)?;
            let skipped = out.rows.iter().filter(|r| r.is_skipped()).count();
            let failed = out.validation.iter().filter(|v| !v.pass).count();
            emit(fmt, &[
                ("rows", out.rows.len().to_string()),
                ("skipped", skipped.to_string()),
                ("validation failures", failed.to_string()),
                ("dir", dir.display().to_string()),
            ]);
            Ok(Outcome::Ok)
        }
        Command::Trace { point, trace } => {
            let scheme = if cfg.kind_scheme == KindScheme::Homogeneous { KindScheme::TraceCmi } else { cfg.kind_scheme };
            let b = bundle(&cfg, &point, scheme)?;
            let params = cfg.sim_params.apply(&b.tech, cfg.seed)?;
            let t = load_trace(&trace)?;
            let s = replay_trace(&b.topology, &b.routing.table, &b.tech, &t, &params)?;
            let mut fields = vec![("records", t.len().to_string())];
            fields.extend(stat_fields(&s, &b)?);
            emit(fmt, &fields);
            Ok(if s.deadlock_flag { Outcome::ValidationFailed } else { Outcome::Ok })
        }
        Command::GenTrace { point, cycles, misses_per_kcycle } => {
            let scheme = if cfg.kind_scheme == KindScheme::Homogeneous { KindScheme::TraceCmi } else { cfg.kind_scheme };
            let b = bundle(&cfg, &point, scheme)?;
            let params = GenTraceParams { cycles, misses_per_kcycle, seed: cfg.seed, ..GenTraceParams::default() };
            let t = gen_trace(&b.placement, &params)?;
            match cli.out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let path = dir.join("trace.txt");
                    fs::write(&path, t.to_text())?;
                    eprintln!("{} records to {}", t.len(), path.display());
                }
                None => print!("{}", t.to_text()),
            }
            Ok(Outcome::Ok)
        }
    }
}

fn bundle(cfg: &ExperimentConfig, p: &Point, default_scheme: KindScheme) -> Result<Bundle> {
    let substrate = p.substrate.or(cfg.substrates.first().copied()).unwrap_or(Substrate::Organic);
    let scheme = p.kind_scheme.unwrap_or(if cfg.kind_scheme == KindScheme::Homogeneous { default_scheme } else { cfg.kind_scheme });
    build_bundle(
        &p.family,
        p.n,
        cfg.technology(substrate)?,
        p.arrangement.or(cfg.arrangement),
        scheme,
        p.phy_policy.unwrap_or(cfg.phy_policy),
    )
}

fn stat_fields(s: &SimStats, b: &Bundle) -> Result<Vec<(&'static str, String)>> {
    let t_a = absolute_throughput(s.accepted_rate.min(1.0), &b.tech.params, b.metrics.radix, b.metrics.max_length_mm, &b.tech.rates)?;
    Ok(vec![
        ("offered", format!("{:.6}", s.offered_rate)),
        ("accepted", format!("{:.6}", s.accepted_rate)),
        ("T_a bits/s", format!("{t_a:.6e}")),
        ("avg latency ns", format!("{:.3}", s.avg_latency_ns)),
        ("p99 latency ns", format!("{:.3}", s.p99_latency_ns)),
        ("avg hops", format!("{:.4}", s.avg_hops)),
        ("delivered", s.delivered_packets.to_string()),
        ("deadlock", s.deadlock_flag.to_string()),
    ])
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn emit(fmt: Format, fields: &[(&str, String)]) {
    match fmt {
        Format::Pretty => {
            for (k, v) in fields {
                println!("{k}: {v}");
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let _ = w.write_record(fields.iter().map(|(k, _)| k.replace(' ', "_")));
            let _ = w.write_record(fields.iter().map(|(_, v)| v.as_str()));
            let _ = w.flush();
        }
    }
}
