//! Text traces of packet injections and a synthetic coherence-style trace
//! generator.
//!
//! One record per line, `cycle,src_node,dst_node,type,bytes`, where `type`
//! is `data` or `control` and node ids are placement site ids. Lines
//! starting with `#` and blank lines are ignored. Records must be sorted by
//! cycle.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{ChipletKind, Placement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketType {
    Data,
    Control,
}

impl fmt::Display for PacketType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketType::Data => "data",
            PacketType::Control => "control",
        })
    }
}

impl FromStr for PacketType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data" => Ok(PacketType::Data),
            "control" => Ok(PacketType::Control),
            other => Err(Error::InvalidArgument(format!("unknown packet type '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub src: usize,
    pub dst: usize,
    pub kind: PacketType,
    pub bytes: u64,
}

impl TraceRecord {
    /// Flits needed on a network whose flits carry `flit_bits` bits.
    pub fn flits(&self, flit_bits: f64) -> usize {
        match self.kind {
            PacketType::Control => 1,
            PacketType::Data if flit_bits > 0.0 => (((self.bytes * 8) as f64 / flit_bits).ceil() as usize).max(1),
            PacketType::Data => usize::MAX,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace> {
        let mut records = Vec::new();
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(parse_err(format!("expected 5 fields, found {}", fields.len())));
            }
            let num = |idx: usize, name: &str| {
                fields[idx].parse::<u64>().map_err(|_| parse_err(format!("bad {name} '{}'", fields[idx])))
            };
            let rec = TraceRecord {
                cycle: num(0, "cycle")?,
                src: num(1, "src_node")? as usize,
                dst: num(2, "dst_node")? as usize,
                kind: fields[3].parse().map_err(|_| parse_err(format!("bad type '{}'", fields[3])))?,
                bytes: num(4, "bytes")?,
            };
            if rec.cycle < last {
                return Err(parse_err(format!("cycle {} precedes previous record", rec.cycle)));
            }
            last = rec.cycle;
            records.push(rec);
        }
        Ok(Trace { records })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# cycle,src_node,dst_node,type,bytes\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.cycle, r.src, r.dst, r.kind, r.bytes);
        }
        out
    }

    /// Fails if a record names a node outside a placement of `num_sites`.
    pub fn check_nodes(&self, num_sites: usize) -> Result<()> {
        match self.records.iter().find(|r| r.src >= num_sites || r.dst >= num_sites) {
            Some(r) => Err(Error::Integrity(format!(
                "trace record at cycle {} names node {} outside {num_sites} sites",
                r.cycle,
                r.src.max(r.dst)
            ))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    Trace::parse(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenTraceParams {
    pub cycles: u64,
    /// L1 misses issued per compute chiplet per 1000 cycles.
    pub misses_per_kcycle: f64,
    /// Share of L1 misses that also write back a dirty line to L2.
    pub writeback_fraction: f64,
    /// Share of L1 misses that also miss in L2 and go to main memory.
    pub l2_miss_fraction: f64,
    /// Share of L1 misses that are writes invalidating other sharers.
    pub invalidate_fraction: f64,
    /// Sharers invalidated per invalidating write, at most.
    pub max_sharers: usize,
    /// Cycles between a request reaching L2 and its reply leaving.
    pub l2_delay: u64,
    /// Cycles between a request reaching main memory and its reply leaving.
    pub memory_delay: u64,
    pub line_bytes: u64,
    pub control_bytes: u64,
    pub seed: u64,
}

impl Default for GenTraceParams {
    fn default() -> Self {
        GenTraceParams {
            cycles: 100_000,
            misses_per_kcycle: 20.0,
            writeback_fraction: 0.3,
            l2_miss_fraction: 0.2,
            invalidate_fraction: 0.1,
            max_sharers: 2,
            l2_delay: 10,
            memory_delay: 60,
            line_bytes: 64,
            control_bytes: 8,
            seed: 1,
        }
    }
}

impl GenTraceParams {
    fn validate(&self) -> Result<()> {
        if !(self.misses_per_kcycle >= 0.0 && self.misses_per_kcycle <= 1000.0) {
            return Err(Error::Config("misses_per_kcycle must lie in [0, 1000]".into()));
        }
        let fractions = [
            ("writeback_fraction", self.writeback_fraction),
            ("l2_miss_fraction", self.l2_miss_fraction),
            ("invalidate_fraction", self.invalidate_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Synthetic coherence-style traffic on a placement with compute, memory
/// and I/O chiplets.
///
/// Node mapping: compute chiplets hold the cores and their L1 caches,
/// memory chiplets hold the shared L2 slices (lines interleaved uniformly
/// at random), and I/O chiplets hold the main-memory controllers. Per L1
/// miss:
///
/// - control request L1 → L2 home; data reply `l2_delay` cycles later;
/// - on an L2 miss the reply waits for a control request L2 → memory and a
///   data fill `memory_delay` cycles after it;
/// - optionally a dirty-line data writeback L1 → L2;
/// - on a write, control invalidations L2 → up to `max_sharers` other
///   compute chiplets, each acknowledged by a control message back to L2.
///
/// Packets whose cycle falls past `cycles` are dropped.
pub fn gen_trace(placement: &Placement, params: &GenTraceParams) -> Result<Trace> {
    params.validate()?;
    let compute: Vec<usize> = placement.sites_of_kind(ChipletKind::Compute).collect();
    let memory: Vec<usize> = placement.sites_of_kind(ChipletKind::Memory).collect();
    let io: Vec<usize> = placement.sites_of_kind(ChipletKind::Io).collect();
    if compute.is_empty() || memory.is_empty() || io.is_empty() {
        return Err(Error::Config("gen-trace needs compute, memory and io chiplets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let p_miss = params.misses_per_kcycle / 1000.0;
    let mut records = Vec::new();
    let mut push = |cycle: u64, src: usize, dst: usize, kind: PacketType| {
        if cycle < params.cycles {
            let bytes = match kind {
                PacketType::Data => params.line_bytes,
                PacketType::Control => params.control_bytes,
            };
            records.push(TraceRecord { cycle, src, dst, kind, bytes });
        }
    };
    for cycle in 0..params.cycles {
        for &l1 in &compute {
            if !rng.random_bool(p_miss) {
                continue;
            }
            let l2 = memory[rng.random_range(0..memory.len())];
            push(cycle, l1, l2, PacketType::Control);
            let mut ready = cycle + params.l2_delay;
            if rng.random_bool(params.l2_miss_fraction) {
                let mc = io[rng.random_range(0..io.len())];
                push(ready, l2, mc, PacketType::Control);
                ready += params.memory_delay;
                push(ready, mc, l2, PacketType::Data);
            }
            push(ready, l2, l1, PacketType::Data);
            if rng.random_bool(params.writeback_fraction) {
                push(cycle, l1, l2, PacketType::Data);
            }
            if compute.len() > 1 && rng.random_bool(params.invalidate_fraction) {
                let sharers = rng.random_range(1..=params.max_sharers.clamp(1, compute.len() - 1));
                let others: Vec<usize> = compute.iter().copied().filter(|&c| c != l1).collect();
                for &s in others.choose_multiple(&mut rng, sharers) {
                    push(cycle + params.l2_delay, l2, s, PacketType::Control);
                    push(cycle + 2 * params.l2_delay, s, l2, PacketType::Control);
                }
            }
        }
    }
    records.sort_by_key(|r| r.cycle);
    Ok(Trace { records })
}
