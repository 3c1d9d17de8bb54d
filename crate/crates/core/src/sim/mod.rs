//! Flit-level network simulation.
//!
//! [`Simulator`] is the cycle engine. [`simulate`] drives it with synthetic
//! traffic, [`replay_trace`] with a packet trace, and [`find_saturation`]
//! binary-searches the highest sustainable injection rate.

mod network;
pub mod trace;
pub mod traffic;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::RoutingTable;
use crate::techmodel::{flit_bits, Technology};
use crate::topology::Topology;

pub use network::{Counters, Simulator};
pub use trace::{gen_trace, load_trace, GenTraceParams, PacketType, Trace, TraceRecord};
pub use traffic::{derangement, gen_destination, DestinationGen, TrafficPattern, TrafficSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub vcs: usize,
    pub buf_flits_per_vc: usize,
    pub cycle_time_ns: f64,
    pub router_latency_cycles: u64,
    pub phy_latency_cycles: u64,
    pub warmup_cycles: u64,
    pub measure_cycles: u64,
    pub drain_cycle_cap: u64,
    pub packet_flits: usize,
    pub seed: u64,
    /// Cycles without any flit movement, while flits are in flight, after
    /// which the network is declared deadlocked.
    pub stall_cycles: u64,
    pub sat_accept_ratio: f64,
    pub sat_latency_factor: f64,
    pub sat_resolution: u32,
    /// Trace replay stops injecting at this cycle.
    pub trace_cycle_cap: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            vcs: 4,
            buf_flits_per_vc: 4,
            cycle_time_ns: 1.0,
            router_latency_cycles: 3,
            phy_latency_cycles: 2,
            warmup_cycles: 5000,
            measure_cycles: 20_000,
            drain_cycle_cap: 50_000,
            packet_flits: 4,
            seed: 1,
            stall_cycles: 2000,
            sat_accept_ratio: 0.95,
            sat_latency_factor: 10.0,
            sat_resolution: 256,
            trace_cycle_cap: 100_000,
        }
    }
}

impl SimParams {
    /// Defaults with router and PHY latencies taken from the technology.
    pub fn from_tech(tech: &Technology) -> SimParams {
        SimParams {
            cycle_time_ns: tech.params.cycle_time_ns,
            router_latency_cycles: tech.params.router_latency_cycles(),
            phy_latency_cycles: tech.params.phy_latency_cycles(),
            ..SimParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vcs", self.vcs as u64),
            ("buf_flits_per_vc", self.buf_flits_per_vc as u64),
            ("router_latency_cycles", self.router_latency_cycles),
            ("measure_cycles", self.measure_cycles),
            ("packet_flits", self.packet_flits as u64),
            ("stall_cycles", self.stall_cycles),
            ("sat_resolution", self.sat_resolution as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.cycle_time_ns > 0.0) {
            return Err(Error::Config("cycle_time_ns must be positive".into()));
        }
        if !(self.sat_accept_ratio > 0.0 && self.sat_accept_ratio <= 1.0) || !(self.sat_latency_factor > 1.0) {
            return Err(Error::Config("saturation thresholds out of range".into()));
        }
        Ok(())
    }
}

/// A delivered packet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub src_site: usize,
    pub dst_site: usize,
    pub src_core: usize,
    pub dst_core: usize,
    pub flits: usize,
    pub hops: usize,
    pub inject_cycle: u64,
    pub eject_cycle: u64,
}

impl Packet {
    pub fn latency(&self) -> u64 {
        self.eject_cycle - self.inject_cycle
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimStats {
    /// Flits per injecting core per cycle generated in the measurement window.
    pub offered_rate: f64,
    /// Flits per injecting core per cycle of measured packets ejected in the window.
    pub accepted_rate: f64,
    pub avg_latency_ns: f64,
    pub p99_latency_ns: f64,
    /// Mean zero-load latency of the measured packets delivered.
    pub zero_load_latency_ns: f64,
    pub avg_hops: f64,
    pub delivered_packets: u64,
    pub measured_packets: u64,
    /// Bits carried per channel inside the measurement window.
    pub per_channel_bits: Vec<f64>,
    pub flit_bits: f64,
    pub measure_cycles: u64,
    pub cycles: u64,
    pub deadlock_flag: bool,
    /// Smallest latency minus zero-load bound over delivered packets.
    pub min_latency_slack: Option<i64>,
    pub in_flight_flits: u64,
}

impl SimStats {
    /// Average bits per second per channel direction over the window.
    pub fn per_channel_bits_per_s(&self, cycle_time_ns: f64) -> Vec<f64> {
        let secs = self.measure_cycles as f64 * cycle_time_ns * 1e-9;
        self.per_channel_bits.iter().map(|b| b / secs).collect()
    }
}

/// Flit width of a topology under a technology; zero if its longest link
/// is beyond the cutoff.
pub fn topology_flit_bits(topology: &Topology, tech: &Technology) -> Result<f64> {
    flit_bits(&tech.params, topology.max_degree(), topology.max_link_length_mm(), &tech.rates)
}

struct Run {
    drain: bool,
}

pub fn simulate(
    topology: &Topology,
    table: &RoutingTable,
    tech: &Technology,
    traffic: &TrafficSpec,
    params: &SimParams,
    injection_rate: f64,
) -> Result<SimStats> {
    if traffic.pattern == TrafficPattern::Trace {
        let trace = traffic.trace.as_ref().ok_or_else(|| Error::Config("trace pattern without a trace".into()))?;
        return replay_trace(topology, table, tech, trace, params);
    }
    run_synthetic(topology, table, tech, traffic, params, injection_rate, Run { drain: true })
}

fn run_synthetic(
    topology: &Topology,
    table: &RoutingTable,
    tech: &Technology,
    traffic: &TrafficSpec,
    params: &SimParams,
    rate: f64,
    run: Run,
) -> Result<SimStats> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("injection rate must lie in [0, 1], got {rate}")));
    }
    let mut sim = Simulator::new(topology, table, tech, params)?;
    let gen = DestinationGen::new(traffic, topology.placement(), params.seed)?;
    let cores = sim.cores_per_chiplet();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let p = rate / params.packet_flits as f64;
    let mut heap = BinaryHeap::new();
    let geo = if p > 0.0 { Some(Geometric::new(p).map_err(|e| Error::InvalidArgument(e.to_string()))?) } else { None };
    if let Some(geo) = &geo {
        for src_idx in 0..gen.sources().len() {
            for core in 0..cores {
                heap.push(Reverse((geo.sample(&mut rng), (src_idx * cores + core) as u32)));
            }
        }
    }
    let start = params.warmup_cycles;
    let end = start + params.measure_cycles;
    sim.set_window(start, end);
    let mut deadlock = false;
    while sim.now() < end {
        let now = sim.now();
        while let Some(&Reverse((t, gid))) = heap.peek() {
            if t > now {
                break;
            }
            heap.pop();
            let gid = gid as usize;
            let src = gen.sources()[gid / cores];
            let dst = gen.sample(src, &mut rng);
            let dst_core = rng.random_range(0..cores);
            sim.inject(src, dst, gid % cores, dst_core, params.packet_flits, now >= start)?;
            let gap = geo.as_ref().expect("packets only exist when p > 0").sample(&mut rng);
            heap.push(Reverse((now + 1 + gap, gid as u32)));
        }
        sim.step();
        if stalled(&sim, params) {
            deadlock = true;
            break;
        }
    }
    if run.drain && !deadlock {
        deadlock = drain(&mut sim, params);
    }
    stats(&sim, topology, tech, params, gen.sources().len() * cores, deadlock)
}

fn stalled(sim: &Simulator, params: &SimParams) -> bool {
    sim.in_flight() > 0 && sim.now() - sim.last_progress() > params.stall_cycles
}

/// Runs with no new injections until empty; true if the network stalls or
/// the cap is reached first.
fn drain(sim: &mut Simulator, params: &SimParams) -> bool {
    let cap = sim.now() + params.drain_cycle_cap;
    while sim.in_flight() > 0 {
        if sim.now() >= cap || stalled(sim, params) {
            return true;
        }
        sim.step();
    }
    false
}

fn stats(
    sim: &Simulator,
    topology: &Topology,
    tech: &Technology,
    params: &SimParams,
    injecting_cores: usize,
    deadlock: bool,
) -> Result<SimStats> {
    let c = sim.counters();
    let t = params.cycle_time_ns;
    let denom = (injecting_cores as u64 * params.measure_cycles).max(1) as f64;
    let bits = topology_flit_bits(topology, tech)?;
    let delivered = c.measured_delivered_packets.max(1) as f64;
    let p99 = percentile(&c.latency_hist, 0.99);
    Ok(SimStats {
        offered_rate: c.measured_injected_flits as f64 / denom,
        accepted_rate: c.measured_flits_in_window as f64 / denom,
        avg_latency_ns: c.latency_sum as f64 / delivered * t,
        p99_latency_ns: p99 as f64 * t,
        zero_load_latency_ns: c.zero_load_sum as f64 / delivered * t,
        avg_hops: c.hops_sum as f64 / delivered,
        delivered_packets: c.measured_delivered_packets,
        measured_packets: c.measured_injected_packets,
        per_channel_bits: c.channel_flits.iter().map(|&f| f as f64 * bits).collect(),
        flit_bits: bits,
        measure_cycles: params.measure_cycles,
        cycles: sim.now(),
        deadlock_flag: deadlock,
        min_latency_slack: c.min_slack,
        in_flight_flits: sim.in_flight(),
    })
}

fn percentile(hist: &[u64], q: f64) -> u64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0;
    }
    let target = (q * total as f64).ceil() as u64;
    let mut seen = 0;
    for (v, &n) in hist.iter().enumerate() {
        seen += n;
        if seen >= target {
            return v as u64;
        }
    }
    hist.len() as u64 - 1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub rate: f64,
    pub offered_rate: f64,
    pub accepted_rate: f64,
    pub avg_latency_ns: f64,
    pub zero_load_latency_ns: f64,
    pub sustained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Saturation {
    /// Largest sustained injection rate in flits per core per cycle.
    pub rate: f64,
    pub probes: Vec<Probe>,
    /// Statistics of the probe run at `rate`.
    pub stats: Option<SimStats>,
    /// Why the search ended at zero, if it did.
    pub diagnostic: Option<String>,
}

pub fn find_saturation(
    topology: &Topology,
    table: &RoutingTable,
    tech: &Technology,
    traffic: &TrafficSpec,
    params: &SimParams,
) -> Result<Saturation> {
    params.validate()?;
    if let Some(l) = topology.links().iter().find(|l| tech.rates.fraction(l.length_mm) <= 0.0) {
        return Ok(Saturation {
            rate: 0.0,
            probes: Vec::new(),
            stats: None,
            diagnostic: Some(format!(
                "link {}-{} is {:.2} mm, at or beyond the {:.1} mm cutoff",
                l.a, l.b, l.length_mm, tech.rates.cutoff_mm
            )),
        });
    }
    let res = params.sat_resolution;
    let mut probes = Vec::new();
    let mut best = None;
    let mut probe = |k: u32| -> Result<bool> {
        let rate = k as f64 / res as f64;
        let s = run_synthetic(topology, table, tech, traffic, params, rate, Run { drain: false })?;
        let sustained = !s.deadlock_flag
            && s.accepted_rate >= params.sat_accept_ratio * s.offered_rate
            && (s.measured_packets == 0
                || (s.delivered_packets > 0 && s.avg_latency_ns < params.sat_latency_factor * s.zero_load_latency_ns));
        probes.push(Probe {
            rate,
            offered_rate: s.offered_rate,
            accepted_rate: s.accepted_rate,
            avg_latency_ns: s.avg_latency_ns,
            zero_load_latency_ns: s.zero_load_latency_ns,
            sustained,
        });
        if sustained {
            best = Some(s);
        }
        Ok(sustained)
    };
    let (mut lo, mut hi) = (0u32, res);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let diagnostic = (lo == 0).then(|| format!("not sustained at the minimum rate 1/{res}"));
    Ok(Saturation { rate: lo as f64 / res as f64, probes, stats: best, diagnostic })
}

/// Replays `trace` up to `params.trace_cycle_cap`, then drains. Every
/// packet is measured; rates are per core of every chiplet.
///
/// Each node injects through a single queue on core 0, so records leave a
/// node in trace order; ejection cores rotate with the record index.
pub fn replay_trace(
    topology: &Topology,
    table: &RoutingTable,
    tech: &Technology,
    trace: &Trace,
    params: &SimParams,
) -> Result<SimStats> {
    trace.check_nodes(topology.num_sites())?;
    let bits = topology_flit_bits(topology, tech)?;
    if bits <= 0.0 && trace.records.iter().any(|r| r.kind == PacketType::Data) {
        return Err(Error::Config("topology carries no data: its longest link is beyond the cutoff".into()));
    }
    let mut sim = Simulator::new(topology, table, tech, params)?;
    let cap = params.trace_cycle_cap;
    sim.set_window(0, cap);
    let cores = sim.cores_per_chiplet();
    let mut next = 0;
    let mut deadlock = false;
    while sim.now() < cap {
        let now = sim.now();
        while next < trace.records.len() && trace.records[next].cycle <= now {
            let r = trace.records[next];
            sim.inject(r.src, r.dst, 0, next % cores, r.flits(bits), true)?;
            next += 1;
        }
        if next == trace.records.len() && sim.in_flight() == 0 {
            break;
        }
        sim.step();
        if stalled(&sim, params) {
            deadlock = true;
            break;
        }
    }
    if !deadlock {
        deadlock = drain(&mut sim, params);
    }
    let replay = SimParams { measure_cycles: cap, ..params.clone() };
    stats(&sim, topology, tech, &replay, topology.num_sites() * cores, deadlock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{build_placement, Arrangement, Dims, PhyPolicy};
    use crate::routing::Routing;
    use crate::techmodel::{RateTable, Substrate, TechParams};
    use crate::topology::{generate_topology, TopologyKind};

    fn tech() -> Technology {
        Technology::defaults(Substrate::Organic, 32.0)
    }

    fn mesh(r: usize, c: usize) -> (Topology, Routing) {
        let p = build_placement(Arrangement::Grid, Dims::Rect { rows: r, cols: c }, 74.0, 0.15).unwrap();
        let t = generate_topology(&TopologyKind::Mesh, &p).unwrap();
        let routing = Routing::build(&t).unwrap();
        (t, routing)
    }

    fn quick() -> SimParams {
        SimParams { warmup_cycles: 500, measure_cycles: 2000, ..SimParams::default() }
    }

    #[test]
    fn single_flit_one_hop() {
        let (t, r) = mesh(4, 4);
        let mut sim = Simulator::new(&t, &r.table, &tech(), &SimParams::default()).unwrap();
        sim.record_packets(true);
        sim.inject(0, 1, 0, 0, 1, true).unwrap();
        assert_eq!(sim.zero_load_latency(0, 1, 1), 11);
        while sim.in_flight() > 0 {
            sim.step();
        }
        assert_eq!(sim.delivered()[0].latency(), 11);
        assert_eq!(sim.delivered()[0].hops, 1);
    }

    #[test]
    fn self_addressed_packet_only_crosses_its_router() {
        let (t, r) = mesh(2, 2);
        let mut sim = Simulator::new(&t, &r.table, &tech(), &SimParams::default()).unwrap();
        sim.record_packets(true);
        sim.inject(3, 3, 1, 2, 4, true).unwrap();
        while sim.in_flight() > 0 {
            sim.step();
        }
        assert_eq!(sim.delivered()[0].latency(), 3 + 3);
    }

    #[test]
    fn zero_rate_is_silent() {
        let (t, r) = mesh(4, 4);
        let s = simulate(&t, &r.table, &tech(), &TrafficSpec::uniform(), &quick(), 0.0).unwrap();
        assert_eq!(s.delivered_packets, 0);
        assert!(!s.deadlock_flag);
        assert_eq!(s.accepted_rate, 0.0);
    }

    #[test]
    fn invariants_hold_every_cycle() {
        let (t, r) = mesh(4, 4);
        let mut sim = Simulator::new(&t, &r.table, &tech(), &SimParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cycle in 0..6000 {
            if cycle < 2000 {
                for src in 0..16 {
                    if rng.random_bool(0.05) {
                        let dst = rng.random_range(0..16);
                        let flits = rng.random_range(1..6);
                        sim.inject(src, dst, rng.random_range(0..8), rng.random_range(0..8), flits, true).unwrap();
                    }
                }
            }
            sim.step();
            sim.check_invariants().unwrap();
        }
        assert_eq!(sim.in_flight(), 0);
        assert!(sim.counters().min_slack.unwrap() >= 0);
    }

    #[test]
    fn deterministic_and_bounded() {
        let (t, r) = mesh(4, 4);
        let a = simulate(&t, &r.table, &tech(), &TrafficSpec::uniform(), &quick(), 0.05).unwrap();
        let b = simulate(&t, &r.table, &tech(), &TrafficSpec::uniform(), &quick(), 0.05).unwrap();
        assert_eq!(a, b);
        assert!(a.accepted_rate <= a.offered_rate);
        assert!(!a.deadlock_flag);
        assert_eq!(a.in_flight_flits, 0);
        assert!(a.min_latency_slack.unwrap() >= 0);
        let total_bits: f64 = a.per_channel_bits.iter().sum();
        assert!(total_bits > 0.0);
        assert_eq!(total_bits % a.flit_bits, 0.0);
    }

    #[test]
    fn two_chiplet_link_nearly_saturates() {
        let (t, r) = mesh(1, 2);
        let mut tech = tech();
        tech.params.cores_per_chiplet = 1;
        let spec = TrafficSpec::new(TrafficPattern::Neighbor);
        let sat = find_saturation(&t, &r.table, &tech, &spec, &quick()).unwrap();
        assert!(sat.rate >= 0.9, "{sat:?}");
    }

    #[test]
    fn dead_link_means_zero_saturation() {
        let (t, r) = mesh(2, 2);
        let mut tech = tech();
        tech.rates = RateTable::new(vec![(0.01, 1.0)], 0.1).unwrap();
        let sat = find_saturation(&t, &r.table, &tech, &TrafficSpec::uniform(), &quick()).unwrap();
        assert_eq!(sat.rate, 0.0);
        assert!(sat.diagnostic.is_some());
        assert!(sat.probes.is_empty());
    }

    #[test]
    fn accepted_rate_grows_below_saturation() {
        let (t, r) = mesh(4, 4);
        let rates = [0.01, 0.03, 0.05];
        let acc: Vec<f64> = rates
            .iter()
            .map(|&x| simulate(&t, &r.table, &tech(), &TrafficSpec::uniform(), &quick(), x).unwrap().accepted_rate)
            .collect();
        assert!(acc.windows(2).all(|w| w[0] <= w[1]), "{acc:?}");
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let (t, _) = mesh(4, 4);
        let (_, other) = mesh(2, 2);
        assert!(matches!(
            Simulator::new(&t, &other.table, &tech(), &SimParams::default()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn trace_replay_delivers_everything() {
        let (t, r) = mesh(4, 4);
        let trace = Trace::parse("10,0,5,control,8\n10,0,5,data,64\n12,15,0,data,100000\n").unwrap();
        let s = replay_trace(&t, &r.table, &tech(), &trace, &SimParams::default()).unwrap();
        assert_eq!(s.delivered_packets, 3);
        assert!(!s.deadlock_flag);
        let bits = topology_flit_bits(&t, &tech()).unwrap();
        assert_eq!(trace.records[1].flits(bits), 1);
        let bad = Trace::parse("1,0,99,control,8\n").unwrap();
        assert!(matches!(replay_trace(&t, &r.table, &tech(), &bad, &SimParams::default()), Err(Error::Integrity(_))));
    }

    #[test]
    fn long_links_cost_wire_cycles() {
        let p = build_placement(Arrangement::Grid, Dims::Rect { rows: 1, cols: 2 }, 74.0, 0.15).unwrap();
        let t = crate::topology::Topology::from_edges(TopologyKind::Mesh, p, PhyPolicy::Center, [(0, 1)]).unwrap();
        let r = Routing::build(&t).unwrap();
        let mut slow = tech();
        slow.params = TechParams { speed_of_light_km_s: 1000.0, ..slow.params };
        let sim = Simulator::new(&t, &r.table, &slow, &SimParams::default()).unwrap();
        // 8.75 mm at c/√3.1 with c = 1000 km/s is about 15.4 ns
        assert_eq!(sim.zero_load_latency(0, 1, 1), 3 + 3 + 4 + 16);
    }
}
