use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::routing::RoutingTable;
use crate::sim::{Packet, SimParams};
use crate::techmodel::{link_latency_cycles, Technology};
use crate::topology::Topology;

const EJECT: u32 = u32::MAX;
/// Sleep states for input VCs woken by an event rather than a time.
const WAIT_ALLOC: u64 = u64::MAX - 1;
const WAIT_CREDIT: u64 = u64::MAX;

enum Outcome {
    Moved,
    /// Blocked until the given cycle or sleep state.
    Blocked(u64),
}

#[derive(Clone, Copy, Debug, Default)]
struct Flit {
    pkt: u32,
    hop: u16,
    head: bool,
    tail: bool,
    ready: u64,
}

/// Fixed-capacity FIFOs stored back to back.
#[derive(Debug)]
struct Rings<T> {
    cap: usize,
    data: Vec<T>,
    head: Vec<u32>,
    len: Vec<u32>,
}

impl<T: Copy + Default> Rings<T> {
    fn new(count: usize, cap: usize) -> Self {
        Rings { cap, data: vec![T::default(); count * cap], head: vec![0; count], len: vec![0; count] }
    }

    fn len(&self, q: usize) -> usize {
        self.len[q] as usize
    }

    fn front(&self, q: usize) -> Option<T> {
        (self.len[q] > 0).then(|| self.data[q * self.cap + self.head[q] as usize])
    }

    fn push(&mut self, q: usize, v: T) {
        let len = self.len[q] as usize;
        assert!(len < self.cap, "ring overflow");
        let mut slot = self.head[q] as usize + len;
        if slot >= self.cap {
            slot -= self.cap;
        }
        self.data[q * self.cap + slot] = v;
        self.len[q] += 1;
    }

    fn pop(&mut self, q: usize) {
        debug_assert!(self.len[q] > 0);
        self.head[q] += 1;
        if self.head[q] as usize == self.cap {
            self.head[q] = 0;
        }
        self.len[q] -= 1;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct InVc {
    allocated: bool,
    /// Output channel, or `EJECT` with `out_vc` holding the ejection core.
    out: u32,
    out_vc: u32,
}

#[derive(Clone, Copy, Debug)]
struct PacketState {
    src: u32,
    dst: u32,
    src_core: u32,
    dst_core: u32,
    flits: u32,
    gen: u64,
    zero_load: u64,
    measured: bool,
    id: u64,
}

/// Counters accumulated while the simulator runs.
#[derive(Clone, Debug, Default)]
pub struct Counters {
    pub injected_flits: u64,
    pub delivered_flits: u64,
    pub injected_packets: u64,
    pub delivered_packets: u64,
    pub measured_injected_packets: u64,
    pub measured_injected_flits: u64,
    pub measured_delivered_packets: u64,
    /// Flits of measured packets ejected inside the measurement window.
    pub measured_flits_in_window: u64,
    pub latency_sum: u64,
    pub zero_load_sum: u64,
    pub hops_sum: u64,
    /// Histogram of measured packet latencies in cycles.
    pub latency_hist: Vec<u64>,
    /// Smallest latency minus zero-load bound seen on any packet.
    pub min_slack: Option<i64>,
    /// Flits carried by each channel inside the measurement window.
    pub channel_flits: Vec<u64>,
}

/// Cycle-level model of the whole network: one input-queued virtual-channel
/// router per chiplet, credit-based wormhole flow control, per-core injection
/// queues and ejection ports.
#[derive(Debug)]
pub struct Simulator<'a> {
    table: &'a RoutingTable,
    params: SimParams,
    cores: usize,
    vcs: usize,
    now: u64,
    window: (u64, u64),
    chan_to: Vec<u32>,
    chan_delay: Vec<u64>,
    chan_dead: Vec<bool>,
    chan_local: Vec<u8>,
    degree: Vec<u32>,
    ivcs: Vec<InVc>,
    /// Flit buffers of network input VCs.
    net_buf: Rings<Flit>,
    /// Unbounded source queues, one per core.
    inj_buf: Vec<VecDeque<Flit>>,
    ivc_port: Vec<u8>,
    inj_base: usize,
    /// Router each input VC belongs to.
    ivc_router: Vec<u32>,
    /// Input VCs due this cycle, per router.
    due: Vec<Vec<u32>>,
    touched: Vec<u32>,
    /// Input VCs waiting for a free output VC or ejection port.
    alloc_wait: Vec<Vec<u32>>,
    /// Cycle each non-empty input VC is queued for in the wheel, or a
    /// `WAIT_*` state.
    sleep: Vec<u64>,
    /// Input VC holding each output VC.
    ovc_owner: Vec<u32>,
    /// Set when an output VC or ejection port frees up during a router cycle.
    freed: bool,
    rr: Vec<u32>,
    occupancy: Vec<u32>,
    /// Input VCs to retry, bucketed by cycle modulo the wheel size.
    wheel: Vec<Vec<u32>>,
    wheel_mask: u64,
    ovc_busy: Vec<bool>,
    ovc_credits: Vec<u32>,
    /// Cycles at which in-transit credits arrive back, per output VC.
    ovc_returns: Rings<u64>,
    eject_busy: Vec<bool>,
    packets: Vec<PacketState>,
    free: Vec<u32>,
    next_id: u64,
    last_progress: u64,
    record: bool,
    delivered: Vec<Packet>,
    counters: Counters,
}

impl<'a> Simulator<'a> {
    pub fn new(topology: &Topology, table: &'a RoutingTable, tech: &Technology, params: &SimParams) -> Result<Simulator<'a>> {
        params.validate()?;
        let n = topology.num_sites();
        let links = topology.links();
        if table.num_sites() != n || table.num_channels() != 2 * links.len() {
            return Err(Error::Integrity("routing table does not match topology".into()));
        }
        for (i, l) in links.iter().enumerate() {
            let (f, b) = (table.channel(2 * i), table.channel(2 * i + 1));
            if (f.from, f.to, b.from, b.to) != (l.a, l.b, l.b, l.a) {
                return Err(Error::Integrity(format!("channel {} does not match link {}-{}", 2 * i, l.a, l.b)));
            }
        }
        let cores = tech.params.cores_per_chiplet;
        let vcs = params.vcs;
        let max_ports = topology.max_degree() + cores;
        if max_ports > 64 {
            return Err(Error::Config(format!("{max_ports} router ports exceed the supported 64")));
        }
        let m = 2 * links.len();
        let mut chan_to = vec![0; m];
        let mut chan_delay = vec![0; m];
        let mut chan_dead = vec![false; m];
        let mut chan_local = vec![0u8; m];
        for (i, l) in links.iter().enumerate() {
            let wire = link_latency_cycles(l.length_mm, &tech.params);
            let delay = 2 * params.phy_latency_cycles + wire;
            let dead = tech.rates.fraction(l.length_mm) <= 0.0;
            for (c, from, to) in [(2 * i, l.a, l.b), (2 * i + 1, l.b, l.a)] {
                chan_to[c] = to as u32;
                chan_delay[c] = delay;
                chan_dead[c] = dead;
                chan_local[c] = topology.neighbors(from).binary_search(&to).expect("link endpoints are neighbors") as u8;
            }
        }
        let inj_base = m * vcs;
        let ivcs = vec![InVc::default(); inj_base + n * cores];
        let mut ivc_port = vec![0u8; inj_base + n * cores];
        for c in 0..m {
            // input port at the receiving router is its own output port toward the sender
            for v in 0..vcs {
                ivc_port[c * vcs + v] = chan_local[c ^ 1];
            }
        }
        for site in 0..n {
            for core in 0..cores {
                ivc_port[inj_base + site * cores + core] = (topology.degree(site) + core) as u8;
            }
        }
        let mut ivc_router = vec![0u32; inj_base + n * cores];
        for (id, r) in ivc_router.iter_mut().enumerate() {
            *r = if id < inj_base { chan_to[id / vcs] } else { ((id - inj_base) / cores) as u32 };
        }
        let max_delay = chan_delay.iter().copied().max().unwrap_or(0) + params.router_latency_cycles;
        let wheel_len = (max_delay + 2).next_power_of_two();
        Ok(Simulator {
            table,
            params: params.clone(),
            cores,
            vcs,
            now: 0,
            window: (0, u64::MAX),
            chan_to,
            chan_delay,
            chan_dead,
            chan_local,
            degree: (0..n).map(|s| topology.degree(s) as u32).collect(),
            ivcs,
            net_buf: Rings::new(m * vcs, params.buf_flits_per_vc),
            inj_buf: vec![VecDeque::new(); n * cores],
            ivc_port,
            inj_base,
            ivc_router,
            due: vec![Vec::new(); n],
            touched: Vec::new(),
            alloc_wait: vec![Vec::new(); n],
            sleep: vec![0; inj_base + n * cores],
            ovc_owner: vec![u32::MAX; m * vcs],
            freed: false,
            rr: vec![0; n],
            occupancy: vec![0; n],
            wheel: vec![Vec::new(); wheel_len as usize],
            wheel_mask: wheel_len - 1,
            ovc_busy: vec![false; m * vcs],
            ovc_credits: vec![params.buf_flits_per_vc as u32; m * vcs],
            ovc_returns: Rings::new(m * vcs, params.buf_flits_per_vc),
            eject_busy: vec![false; n * cores],
            packets: Vec::new(),
            free: Vec::new(),
            next_id: 0,
            last_progress: 0,
            record: false,
            delivered: Vec::new(),
            counters: Counters { channel_flits: vec![0; m], ..Counters::default() },
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn cores_per_chiplet(&self) -> usize {
        self.cores
    }

    /// Cycles `[start, end)` in which channel and acceptance counters run.
    pub fn set_window(&mut self, start: u64, end: u64) {
        self.window = (start, end);
    }

    /// Keep a [`Packet`] record of every delivered packet.
    pub fn record_packets(&mut self, on: bool) {
        self.record = on;
    }

    pub fn delivered(&self) -> &[Packet] {
        &self.delivered
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Flits injected but not yet ejected.
    pub fn in_flight(&self) -> u64 {
        self.counters.injected_flits - self.counters.delivered_flits
    }

    /// Last cycle in which any flit moved.
    pub fn last_progress(&self) -> u64 {
        self.last_progress
    }

    pub fn has_dead_channels(&self) -> bool {
        self.chan_dead.iter().any(|&d| d)
    }

    /// Cycles of router, PHY and wire delay along the routed path, plus
    /// serialization of the remaining flits.
    pub fn zero_load_latency(&self, src: usize, dst: usize, flits: usize) -> u64 {
        let route = self.table.route(src, dst);
        let wires: u64 = route.iter().map(|&c| self.chan_delay[c as usize]).sum();
        (route.len() as u64 + 1) * self.params.router_latency_cycles + wires + flits as u64 - 1
    }

    /// Queues a packet at core `src_core` of `src` in the current cycle.
    pub fn inject(&mut self, src: usize, dst: usize, src_core: usize, dst_core: usize, flits: usize, measured: bool) -> Result<u64> {
        let n = self.occupancy.len();
        if src >= n || dst >= n {
            return Err(Error::Integrity(format!("packet {src}->{dst} outside {n} sites")));
        }
        if src_core >= self.cores || dst_core >= self.cores || flits == 0 || flits > u32::MAX as usize {
            return Err(Error::InvalidArgument("bad packet core index or flit count".into()));
        }
        let id = self.next_id;
        self.next_id += 1;
        let state = PacketState {
            src: src as u32,
            dst: dst as u32,
            src_core: src_core as u32,
            dst_core: dst_core as u32,
            flits: flits as u32,
            gen: self.now,
            zero_load: self.zero_load_latency(src, dst, flits),
            measured,
            id,
        };
        let slot = match self.free.pop() {
            Some(s) => {
                self.packets[s as usize] = state;
                s
            }
            None => {
                self.packets.push(state);
                (self.packets.len() - 1) as u32
            }
        };
        let ready = self.now + self.params.router_latency_cycles;
        let ivc = self.inj_base + src * self.cores + src_core;
        let q = &mut self.inj_buf[ivc - self.inj_base];
        let was_empty = q.is_empty();
        for i in 0..flits {
            q.push_back(Flit { pkt: slot, hop: 0, head: i == 0, tail: i + 1 == flits, ready });
        }
        if was_empty {
            self.schedule(ivc, ready);
        }
        self.occupancy[src] += flits as u32;
        let c = &mut self.counters;
        c.injected_flits += flits as u64;
        c.injected_packets += 1;
        if measured {
            c.measured_injected_packets += 1;
            c.measured_injected_flits += flits as u64;
        }
        Ok(id)
    }

    /// Advances every router by one cycle.
    pub fn step(&mut self) {
        let slot = (self.now & self.wheel_mask) as usize;
        let mut due = std::mem::take(&mut self.wheel[slot]);
        for &id in &due {
            debug_assert_eq!(self.sleep[id as usize], self.now);
            let r = self.ivc_router[id as usize] as usize;
            if self.due[r].is_empty() {
                self.touched.push(r as u32);
            }
            self.due[r].push(id);
        }
        due.clear();
        if self.wheel[slot].is_empty() {
            self.wheel[slot] = due;
        }
        let touched = std::mem::take(&mut self.touched);
        for &r in &touched {
            self.cycle_router(r as usize);
        }
        self.touched = touched;
        self.touched.clear();
        self.now += 1;
    }

    /// Queues input VC `id` to retry at cycle `t > now`.
    fn schedule(&mut self, id: usize, t: u64) {
        debug_assert!(t > self.now || (t == self.now && self.due[self.ivc_router[id] as usize].is_empty()));
        self.sleep[id] = t;
        self.wheel[(t & self.wheel_mask) as usize].push(id as u32);
    }

    fn cycle_router(&mut self, r: usize) {
        let mut list = std::mem::take(&mut self.due[r]);
        let len = list.len();
        let now = self.now;
        let start = if len == 1 { 0 } else { self.rr[r] as usize % len };
        self.rr[r] = self.rr[r].wrapping_add(1);
        self.freed = false;
        let mut used_out: u64 = 0;
        let mut used_in: u64 = 0;
        for i in (start..len).chain(0..start) {
            let id = list[i] as usize;
            let bit = 1u64 << self.ivc_port[id];
            if used_in & bit != 0 {
                self.schedule(id, now + 1);
                continue;
            }
            match self.try_forward(r, id, &mut used_out) {
                Outcome::Moved => {
                    used_in |= bit;
                    if let Some(f) = self.front(id) {
                        let t = f.ready.max(now + 1);
                        self.schedule(id, t);
                    }
                }
                Outcome::Blocked(WAIT_ALLOC) => {
                    self.sleep[id] = WAIT_ALLOC;
                    self.alloc_wait[r].push(id as u32);
                }
                Outcome::Blocked(WAIT_CREDIT) => self.sleep[id] = WAIT_CREDIT,
                Outcome::Blocked(t) => self.schedule(id, t),
            }
        }
        if self.freed {
            let waiting = std::mem::take(&mut self.alloc_wait[r]);
            for &id in &waiting {
                self.schedule(id as usize, now + 1);
            }
            self.alloc_wait[r] = waiting;
            self.alloc_wait[r].clear();
        }
        list.clear();
        self.due[r] = list;
    }

    fn front(&self, id: usize) -> Option<Flit> {
        if id < self.inj_base {
            self.net_buf.front(id)
        } else {
            self.inj_buf[id - self.inj_base].front().copied()
        }
    }

    fn buf_len(&self, id: usize) -> usize {
        if id < self.inj_base {
            self.net_buf.len(id)
        } else {
            self.inj_buf[id - self.inj_base].len()
        }
    }

    fn try_forward(&mut self, r: usize, id: usize, used: &mut u64) -> Outcome {
        let now = self.now;
        let flit = self.front(id).expect("scheduled input VCs are non-empty");
        if flit.ready > now {
            return Outcome::Blocked(flit.ready);
        }
        if !self.ivcs[id].allocated {
            debug_assert!(flit.head);
            let pk = self.packets[flit.pkt as usize];
            let route = self.table.route(pk.src as usize, pk.dst as usize);
            let (out, out_vc) = if flit.hop as usize == route.len() {
                let e = r * self.cores + pk.dst_core as usize;
                if self.eject_busy[e] {
                    return Outcome::Blocked(WAIT_ALLOC);
                }
                self.eject_busy[e] = true;
                (EJECT, pk.dst_core)
            } else {
                let c = route[flit.hop as usize] as usize;
                if self.chan_dead[c] {
                    return Outcome::Blocked(WAIT_CREDIT);
                }
                // among free output VCs prefer the emptiest downstream buffer
                let mut pick = None;
                for v in 0..self.vcs {
                    let o = c * self.vcs + v;
                    if self.ovc_busy[o] {
                        continue;
                    }
                    let free = self.ovc_credits[o] as usize + self.ovc_returns.len(o);
                    if pick.is_none_or(|(_, best)| free > best) {
                        pick = Some((v, free));
                    }
                }
                let Some((v, _)) = pick else {
                    return Outcome::Blocked(WAIT_ALLOC);
                };
                let o = c * self.vcs + v;
                self.ovc_busy[o] = true;
                self.ovc_owner[o] = id as u32;
                (c as u32, v as u32)
            };
            let ivc = &mut self.ivcs[id];
            ivc.allocated = true;
            ivc.out = out;
            ivc.out_vc = out_vc;
        }
        let (out, out_vc) = (self.ivcs[id].out, self.ivcs[id].out_vc);
        let local = if out == EJECT { self.degree[r] + out_vc } else { self.chan_local[out as usize] as u32 };
        let bit = 1u64 << local;
        if *used & bit != 0 {
            return Outcome::Blocked(now + 1);
        }
        if out != EJECT {
            let o = out as usize * self.vcs + out_vc as usize;
            if self.ovc_credits[o] == 0 && self.refill_credits(o) == 0 {
                return Outcome::Blocked(self.ovc_returns.front(o).unwrap_or(WAIT_CREDIT));
            }
            self.ovc_credits[o] -= 1;
        }
        *used |= bit;
        if id < self.inj_base {
            self.net_buf.pop(id);
        } else {
            self.inj_buf[id - self.inj_base].pop_front();
        }
        self.occupancy[r] -= 1;
        self.last_progress = now;
        if id < self.inj_base {
            // the freed slot's credit travels back over the same link
            let back = now + self.chan_delay[id / self.vcs];
            self.ovc_returns.push(id, back);
            let owner = self.ovc_owner[id] as usize;
            if owner != u32::MAX as usize && self.sleep[owner] == WAIT_CREDIT {
                self.schedule(owner, back);
            }
        }
        let in_window = now >= self.window.0 && now < self.window.1;
        if out == EJECT {
            self.eject(r, flit, in_window);
            if flit.tail {
                self.eject_busy[r * self.cores + out_vc as usize] = false;
                self.freed = true;
            }
        } else {
            let c = out as usize;
            let to = self.chan_to[c] as usize;
            let ready = now + self.chan_delay[c] + self.params.router_latency_cycles;
            let down = c * self.vcs + out_vc as usize;
            self.net_buf.push(down, Flit { hop: flit.hop + 1, ready, ..flit });
            if self.net_buf.len(down) == 1 {
                self.schedule(down, ready);
            }
            self.occupancy[to] += 1;
            if in_window {
                self.counters.channel_flits[c] += 1;
            }
            if flit.tail {
                self.ovc_busy[c * self.vcs + out_vc as usize] = false;
                self.freed = true;
            }
        }
        if flit.tail {
            self.ivcs[id].allocated = false;
        }
        Outcome::Moved
    }

    /// Collects credits that have arrived by now; returns the count held.
    fn refill_credits(&mut self, o: usize) -> u32 {
        while let Some(t) = self.ovc_returns.front(o) {
            if t > self.now {
                break;
            }
            self.ovc_returns.pop(o);
            self.ovc_credits[o] += 1;
        }
        self.ovc_credits[o]
    }

    fn eject(&mut self, r: usize, flit: Flit, in_window: bool) {
        let pk = self.packets[flit.pkt as usize];
        debug_assert_eq!(pk.dst as usize, r);
        let c = &mut self.counters;
        c.delivered_flits += 1;
        if pk.measured && in_window {
            c.measured_flits_in_window += 1;
        }
        if !flit.tail {
            return;
        }
        let latency = self.now - pk.gen;
        let slack = latency as i64 - pk.zero_load as i64;
        c.min_slack = Some(c.min_slack.map_or(slack, |s| s.min(slack)));
        c.delivered_packets += 1;
        if pk.measured {
            c.measured_delivered_packets += 1;
            c.latency_sum += latency;
            c.zero_load_sum += pk.zero_load;
            c.hops_sum += flit.hop as u64;
            let l = latency as usize;
            if c.latency_hist.len() <= l {
                c.latency_hist.resize(l + 1, 0);
            }
            c.latency_hist[l] += 1;
        }
        if self.record {
            self.delivered.push(Packet {
                id: pk.id,
                src_site: pk.src as usize,
                dst_site: pk.dst as usize,
                src_core: pk.src_core as usize,
                dst_core: pk.dst_core as usize,
                flits: pk.flits as usize,
                hops: flit.hop as usize,
                inject_cycle: pk.gen,
                eject_cycle: self.now,
            });
        }
        self.free.push(flit.pkt);
    }

    /// Checks flit conservation and credit soundness; returns the first
    /// violation found.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let buffered: u64 = (0..self.ivcs.len()).map(|id| self.buf_len(id) as u64).sum();
        if buffered != self.in_flight() {
            return Err(format!("{} flits buffered but {} in flight", buffered, self.in_flight()));
        }
        let occ: u64 = self.occupancy.iter().map(|&o| o as u64).sum();
        if occ != buffered {
            return Err(format!("router occupancy {occ} != buffered {buffered}"));
        }
        let cap = self.params.buf_flits_per_vc;
        for o in 0..self.inj_base {
            let held = self.net_buf.len(o);
            if held > cap {
                return Err(format!("input VC {o} holds {held} flits, capacity {cap}"));
            }
            let total = self.ovc_credits[o] as usize + self.ovc_returns.len(o) + held;
            if total != cap {
                return Err(format!("VC {o}: credits + returning + buffered = {total}, expected {cap}"));
            }
        }
        Ok(())
    }
}
