//! Deadlock-free shortest-path routing on arbitrary topologies.
//!
//! Routing works on the channel dependency graph (CDG): one node per
//! directed channel, one edge per turn between two channels meeting at a
//! router. U-turns are never allowed. A [`TurnSet`] forbids enough turns to
//! make the CDG acyclic while every ordered site pair stays reachable; routes
//! are then shortest paths through the remaining turns.
//!
//! Two cycle-breaking strategies exist:
//!
//! - west-first for Mesh and OctaMesh: a turn into a westward channel is
//!   only allowed from another westward channel;
//! - turn prohibition for everything else: repeatedly remove a
//!   minimum-degree site whose removal keeps the rest connected and forbid
//!   every turn through it between the sites that remain.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Topology, TopologyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedChannel {
    pub from: usize,
    pub to: usize,
}

/// Channel dependency graph of a topology.
#[derive(Clone, Debug)]
pub struct Cdg {
    kind: TopologyKind,
    num_sites: usize,
    position: Vec<(f64, f64)>,
    channels: Vec<DirectedChannel>,
    index: HashMap<(usize, usize), usize>,
    outgoing: Vec<Vec<usize>>,
    turns: Vec<Vec<usize>>,
}

pub fn build_cdg(topology: &Topology) -> Cdg {
    let n = topology.num_sites();
    let mut channels = Vec::with_capacity(2 * topology.links().len());
    for l in topology.links() {
        channels.push(DirectedChannel { from: l.a, to: l.b });
        channels.push(DirectedChannel { from: l.b, to: l.a });
    }
    let index: HashMap<_, _> = channels.iter().enumerate().map(|(i, c)| ((c.from, c.to), i)).collect();
    let mut outgoing = vec![Vec::new(); n];
    for site in 0..n {
        outgoing[site] = topology.neighbors(site).iter().map(|&nb| index[&(site, nb)]).collect();
    }
    let turns = channels
        .iter()
        .map(|c| outgoing[c.to].iter().copied().filter(|&o| channels[o].to != c.from).collect())
        .collect();
    Cdg {
        kind: topology.kind().clone(),
        num_sites: n,
        position: topology.placement().sites().iter().map(|s| (s.center_x_mm, s.center_y_mm)).collect(),
        channels,
        index,
        outgoing,
        turns,
    }
}

impl Cdg {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn channels(&self) -> &[DirectedChannel] {
        &self.channels
    }

    pub fn channel(&self, id: usize) -> DirectedChannel {
        self.channels[id]
    }

    pub fn channel_id(&self, from: usize, to: usize) -> Option<usize> {
        self.index.get(&(from, to)).copied()
    }

    /// Channels leaving `site`, ordered by neighbor id.
    pub fn outgoing(&self, site: usize) -> &[usize] {
        &self.outgoing[site]
    }

    /// Turns out of channel `c` (U-turn excluded).
    pub fn turns_from(&self, c: usize) -> &[usize] {
        &self.turns[c]
    }

    pub fn num_turns(&self) -> usize {
        self.turns.iter().map(Vec::len).sum()
    }
}

/// Forbidden turns as (in-channel, out-channel) pairs of CDG channel ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TurnSet {
    forbidden: BTreeSet<(usize, usize)>,
}

impl TurnSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> TurnSet {
        TurnSet { forbidden: pairs.into_iter().collect() }
    }

    pub fn insert(&mut self, in_channel: usize, out_channel: usize) {
        self.forbidden.insert((in_channel, out_channel));
    }

    pub fn is_forbidden(&self, in_channel: usize, out_channel: usize) -> bool {
        self.forbidden.contains(&(in_channel, out_channel))
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forbidden.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStrategy {
    /// West-first on Mesh/OctaMesh; elsewhere the candidate with the lowest
    /// peak channel load under uniform traffic.
    #[default]
    Auto,
    WestFirst,
    EastFirst,
    NorthFirst,
    SouthFirst,
    TurnProhibition,
}

impl TurnStrategy {
    /// Candidates tried by `Auto` on families without a fixed rule, in
    /// tie-break order.
    pub const CANDIDATES: [TurnStrategy; 5] = [
        TurnStrategy::WestFirst,
        TurnStrategy::EastFirst,
        TurnStrategy::NorthFirst,
        TurnStrategy::SouthFirst,
        TurnStrategy::TurnProhibition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TurnStrategy::Auto => "auto",
            TurnStrategy::WestFirst => "west_first",
            TurnStrategy::EastFirst => "east_first",
            TurnStrategy::NorthFirst => "north_first",
            TurnStrategy::SouthFirst => "south_first",
            TurnStrategy::TurnProhibition => "turn_prohibition",
        }
    }
}

impl std::fmt::Display for TurnStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn break_cycles(cdg: &Cdg) -> Result<TurnSet> {
    break_cycles_with(cdg, TurnStrategy::Auto)
}

pub fn break_cycles_with(cdg: &Cdg, strategy: TurnStrategy) -> Result<TurnSet> {
    match strategy {
        TurnStrategy::Auto => Ok(auto_select(cdg)?.1),
        s => {
            let turns = candidate_turns(cdg, s);
            check_turns(cdg, &turns)?;
            Ok(turns)
        }
    }
}

fn candidate_turns(cdg: &Cdg, strategy: TurnStrategy) -> TurnSet {
    // (primary axis, secondary axis) as unit vectors in placement coordinates
    let axes = match strategy {
        TurnStrategy::WestFirst => ((1.0, 0.0), (0.0, 1.0)),
        TurnStrategy::EastFirst => ((-1.0, 0.0), (0.0, -1.0)),
        TurnStrategy::NorthFirst => ((0.0, 1.0), (-1.0, 0.0)),
        TurnStrategy::SouthFirst => ((0.0, -1.0), (1.0, 0.0)),
        TurnStrategy::TurnProhibition => return turn_prohibition(cdg),
        TurnStrategy::Auto => unreachable!("resolved by the caller"),
    };
    direction_first_turns(cdg, axes.0, axes.1)
}

fn check_turns(cdg: &Cdg, turns: &TurnSet) -> Result<()> {
    if !allowed_cdg_is_acyclic(cdg, turns) {
        return Err(Error::RoutingInfeasible("turn set leaves a cycle in the CDG".into()));
    }
    if let Some((s, d)) = first_unreachable_pair(cdg, turns) {
        return Err(Error::RoutingInfeasible(format!("site {d} unreachable from {s}")));
    }
    Ok(())
}

fn auto_select(cdg: &Cdg) -> Result<(TurnStrategy, TurnSet, RoutingTable)> {
    if matches!(cdg.kind, TopologyKind::Mesh | TopologyKind::OctaMesh) {
        let turns = candidate_turns(cdg, TurnStrategy::WestFirst);
        if check_turns(cdg, &turns).is_ok() {
            let table = build_routing_tables(cdg, &turns)?;
            return Ok((TurnStrategy::WestFirst, turns, table));
        }
    }
    let mut best: Option<(f64, TurnStrategy, TurnSet, RoutingTable)> = None;
    for s in TurnStrategy::CANDIDATES {
        let turns = candidate_turns(cdg, s);
        if check_turns(cdg, &turns).is_err() {
            continue;
        }
        let table = build_routing_tables(cdg, &turns)?;
        let load = table.max_channel_load();
        if best.as_ref().is_none_or(|b| load < b.0 - 1e-9) {
            best = Some((load, s, turns, table));
        }
    }
    best.map(|(_, s, t, r)| (s, t, r))
        .ok_or_else(|| Error::RoutingInfeasible("no candidate turn set keeps all pairs reachable".into()))
}

/// Forbids turns from any channel into one heading against `primary`
/// unless it also heads against `primary`; among channels perpendicular to
/// `primary`, forbids turns from one heading along `secondary` into one
/// heading against it. Every closed walk has zero net displacement, so no
/// cycle survives.
fn direction_first_turns(cdg: &Cdg, primary: (f64, f64), secondary: (f64, f64)) -> TurnSet {
    const EPS: f64 = 1e-6;
    let proj = |c: usize, axis: (f64, f64)| {
        let ch = cdg.channels[c];
        let (a, b) = (cdg.position[ch.from], cdg.position[ch.to]);
        (b.0 - a.0) * axis.0 + (b.1 - a.1) * axis.1
    };
    let m = cdg.num_channels();
    let first: Vec<bool> = (0..m).map(|c| proj(c, primary) < -EPS).collect();
    let flat: Vec<bool> = (0..m).map(|c| proj(c, primary).abs() <= EPS).collect();
    let sec: Vec<f64> = (0..m).map(|c| proj(c, secondary)).collect();
    let mut set = TurnSet::default();
    for c in 0..m {
        for &o in &cdg.turns[c] {
            let into_first = first[o] && !first[c];
            let flat_reversal = flat[c] && flat[o] && sec[c] > EPS && sec[o] < -EPS;
            if into_first || flat_reversal {
                set.insert(c, o);
            }
        }
    }
    set
}

fn turn_prohibition(cdg: &Cdg) -> TurnSet {
    let n = cdg.num_sites;
    let adj: Vec<Vec<usize>> = (0..n).map(|s| cdg.outgoing[s].iter().map(|&c| cdg.channels[c].to).collect()).collect();
    let mut alive = vec![true; n];
    let mut set = TurnSet::default();
    for _ in 0..n {
        let cut = articulation_points(&adj, &alive);
        let v = (0..n)
            .filter(|&v| alive[v] && !cut[v])
            .min_by_key(|&v| (adj[v].iter().filter(|&&u| alive[u]).count(), v))
            .expect("a connected graph always has a non-cut vertex");
        let live: Vec<usize> = adj[v].iter().copied().filter(|&u| alive[u]).collect();
        for &a in &live {
            for &b in &live {
                if a != b {
                    set.insert(cdg.index[&(a, v)], cdg.index[&(v, b)]);
                }
            }
        }
        alive[v] = false;
    }
    set
}

/// Cut vertices of the subgraph induced by `alive` (iterative Tarjan).
fn articulation_points(adj: &[Vec<usize>], alive: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut cut = vec![false; n];
    let mut timer = 0;
    for root in 0..n {
        if !alive[root] || disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        let mut root_children = 0;
        // (vertex, parent, next neighbor index)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        while let Some(&mut (v, parent, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let u = adj[v][*next];
                *next += 1;
                if !alive[u] || u == parent {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    if v == root {
                        root_children += 1;
                    }
                    stack.push((u, v, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if p != root && low[v] >= disc[p] {
                        cut[p] = true;
                    }
                }
            }
        }
        cut[root] = root_children > 1;
    }
    cut
}

/// Topological order of channels under the allowed turns, if one exists.
pub fn allowed_topological_order(cdg: &Cdg, turns: &TurnSet) -> Option<Vec<usize>> {
    let m = cdg.num_channels();
    let mut indeg = vec![0usize; m];
    for c in 0..m {
        for &o in &cdg.turns[c] {
            if !turns.is_forbidden(c, o) {
                indeg[o] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..m).filter(|&c| indeg[c] == 0).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(c) = queue.pop_front() {
        order.push(c);
        for &o in &cdg.turns[c] {
            if !turns.is_forbidden(c, o) {
                indeg[o] -= 1;
                if indeg[o] == 0 {
                    queue.push_back(o);
                }
            }
        }
    }
    (order.len() == m).then_some(order)
}

fn allowed_cdg_is_acyclic(cdg: &Cdg, turns: &TurnSet) -> bool {
    allowed_topological_order(cdg, turns).is_some()
}

/// Sites reachable from `src` using only allowed turns.
fn reachable_from(cdg: &Cdg, turns: &TurnSet, src: usize) -> Vec<bool> {
    let mut seen_site = vec![false; cdg.num_sites];
    let mut seen = vec![false; cdg.num_channels()];
    let mut queue = VecDeque::new();
    seen_site[src] = true;
    for &c in &cdg.outgoing[src] {
        seen[c] = true;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        seen_site[cdg.channels[c].to] = true;
        for &o in &cdg.turns[c] {
            if !seen[o] && !turns.is_forbidden(c, o) {
                seen[o] = true;
                queue.push_back(o);
            }
        }
    }
    seen_site
}

fn first_unreachable_pair(cdg: &Cdg, turns: &TurnSet) -> Option<(usize, usize)> {
    (0..cdg.num_sites).find_map(|s| reachable_from(cdg, turns, s).iter().position(|&r| !r).map(|d| (s, d)))
}

/// Source routes for every ordered site pair, stored as channel sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTable {
    num_sites: usize,
    offsets: Vec<u32>,
    channels: Vec<u32>,
    sites_of: Vec<DirectedChannel>,
}

pub fn build_routing_tables(cdg: &Cdg, turns: &TurnSet) -> Result<RoutingTable> {
    let n = cdg.num_sites;
    let m = cdg.num_channels();
    let mut preds = vec![Vec::new(); m];
    for c in 0..m {
        for &o in &cdg.turns[c] {
            if !turns.is_forbidden(c, o) {
                preds[o].push(c);
            }
        }
    }
    let mut per_pair: Vec<Vec<u32>> = vec![Vec::new(); n * n];
    let mut dist = vec![u32::MAX; m];
    let mut queue = VecDeque::new();
    for dst in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        for (c, ch) in cdg.channels.iter().enumerate() {
            if ch.to == dst {
                dist[c] = 1;
                queue.push_back(c);
            }
        }
        while let Some(c) = queue.pop_front() {
            for &p in &preds[c] {
                if dist[p] == u32::MAX && cdg.channels[p].to != dst {
                    dist[p] = dist[c] + 1;
                    queue.push_back(p);
                }
            }
        }
        for src in (0..n).filter(|&s| s != dst) {
            let first = cdg.outgoing[src]
                .iter()
                .copied()
                .filter(|&c| dist[c] != u32::MAX)
                .min_by_key(|&c| (dist[c], cdg.channels[c].to))
                .ok_or_else(|| Error::RoutingInfeasible(format!("no route from {src} to {dst}")))?;
            let mut route = vec![first as u32];
            let mut cur = first;
            while cdg.channels[cur].to != dst {
                let next = cdg.turns[cur]
                    .iter()
                    .copied()
                    .filter(|&o| !turns.is_forbidden(cur, o) && dist[o] == dist[cur] - 1)
                    .min_by_key(|&o| cdg.channels[o].to)
                    .expect("distance labels guarantee a successor");
                route.push(next as u32);
                cur = next;
            }
            per_pair[src * n + dst] = route;
        }
    }
    let mut offsets = Vec::with_capacity(n * n + 1);
    let mut channels = Vec::new();
    offsets.push(0);
    for r in per_pair {
        channels.extend(r);
        offsets.push(channels.len() as u32);
    }
    Ok(RoutingTable { num_sites: n, offsets, channels, sites_of: cdg.channels.clone() })
}

impl RoutingTable {
    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_channels(&self) -> usize {
        self.sites_of.len()
    }

    pub fn channel(&self, id: usize) -> DirectedChannel {
        self.sites_of[id]
    }

    /// Channel ids from `src` to `dst`; empty when `src == dst`.
    pub fn route(&self, src: usize, dst: usize) -> &[u32] {
        let i = src * self.num_sites + dst;
        &self.channels[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn hops(&self, src: usize, dst: usize) -> usize {
        self.route(src, dst).len()
    }

    /// Sites visited from `src` to `dst`, both included.
    pub fn route_sites(&self, src: usize, dst: usize) -> Vec<usize> {
        let mut sites = vec![src];
        sites.extend(self.route(src, dst).iter().map(|&c| self.sites_of[c as usize].to));
        sites
    }

    pub fn next_hop(&self, src: usize, dst: usize) -> Option<DirectedChannel> {
        self.route(src, dst).first().map(|&c| self.sites_of[c as usize])
    }

    /// Mean routed hop count over all ordered pairs of distinct sites.
    pub fn avg_hops(&self) -> f64 {
        let n = self.num_sites;
        if n < 2 {
            return 0.0;
        }
        self.channels.len() as f64 / (n * (n - 1)) as f64
    }

    /// Expected flits per cycle on the busiest channel when every site
    /// sends one flit per cycle spread uniformly over all other sites.
    pub fn max_channel_load(&self) -> f64 {
        let n = self.num_sites;
        if n < 2 {
            return 0.0;
        }
        let mut load = vec![0u64; self.sites_of.len()];
        for &c in &self.channels {
            load[c as usize] += 1;
        }
        load.iter().copied().max().unwrap_or(0) as f64 / (n - 1) as f64
    }

    pub fn to_doc(&self) -> RoutingDoc {
        let n = self.num_sites;
        let pairs = (0..n)
            .flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| (s, d)))
            .map(|(src, dst)| RouteDoc { src, dst, route: self.route_sites(src, dst) })
            .collect();
        RoutingDoc { pairs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDoc {
    pub pairs: Vec<RouteDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDoc {
    pub src: usize,
    pub dst: usize,
    pub route: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurnViolation {
    pub src: usize,
    pub dst: usize,
    pub in_channel: DirectedChannel,
    pub out_channel: DirectedChannel,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeadlockReport {
    pub cdg_acyclic: bool,
    /// Channel ids in an order respecting every allowed turn.
    pub topological_order: Option<Vec<usize>>,
    pub forbidden_turns: usize,
    pub total_turns: usize,
    pub pairs_routed: usize,
    pub pairs_total: usize,
    pub violations: Vec<TurnViolation>,
    /// Pairs whose route revisits a site.
    pub looping_routes: Vec<(usize, usize)>,
    pub avg_routed_hops: f64,
    pub avg_bfs_hops: f64,
    /// Largest routed-minus-BFS hop difference over all pairs.
    pub max_extra_hops: usize,
}

impl DeadlockReport {
    pub fn pass(&self) -> bool {
        self.cdg_acyclic
            && self.violations.is_empty()
            && self.looping_routes.is_empty()
            && self.pairs_routed == self.pairs_total
    }

    /// Average routed hops over average unrestricted shortest-path hops.
    pub fn stretch(&self) -> f64 {
        if self.avg_bfs_hops > 0.0 {
            self.avg_routed_hops / self.avg_bfs_hops
        } else {
            1.0
        }
    }
}

pub fn verify_deadlock_free(topology: &Topology, cdg: &Cdg, turns: &TurnSet, table: &RoutingTable) -> DeadlockReport {
    let n = topology.num_sites();
    let order = allowed_topological_order(cdg, turns);
    let mut violations = Vec::new();
    let mut looping = Vec::new();
    let mut routed = 0;
    let mut bfs_total = 0usize;
    let mut routed_total = 0usize;
    let mut max_extra = 0;
    let consistent = table.num_sites == n && table.sites_of == cdg.channels;
    for src in 0..n {
        let bfs = topology.bfs(src);
        for dst in (0..n).filter(|&d| d != src) {
            bfs_total += bfs[dst];
            if !consistent {
                continue;
            }
            let route = table.route(src, dst);
            let sites = table.route_sites(src, dst);
            let connected = !route.is_empty()
                && cdg.channels[route[0] as usize].from == src
                && route.windows(2).all(|w| cdg.channels[w[0] as usize].to == cdg.channels[w[1] as usize].from)
                && *sites.last().unwrap() == dst;
            if connected {
                routed += 1;
                routed_total += route.len();
                max_extra = max_extra.max(route.len().saturating_sub(bfs[dst]));
            }
            for w in route.windows(2) {
                let (a, b) = (w[0] as usize, w[1] as usize);
                if turns.is_forbidden(a, b) || !cdg.turns[a].contains(&b) {
                    violations.push(TurnViolation {
                        src,
                        dst,
                        in_channel: cdg.channels[a],
                        out_channel: cdg.channels[b],
                    });
                }
            }
            let distinct: BTreeSet<_> = sites.iter().collect();
            if distinct.len() != sites.len() {
                looping.push((src, dst));
            }
        }
    }
    let pairs = (n * n.saturating_sub(1)).max(1) as f64;
    DeadlockReport {
        cdg_acyclic: order.is_some(),
        topological_order: order,
        forbidden_turns: turns.len(),
        total_turns: cdg.num_turns(),
        pairs_routed: routed,
        pairs_total: n * n.saturating_sub(1),
        violations,
        looping_routes: looping,
        avg_routed_hops: routed_total as f64 / pairs,
        avg_bfs_hops: bfs_total as f64 / pairs,
        max_extra_hops: max_extra,
    }
}

/// CDG, turn set and routes of one topology.
#[derive(Clone, Debug)]
pub struct Routing {
    pub cdg: Cdg,
    pub strategy: TurnStrategy,
    pub turns: TurnSet,
    pub table: RoutingTable,
}

impl Routing {
    pub fn build(topology: &Topology) -> Result<Routing> {
        Self::build_with(topology, TurnStrategy::Auto)
    }

    pub fn build_with(topology: &Topology, strategy: TurnStrategy) -> Result<Routing> {
        let cdg = build_cdg(topology);
        let (strategy, turns, table) = match strategy {
            TurnStrategy::Auto => auto_select(&cdg)?,
            s => {
                let turns = break_cycles_with(&cdg, s)?;
                let table = build_routing_tables(&cdg, &turns)?;
                (s, turns, table)
            }
        };
        Ok(Routing { cdg, strategy, turns, table })
    }

    pub fn verify(&self, topology: &Topology) -> DeadlockReport {
        verify_deadlock_free(topology, &self.cdg, &self.turns, &self.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{build_placement, Arrangement, Dims, Placement, PhyPolicy};
    use crate::topology::generate_topology;

    fn grid(r: usize, c: usize) -> Placement {
        build_placement(Arrangement::Grid, Dims::Rect { rows: r, cols: c }, 74.0, 0.15).unwrap()
    }

    fn mesh(r: usize, c: usize) -> Topology {
        generate_topology(&TopologyKind::Mesh, &grid(r, c)).unwrap()
    }

    #[test]
    fn cdg_small_cases() {
        let one = build_cdg(&mesh(1, 2));
        assert_eq!((one.num_channels(), one.num_turns()), (2, 0));
        let path = build_cdg(&mesh(1, 3));
        assert_eq!((path.num_channels(), path.num_turns()), (4, 2));
        let ring = build_cdg(&mesh(2, 2));
        assert_eq!((ring.num_channels(), ring.num_turns()), (8, 8));
        assert!(allowed_topological_order(&ring, &TurnSet::default()).is_none());
    }

    fn is_clockwise(cdg: &Cdg, a: usize, b: usize) -> bool {
        // 2x2 ring clockwise in (row, col): 0 -> 1 -> 3 -> 2 -> 0
        let cw = [(0, 1), (1, 3), (3, 2), (2, 0)];
        let (x, y) = (cdg.channel(a), cdg.channel(b));
        cw.contains(&(x.from, x.to)) && cw.contains(&(y.from, y.to))
    }

    #[test]
    fn ring_of_four_breaks_both_directions() {
        for strategy in [TurnStrategy::WestFirst, TurnStrategy::TurnProhibition] {
            let cdg = build_cdg(&mesh(2, 2));
            let turns = break_cycles_with(&cdg, strategy).unwrap();
            let cw = turns.iter().filter(|&(a, b)| is_clockwise(&cdg, a, b)).count();
            assert!(cw >= 1 && turns.len() - cw >= 1, "{strategy:?}");
            assert!(allowed_topological_order(&cdg, &turns).is_some());
        }
    }

    #[test]
    fn tree_needs_no_prohibitions() {
        let p = grid(1, 5);
        let star = Topology::from_edges(TopologyKind::Extension("star".into()), p, PhyPolicy::Edge, (1..5).map(|i| (0, i))).unwrap();
        let cdg = build_cdg(&star);
        let turns = break_cycles(&cdg).unwrap();
        assert!(turns.is_empty());
    }

    #[test]
    fn mesh_4x4_routes() {
        let t = mesh(4, 4);
        let r = Routing::build(&t).unwrap();
        let rep = r.verify(&t);
        assert!(rep.pass());
        assert_eq!(rep.pairs_routed, 240);
        assert_eq!(rep.max_extra_hops, 0);
        assert!((rep.stretch() - 1.0).abs() < 1e-12);
        assert_eq!(r.table.hops(0, 15), 6);
        assert!(r.table.route(5, 5).is_empty());
        assert_eq!(r.table.route_sites(0, 15).first(), Some(&0));
        assert_eq!(r.table.route_sites(0, 15).last(), Some(&15));
    }

    #[test]
    fn injected_fault_is_reported() {
        let t = mesh(3, 3);
        let r = Routing::build(&t).unwrap();
        // forbid the first turn some route uses
        let (src, dst) = (0, 8);
        let route = r.table.route(src, dst).to_vec();
        assert!(route.len() >= 2);
        let mut turns = r.turns.clone();
        turns.insert(route[0] as usize, route[1] as usize);
        let rep = verify_deadlock_free(&t, &r.cdg, &turns, &r.table);
        assert!(!rep.pass());
        assert!(rep.violations.iter().any(|v| v.src == src && v.dst == dst));
    }

    #[test]
    fn deterministic_tables() {
        let t = generate_topology(&TopologyKind::FoldedTorus, &grid(4, 4)).unwrap();
        let a = Routing::build(&t).unwrap();
        let b = Routing::build(&t).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.turns, b.turns);
        let doc = serde_json::to_string(&a.table.to_doc()).unwrap();
        assert_eq!(doc, serde_json::to_string(&b.table.to_doc()).unwrap());
    }

    #[test]
    fn articulation_points_on_path() {
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        assert_eq!(articulation_points(&adj, &[true; 3]), vec![false, true, false]);
        assert_eq!(articulation_points(&adj, &[false, true, true]), vec![false, false, false]);
    }
}
