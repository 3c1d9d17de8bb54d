//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line
//! on stderr (written directly, so it shows up without `--nocapture`).

use std::collections::VecDeque;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use chiplet_ici::harness::{build_bundle, run_sweep, shape_for, Bundle, ExperimentConfig, DEFAULT_COUNTS};
use chiplet_ici::placement::{build_placement, Arrangement, Dims, KindScheme, Placement, PhyPolicy};
use chiplet_ici::routing::Routing;
use chiplet_ici::sim::{find_saturation, simulate, SimParams, Simulator, TrafficPattern, TrafficSpec};
use chiplet_ici::techmodel::{absolute_throughput, Substrate, TechParams, Technology};
use chiplet_ici::topology::{generate_topology, graph_metrics, Topology, TopologyKind};

use TopologyKind::*;

struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Verdict {
        Verdict { failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }
}

fn report(id: u32, name: &str, v: &Verdict, elapsed: Duration, budget: Option<Duration>) -> (bool, bool) {
    let over = budget.is_some_and(|b| elapsed > b);
    let ok = v.failures.is_empty();
    let mut line = format!(
        "criterion {id:>2} {name}: {} ({:.1} s",
        if ok && !over { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    if let Some(b) = budget {
        line += &format!(", budget {:.0} s{}", b.as_secs_f64(), if over { " exceeded" } else { "" });
    }
    line += ")";
    for n in &v.notes {
        line += &format!("; {n}");
    }
    for f in v.failures.iter().take(10) {
        line += &format!("\n    {f}");
    }
    let _ = writeln!(std::io::stderr(), "{line}");
    (ok, over)
}

fn organic() -> Technology {
    Technology::defaults(Substrate::Organic, 32.0)
}

fn grid(kind: &TopologyKind, n: usize, tech: &Technology) -> Option<(Placement, Topology)> {
    let shape = shape_for(kind, n, None).ok()?;
    let p = build_placement(shape.arrangement, shape.dims, tech.params.chiplet_area_mm2, tech.params.spacing_mm()).ok()?;
    let t = generate_topology(kind, &p).ok()?;
    Some((p, t))
}

fn hex(kind: &TopologyKind, radius: usize, tech: &Technology) -> Topology {
    let p = build_placement(Arrangement::HexSpiral, Dims::Hex { radius }, tech.params.chiplet_area_mm2, tech.params.spacing_mm()).unwrap();
    generate_topology(kind, &p).unwrap()
}

/// BFS diameter from the link list alone.
fn oracle_diameter(t: &Topology) -> usize {
    let n = t.num_sites();
    let mut adj = vec![Vec::new(); n];
    for l in t.links() {
        adj[l.a].push(l.b);
        adj[l.b].push(l.a);
    }
    let mut diameter = 0;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        assert!(dist.iter().all(|&d| d != usize::MAX), "disconnected");
        diameter = diameter.max(*dist.iter().max().unwrap());
    }
    diameter
}

/// Axial lattice coordinates recovered from a hex site's center: rows sit
/// one pitch apart and each row is shifted by half a pitch per row. The
/// first coordinate is doubled since layouts may offset it by a half.
fn axial_from_center(p: &Placement, id: usize) -> (i64, i64) {
    let s = &p.sites()[id];
    let r = s.center_y_mm / p.pitch_mm();
    let q2 = 2.0 * s.center_x_mm / p.pitch_mm() - r;
    assert!((r - r.round()).abs() < 1e-9 && (q2 - q2.round()).abs() < 1e-9, "site {id} off the lattice");
    (q2.round() as i64, r.round() as i64)
}

fn hex_distance(a: (i64, i64), b: (i64, i64)) -> usize {
    assert!((a.0 - b.0) % 2 == 0, "sites on different sublattices");
    let (dq, dr) = ((a.0 - b.0) / 2, a.1 - b.1);
    ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as usize
}

/// Intermediate chiplets a link crosses: Chebyshev distance minus one on
/// grids, hex distance minus one on hex layouts.
fn oracle_range(p: &Placement, a: usize, b: usize) -> usize {
    let (x, y) = (&p.sites()[a], &p.sites()[b]);
    if p.arrangement().is_hex() {
        hex_distance(axial_from_center(p, a), axial_from_center(p, b)) - 1
    } else {
        x.row.abs_diff(y.row).max(x.col.abs_diff(y.col)) - 1
    }
}

fn wire_cycles(length_mm: f64, p: &TechParams) -> u64 {
    let ns = length_mm * 1e-3 * p.dielectric_constant.sqrt() / (p.speed_of_light_km_s * 1e3) * 1e9;
    (ns / p.cycle_time_ns).ceil().max(1.0) as u64
}

/// Kahn sort over channel dependencies actually exercised by the routes.
fn route_dependencies_acyclic(routing: &Routing, n: usize) -> (bool, usize) {
    let channels = routing.table.num_channels();
    let mut succ = vec![Vec::new(); channels];
    let mut indeg = vec![0usize; channels];
    let mut routed = 0;
    let mut seen = std::collections::HashSet::new();
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            let route = routing.table.route(s, d);
            let sites = routing.table.route_sites(s, d);
            if !route.is_empty() && sites.first() == Some(&s) && sites.last() == Some(&d) {
                routed += 1;
            }
            for w in route.windows(2) {
                if seen.insert((w[0], w[1])) {
                    succ[w[0] as usize].push(w[1] as usize);
                    indeg[w[1] as usize] += 1;
                }
            }
        }
    }
    let mut q: VecDeque<usize> = (0..channels).filter(|&c| indeg[c] == 0).collect();
    let mut done = 0;
    while let Some(c) = q.pop_front() {
        done += 1;
        for &e in &succ[c] {
            indeg[e] -= 1;
            if indeg[e] == 0 {
                q.push_back(e);
            }
        }
    }
    (done == channels, routed)
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new();
    let tech = organic();
    let sq = |n: usize| (n as f64).sqrt();
    let cases: [(TopologyKind, fn(f64) -> f64); 5] = [
        (Mesh, |s| 2.0 * s - 2.0),
        (Torus, |s| 2.0 * (s / 2.0).floor()),
        (FoldedTorus, |s| 2.0 * (s / 2.0).floor()),
        (Hypercube, |s| (s * s).log2()),
        (FlattenedButterfly, |_| 2.0),
    ];
    for (kind, formula) in &cases {
        for n in [16, 64, 256] {
            let (_, t) = grid(kind, n, &tech).expect("square grid builds");
            let measured = oracle_diameter(&t);
            let expected = formula(sq(n));
            v.check(measured as f64 == expected, || format!("{kind} N={n}: diameter {measured}, closed form {expected}"));
            let lib = graph_metrics(&t).unwrap().diameter;
            v.check(lib == measured, || format!("{kind} N={n}: library diameter {lib} vs oracle {measured}"));
        }
    }
    v
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new();
    let tech = organic();
    for (n, radius) in [(37, 3), (61, 4), (91, 5), (127, 6)] {
        let nf = n as f64;
        let hm = oracle_diameter(&hex(&HexaMesh, radius, &tech));
        let fht = oracle_diameter(&hex(&FoldedHexaTorus, radius, &tech));
        let hm_expected = (12.0 * nf - 3.0).sqrt() / 3.0 - 1.0;
        let fht_expected = (12.0 * nf - 3.0).sqrt() / 6.0 + 0.5;
        v.check((hm as f64 - hm_expected).abs() <= 1.0, || format!("hexa_mesh N={n}: {hm} vs {hm_expected:.2}"));
        v.check((fht as f64 - fht_expected).abs() <= 1.0, || format!("folded_hexa_torus N={n}: {fht} vs {fht_expected:.2}"));
        if hm as f64 != hm_expected || fht as f64 != fht_expected {
            v.note(format!("N={n} within +-1 (hm {hm} vs {hm_expected:.2}, fht {fht} vs {fht_expected:.2})"));
        }
    }
    let mut supported = 0;
    for n in 16..=256 {
        let (Some((_, f)), Some((_, h))) = (grid(&FoldedHexaTorus, n, &tech), grid(&HexaMesh, n, &tech)) else {
            continue;
        };
        supported += 1;
        let (df, dh) = (oracle_diameter(&f), oracle_diameter(&h));
        v.check((df as f64) < (n as f64).sqrt(), || format!("N={n}: folded_hexa_torus diameter {df} not below sqrt(N)"));
        v.check(df <= dh / 2 + 1, || format!("N={n}: folded_hexa_torus diameter {df} above hexa_mesh {dh}/2 + 1"));
    }
    v.note(format!("{supported} supported N in [16, 256]"));
    v
}

fn criterion_3() -> Verdict {
    let mut v = Verdict::new();
    let phy = 0.88;
    let total = |area: f64, radix: f64| area + radix * phy;
    let expected = [(6.0, [4.34, 2.27, 1.16]), (8.0, [8.69, 4.54, 2.32])];
    for (radix, row) in expected {
        for (area, want) in [37.0, 74.0, 148.0].into_iter().zip(row) {
            let mut p = TechParams::organic(32.0);
            p.chiplet_area_mm2 = area;
            p.phy_area_mm2 = phy;
            let lib = chiplet_ici::techmodel::chiplet_area_mm2(&p, radix as usize) / chiplet_ici::techmodel::chiplet_area_mm2(&p, 4);
            let oracle = total(area, radix) / total(area, 4.0);
            let pct = format!("{:.2}", (lib - 1.0) * 100.0);
            v.check(pct == format!("{want:.2}"), || format!("radix {radix} area {area}: {pct}% vs {want}%"));
            v.check((lib - oracle).abs() < 1e-12, || format!("radix {radix} area {area}: library ratio {lib} vs {oracle}"));
        }
    }
    let p = TechParams::organic(32.0);
    for (radix, want) in [(4, "4.54"), (6, "6.66")] {
        let share = format!("{:.2}", chiplet_ici::techmodel::phy_area_share(&p, radix) * 100.0);
        let oracle = format!("{:.2}", radix as f64 * phy / total(74.0, radix as f64) * 100.0);
        v.check(share == want && oracle == want, || format!("radix {radix}: PHY share {share}% (oracle {oracle}%) vs {want}%"));
    }
    v
}

fn criterion_4() -> Verdict {
    let mut v = Verdict::new();
    let tech = organic();
    let limits = [(FoldedTorus, 1), (FoldedHexaTorus, 1), (FoldedOctaTorus, 1), (HexaMesh, 0), (Mesh, 0), (OctaMesh, 0), (HoneycombMesh, 0)];
    for (kind, limit) in &limits {
        let mut count = 0;
        for n in 16..=256 {
            let Some((p, t)) = grid(kind, n, &tech) else { continue };
            count += 1;
            for l in t.links() {
                let r = oracle_range(&p, l.a, l.b);
                v.check(r <= *limit, || format!("{kind} N={n}: link {}-{} range {r} > {limit}", l.a, l.b));
                v.check(r == l.range, || format!("{kind} N={n}: link {}-{} library range {} vs {r}", l.a, l.b, l.range));
            }
        }
        for radius in 2..=8 {
            if !kind.is_hex_family() {
                break;
            }
            let t = hex(kind, radius, &tech);
            for l in t.links() {
                let r = oracle_range(t.placement(), l.a, l.b);
                v.check(r <= *limit, || format!("{kind} hex r{radius}: link {}-{} range {r} > {limit}", l.a, l.b));
            }
        }
        v.check(count > 0, || format!("{kind}: no supported N"));
    }
    v
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new();
    let mut points = Vec::new();
    for kind in TopologyKind::BUILTIN {
        for n in DEFAULT_COUNTS {
            points.push((kind.clone(), n));
        }
    }
    let results: Vec<(String, Option<String>, Vec<String>)> = points
        .par_iter()
        .map(|(kind, n)| {
            let label = format!("{kind} N={n}");
            let bundle = match build_bundle(kind, *n, organic(), None, KindScheme::Homogeneous, PhyPolicy::Edge) {
                Ok(b) => b,
                Err(e) => return (label, Some(e.to_string()), Vec::new()),
            };
            (label, None, deadlock_point(&bundle, *n))
        })
        .collect();
    let mut implemented = 0;
    for (label, skipped, fails) in results {
        match skipped {
            Some(reason) => v.note(format!("{label} not built ({reason})")),
            None => implemented += 1,
        }
        v.failures.extend(fails.into_iter().map(|f| format!("{label}: {f}")));
    }
    v.notes.insert(0, format!("{implemented} grid points"));
    v
}

fn deadlock_point(b: &Bundle, n: usize) -> Vec<String> {
    let mut fails = Vec::new();
    let report = b.routing.verify(&b.topology);
    if !report.cdg_acyclic || !report.pass() {
        fails.push(format!("verification failed: acyclic {} routed {}/{}", report.cdg_acyclic, report.pairs_routed, report.pairs_total));
    }
    let (acyclic, routed) = route_dependencies_acyclic(&b.routing, n);
    if !acyclic {
        fails.push("route dependencies contain a cycle".into());
    }
    if routed != n * (n - 1) {
        fails.push(format!("{routed}/{} pairs routed", n * (n - 1)));
    }
    let params = SimParams::from_tech(&b.tech);
    let traffic = TrafficSpec::uniform();
    let sat = match find_saturation(&b.topology, &b.routing.table, &b.tech, &traffic, &params) {
        Ok(s) => s,
        Err(e) => return vec![format!("saturation search failed: {e}")],
    };
    let long = SimParams { warmup_cycles: 0, measure_cycles: 1_000_000, ..params };
    match simulate(&b.topology, &b.routing.table, &b.tech, &traffic, &long, 0.9 * sat.rate) {
        Ok(s) if s.deadlock_flag => fails.push(format!("deadlock at 0.9 x {}", sat.rate)),
        Ok(s) if s.in_flight_flits > 0 => fails.push(format!("{} flits left after drain", s.in_flight_flits)),
        Ok(_) => {}
        Err(e) => fails.push(format!("long run failed: {e}")),
    }
    fails
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new();
    let tech = organic();
    let params = SimParams::from_tech(&tech);
    for kind in [Torus, FlattenedButterfly] {
        let (p, t) = grid(&kind, 256, &tech).unwrap();
        let longest = t
            .links()
            .iter()
            .map(|l| {
                let (x, y) = (&p.sites()[l.a], &p.sites()[l.b]);
                (x.center_x_mm - y.center_x_mm).hypot(x.center_y_mm - y.center_y_mm) - x.side_mm
            })
            .fold(0.0, f64::max);
        v.check(longest > 70.0, || format!("{kind} N=256: longest edge-policy link {longest:.1} mm"));
        let routing = Routing::build(&t).unwrap();
        let sat = find_saturation(&t, &routing.table, &tech, &TrafficSpec::uniform(), &params).unwrap();
        v.check(sat.rate == 0.0, || format!("{kind} N=256: saturation {}", sat.rate));
        v.note(format!("{kind} longest link {longest:.1} mm"));
    }
    v
}

fn n64_runs() -> Vec<(TopologyKind, f64, f64)> {
    let kinds = [FoldedHexaTorus, HexaMesh, Mesh, FoldedTorus];
    let jobs: Vec<(TopologyKind, u64)> = kinds.iter().flat_map(|k| (1..=3).map(move |s| (k.clone(), s))).collect();
    let runs: Vec<(TopologyKind, f64, f64)> = jobs
        .par_iter()
        .map(|(kind, seed)| {
            let b = build_bundle(kind, 64, organic(), None, KindScheme::Homogeneous, PhyPolicy::Edge).unwrap();
            let params = SimParams { seed: *seed, ..SimParams::from_tech(&b.tech) };
            let traffic = TrafficSpec::new(TrafficPattern::Uniform);
            let sat = find_saturation(&b.topology, &b.routing.table, &b.tech, &traffic, &params).unwrap();
            let t_a = absolute_throughput(sat.rate, &b.tech.params, b.metrics.radix, b.metrics.max_length_mm, &b.tech.rates).unwrap();
            let lat = simulate(&b.topology, &b.routing.table, &b.tech, &traffic, &params, 0.3 * sat.rate).unwrap();
            (kind.clone(), t_a, lat.avg_latency_ns)
        })
        .collect();
    kinds
        .iter()
        .map(|k| {
            let mine: Vec<_> = runs.iter().filter(|r| &r.0 == k).collect();
            let m = mine.len() as f64;
            (k.clone(), mine.iter().map(|r| r.1).sum::<f64>() / m, mine.iter().map(|r| r.2).sum::<f64>() / m)
        })
        .collect()
}

fn criterion_7(runs: &[(TopologyKind, f64, f64)]) -> Verdict {
    let mut v = Verdict::new();
    let t = |k: TopologyKind| runs.iter().find(|r| r.0 == k).unwrap().1;
    let (fht, hm, mesh, ft) = (t(FoldedHexaTorus), t(HexaMesh), t(Mesh), t(FoldedTorus));
    v.check(fht > hm && hm > mesh, || format!("T_a order fht {fht:.3e} > hm {hm:.3e} > mesh {mesh:.3e} violated"));
    v.check(ft > mesh, || format!("T_a folded_torus {ft:.3e} not above mesh {mesh:.3e}"));
    v.note(format!("T_a Tb/s: fht {:.2}, hm {:.2}, ft {:.2}, mesh {:.2}", fht / 1e12, hm / 1e12, ft / 1e12, mesh / 1e12));
    v
}

fn criterion_8(runs: &[(TopologyKind, f64, f64)]) -> Verdict {
    let mut v = Verdict::new();
    let l = |k: TopologyKind| runs.iter().find(|r| r.0 == k).unwrap().2;
    let (fht, hm, mesh) = (l(FoldedHexaTorus), l(HexaMesh), l(Mesh));
    v.check(fht < hm && hm < mesh, || format!("latency order fht {fht:.2} < hm {hm:.2} < mesh {mesh:.2} violated"));
    v.note(format!("latency ns: fht {fht:.2}, hm {hm:.2}, mesh {mesh:.2}"));
    v
}

/// Edge-policy lengths of straight and diagonal lattice links of a given
/// range, over a grid and a hexagon.
fn band(substrate: Substrate, range: usize) -> (f64, f64) {
    let p = TechParams::defaults(substrate, 32.0);
    let mut lengths = Vec::new();
    for (arr, dims) in [(Arrangement::Grid, Dims::Rect { rows: 8, cols: 8 }), (Arrangement::HexSpiral, Dims::Hex { radius: 4 })] {
        let pl = build_placement(arr, dims, p.chiplet_area_mm2, p.spacing_mm()).unwrap();
        for a in 0..pl.len() {
            for b in a + 1..pl.len() {
                let (x, y) = (&pl.sites()[a], &pl.sites()[b]);
                let (dx, dy) = (x.center_x_mm - y.center_x_mm, x.center_y_mm - y.center_y_mm);
                let along_axis = if arr == Arrangement::Grid {
                    let (dr, dc) = (x.row.abs_diff(y.row), x.col.abs_diff(y.col));
                    (dr == 0 || dc == 0 || dr == dc) && dr.max(dc) == range + 1
                } else {
                    let (u, w) = (axial_from_center(&pl, a), axial_from_center(&pl, b));
                    let (dq, dr) = ((u.0 - w.0) / 2, u.1 - w.1);
                    (dq == 0 || dr == 0 || dq + dr == 0) && hex_distance(u, w) == range + 1
                };
                if along_axis {
                    lengths.push(dx.hypot(dy) - x.side_mm);
                }
            }
        }
    }
    let lo = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lengths.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

fn criterion_9() -> Verdict {
    let mut v = Verdict::new();
    for substrate in [Substrate::Organic, Substrate::Glass] {
        let tech = Technology::defaults(substrate, 32.0);
        let (lo, hi) = band(substrate, 1);
        for i in 0..=100 {
            let len = lo + (hi - lo) * i as f64 / 100.0;
            let f = tech.rates.fraction(len);
            let ok = match substrate {
                Substrate::Glass => f >= 0.99,
                Substrate::Organic => (0.89..=0.97).contains(&f),
            };
            v.check(ok, || format!("{substrate} range-1 length {len:.2} mm: fraction {f:.4}"));
        }
        let (_, hi2) = band(substrate, 2);
        let f2 = tech.rates.fraction(hi2);
        let floor = if substrate == Substrate::Organic { 0.47 } else { 0.66 };
        v.check(f2 >= floor, || format!("{substrate} range-2 max {hi2:.2} mm: fraction {f2:.4} < {floor}"));
        v.note(format!("{substrate} range-1 band {lo:.2}-{hi:.2} mm, range-2 max {hi2:.2} mm"));
    }
    v
}

fn criterion_10() -> Verdict {
    use rand::{Rng, SeedableRng};
    let mut v = Verdict::new();
    let tech = organic();
    let p = &tech.params;
    let (lr, lp) = (p.router_latency_cycles(), p.phy_latency_cycles());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    let params = SimParams::from_tech(&tech);
    let mut worst = 0i64;
    for (kind, n) in [(Mesh, 16), (FoldedHexaTorus, 37)] {
        let b = build_bundle(&kind, n, tech.clone(), None, KindScheme::Homogeneous, PhyPolicy::Edge).unwrap();
        for _ in 0..100 {
            let src = rng.random_range(0..n);
            let dst = (src + rng.random_range(1..n)) % n;
            let flits = rng.random_range(1..=params.packet_flits);
            let sites = b.routing.table.route_sites(src, dst);
            let h = sites.len() as u64 - 1;
            let wires: u64 = sites
                .windows(2)
                .map(|w| {
                    let l = b.topology.links().iter().find(|l| (l.a, l.b) == (w[0], w[1]) || (l.b, l.a) == (w[0], w[1])).unwrap();
                    wire_cycles(l.length_mm, p)
                })
                .sum();
            let model = lr + h * (lr + 2 * lp) + wires + flits as u64 - 1;
            let mut sim = Simulator::new(&b.topology, &b.routing.table, &b.tech, &params).unwrap();
            sim.record_packets(true);
            sim.inject(src, dst, 0, 0, flits, true).unwrap();
            while sim.delivered().is_empty() && sim.now() < 10_000 {
                sim.step();
            }
            let Some(pkt) = sim.delivered().first() else {
                v.check(false, || format!("{kind} {src}->{dst}: not delivered"));
                continue;
            };
            let diff = pkt.latency() as i64 - model as i64;
            worst = worst.max(diff.abs());
            v.check(diff.unsigned_abs() <= h, || format!("{kind} {src}->{dst} ({h} hops, {flits} flits): {} vs model {model}", pkt.latency()));
        }
    }
    v.note(format!("max deviation {worst} cycles"));
    v
}

fn criterion_11() -> Verdict {
    let mut v = Verdict::new();
    let base = ExperimentConfig {
        families: vec![Mesh, FoldedHexaTorus, Torus],
        chiplet_counts: vec![16, 37],
        substrates: vec![Substrate::Organic, Substrate::Glass],
        patterns: vec![TrafficPattern::Uniform, TrafficPattern::Neighbor],
        seed: 7,
        ..ExperimentConfig::default()
    };
    let mut outputs = Vec::new();
    for jobs in [1, 1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { output_dir: dir.path().to_path_buf(), jobs: Some(jobs), ..base.clone() };
        run_sweep(&cfg).unwrap();
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        outputs.push((read("results.csv"), read("validation.csv")));
    }
    v.check(outputs[0] == outputs[1], || "rerun differs".into());
    v.check(outputs[0] == outputs[2], || "rerun with 3 workers differs".into());
    v.note(format!("{} bytes of results", outputs[0].0.len()));
    v
}

#[test]
fn acceptance() {
    std::env::remove_var(chiplet_ici::harness::OUT_DIR_ENV);
    let mut failed = Vec::new();
    let mut over_budget = Vec::new();
    let mut run = |id: u32, name: &str, budget: Option<u64>, f: &dyn Fn() -> Verdict| {
        let t0 = Instant::now();
        let v = f();
        let (ok, over) = report(id, name, &v, t0.elapsed(), budget.map(Duration::from_secs));
        if !ok {
            failed.push(id);
        }
        if over {
            over_budget.push(id);
        }
    };
    run(1, "closed-form diameters", Some(1), &criterion_1);
    run(2, "hex-family diameters", None, &criterion_2);
    run(3, "area ratios", None, &criterion_3);
    run(4, "link-range compliance", None, &criterion_4);
    run(6, "zero-throughput cutoff", None, &criterion_6);
    let runs = std::cell::OnceCell::new();
    run(7, "throughput ordering", Some(15 * 60), &|| criterion_7(runs.get_or_init(n64_runs)));
    run(8, "latency ordering", None, &|| criterion_8(runs.get_or_init(n64_runs)));
    run(9, "rate-table anchors", None, &criterion_9);
    run(10, "simulator micro-oracle", None, &criterion_10);
    run(11, "determinism", None, &criterion_11);
    run(5, "deadlock freedom", Some(10 * 60), &criterion_5);
    let _ = writeln!(
        std::io::stderr(),
        "acceptance: {} correctness failures {:?}; over runtime budget on this host ({} cores): {:?}",
        failed.len(),
        failed,
        rayon::current_num_threads(),
        over_budget
    );
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
