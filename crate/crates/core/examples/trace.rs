use chiplet_ici::harness::build_bundle;
use chiplet_ici::placement::{KindScheme, PhyPolicy};
use chiplet_ici::sim::{gen_trace, replay_trace, GenTraceParams, SimParams};
use chiplet_ici::techmodel::{Substrate, Technology};
use chiplet_ici::topology::TopologyKind;

fn main() -> chiplet_ici::Result<()> {
    let tech = Technology::defaults(Substrate::Glass, 32.0);
    let params = SimParams::from_tech(&tech);
    let gen = GenTraceParams { cycles: 20_000, ..GenTraceParams::default() };
    for kind in [TopologyKind::Mesh, TopologyKind::HexaMesh, TopologyKind::FoldedHexaTorus] {
        let b = build_bundle(&kind, 64, tech.clone(), None, KindScheme::TraceCmi, PhyPolicy::Edge)?;
        let trace = gen_trace(&b.placement, &gen)?;
        let s = replay_trace(&b.topology, &b.routing.table, &tech, &trace, &params)?;
        println!(
            "{}: {} packets, avg latency {:.1} ns, p99 {:.1} ns, finished at cycle {}",
            kind.name(),
            s.delivered_packets,
            s.avg_latency_ns,
            s.p99_latency_ns,
            s.cycles
        );
    }
    Ok(())
}
