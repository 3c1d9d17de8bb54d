use chiplet_ici::harness::build_bundle;
use chiplet_ici::placement::{KindScheme, PhyPolicy};
use chiplet_ici::sim::{find_saturation, simulate, SimParams, TrafficPattern, TrafficSpec};
use chiplet_ici::techmodel::{Substrate, Technology};
use chiplet_ici::topology::TopologyKind;

fn main() -> chiplet_ici::Result<()> {
    let tech = Technology::defaults(Substrate::Organic, 32.0);
    let b = build_bundle(&TopologyKind::FoldedHexaTorus, 37, tech.clone(), None, KindScheme::Homogeneous, PhyPolicy::Edge)?;
    let params = SimParams::from_tech(&tech);
    for pattern in [TrafficPattern::Uniform, TrafficPattern::Tornado] {
        let spec = TrafficSpec::new(pattern);
        let sat = find_saturation(&b.topology, &b.routing.table, &tech, &spec, &params)?;
        println!("{}: saturation {:.4} flits/core/cycle", pattern.name(), sat.rate);
        for frac in [0.25, 0.5, 0.9] {
            let s = simulate(&b.topology, &b.routing.table, &tech, &spec, &params, frac * sat.rate)?;
            println!(
                "  at {:.0}%: accepted {:.4}, latency {:.1} ns (zero load {:.1} ns)",
                frac * 100.0,
                s.accepted_rate,
                s.avg_latency_ns,
                s.zero_load_latency_ns
            );
        }
    }
    Ok(())
}
