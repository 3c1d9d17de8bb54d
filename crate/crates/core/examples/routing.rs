use chiplet_ici::harness::build_bundle;
use chiplet_ici::placement::{KindScheme, PhyPolicy};
use chiplet_ici::routing::{Routing, TurnStrategy};
use chiplet_ici::techmodel::{Substrate, Technology};
use chiplet_ici::topology::TopologyKind;

fn main() -> chiplet_ici::Result<()> {
    let tech = Technology::defaults(Substrate::Organic, 32.0);
    for kind in [TopologyKind::Mesh, TopologyKind::FoldedTorus, TopologyKind::FoldedHexaTorus] {
        let b = build_bundle(&kind, 64, tech.clone(), None, KindScheme::Homogeneous, PhyPolicy::Edge)?;
        for strategy in [TurnStrategy::Auto, TurnStrategy::TurnProhibition] {
            let r = match Routing::build_with(&b.topology, strategy) {
                Ok(r) => r,
                Err(e) => {
                    println!("{} {strategy}: {e}", kind.name());
                    continue;
                }
            };
            let report = r.verify(&b.topology);
            println!(
                "{} {strategy}: {} forbidden turns, avg hops {:.3}, stretch {:.3}, deadlock free {}",
                kind.name(),
                r.turns.len(),
                r.table.avg_hops(),
                report.stretch(),
                report.pass()
            );
        }
    }
    Ok(())
}
