use chiplet_ici::harness::{build_bundle, DEFAULT_COUNTS};
use chiplet_ici::placement::{KindScheme, PhyPolicy};
use chiplet_ici::techmodel::{Substrate, Technology};
use chiplet_ici::topology::{check_table1, TopologyKind};

fn main() {
    let tech = Technology::defaults(Substrate::Organic, 32.0);
    println!("{:<20} {:>4} {:>5} {:>5} {:>6} {:>8}  table", "family", "N", "diam", "radix", "range", "L mm");
    for kind in TopologyKind::BUILTIN {
        for n in DEFAULT_COUNTS {
            match build_bundle(&kind, n, tech.clone(), None, KindScheme::Homogeneous, PhyPolicy::Edge) {
                Ok(b) => {
                    let m = &b.metrics;
                    let check = check_table1(&kind, m, n);
                    println!(
                        "{:<20} {:>4} {:>5} {:>5} {:>6} {:>8.2}  {}",
                        kind.name(),
                        n,
                        m.diameter,
                        m.radix,
                        m.max_range,
                        m.max_length_mm,
                        if check.pass() { "ok" } else { "mismatch" }
                    );
                }
                Err(e) => println!("{:<20} {:>4}  skipped: {e}", kind.name(), n),
            }
        }
    }
}
