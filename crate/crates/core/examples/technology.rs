use chiplet_ici::techmodel::{
    absolute_throughput, chiplet_area_mm2, phy_area_share, rate_fraction, wires_per_link, Substrate, Technology,
};

fn main() -> chiplet_ici::Result<()> {
    for substrate in [Substrate::Organic, Substrate::Glass] {
        let tech = Technology::defaults(substrate, 32.0);
        println!("{}", substrate.name());
        for mm in [2.0, 10.0, 25.0, 50.0, 69.9, 70.0] {
            println!("  rate({mm:>5} mm) = {:.3}", rate_fraction(mm, &tech.rates)?);
        }
        for radix in [4, 6, 8] {
            println!(
                "  radix {radix}: {} wires/link, area {:.1} mm2, phy share {:.1}%, T_a at T_r 0.1 and 3 mm: {:.2} Tb/s",
                wires_per_link(&tech.params, radix)?,
                chiplet_area_mm2(&tech.params, radix),
                100.0 * phy_area_share(&tech.params, radix),
                absolute_throughput(0.1, &tech.params, radix, 3.0, &tech.rates)? / 1e12,
            );
        }
    }
    Ok(())
}
