use chiplet_ici::placement::{build_placement, Arrangement, Dims, PhyPolicy};

fn main() -> chiplet_ici::Result<()> {
    let grid = build_placement(Arrangement::Grid, Dims::Rect { rows: 4, cols: 4 }, 74.0, 0.15)?;
    let hex = build_placement(Arrangement::HexSpiral, Dims::Hex { radius: 3 }, 74.0, 0.15)?;
    println!("grid: {} chiplets, pitch {:.2} mm", grid.len(), grid.pitch_mm());
    println!("hex spiral: {} chiplets", hex.len());
    for (a, b) in [(0, 1), (0, 5), (0, 15)] {
        println!(
            "grid {a}-{b}: range {}, edge {:.2} mm, center {:.2} mm",
            grid.link_range(a, b)?,
            grid.link_length_mm(a, b, PhyPolicy::Edge)?,
            grid.link_length_mm(a, b, PhyPolicy::Center)?,
        );
    }
    Ok(())
}
