use chiplet_ici::harness::{results_csv, sweep, ExperimentConfig};

fn main() -> chiplet_ici::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
families = ["mesh", "hexa_mesh", "folded_hexa_torus"]
chiplet_counts = [16, 64]
substrates = ["organic", "glass"]

[sim_params]
warmup_cycles = 1000
measure_cycles = 5000
"#,
    )?;
    let out = sweep(&cfg)?;
    print!("{}", results_csv(&out.rows)?);
    Ok(())
}
