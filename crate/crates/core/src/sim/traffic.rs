//! Synthetic traffic patterns.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{ChipletKind, Placement};
use crate::sim::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    Uniform,
    Permutation,
    Tornado,
    Neighbor,
    HeteroMix,
    Trace,
}

impl TrafficPattern {
    pub const SYNTHETIC: [TrafficPattern; 5] = [
        TrafficPattern::Uniform,
        TrafficPattern::Permutation,
        TrafficPattern::Tornado,
        TrafficPattern::Neighbor,
        TrafficPattern::HeteroMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrafficPattern::Uniform => "uniform",
            TrafficPattern::Permutation => "permutation",
            TrafficPattern::Tornado => "tornado",
            TrafficPattern::Neighbor => "neighbor",
            TrafficPattern::HeteroMix => "hetero_mix",
            TrafficPattern::Trace => "trace",
        }
    }
}

impl fmt::Display for TrafficPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrafficPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "uniform" | "random_uniform" => Ok(TrafficPattern::Uniform),
            "permutation" | "random_permutation" => Ok(TrafficPattern::Permutation),
            "tornado" => Ok(TrafficPattern::Tornado),
            "neighbor" | "neighbour" => Ok(TrafficPattern::Neighbor),
            "hetero_mix" | "hetero" => Ok(TrafficPattern::HeteroMix),
            "trace" => Ok(TrafficPattern::Trace),
            _ => Err(Error::InvalidArgument(format!("unknown traffic pattern '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrafficSpec {
    pub pattern: TrafficPattern,
    /// Probability that a hetero_mix packet targets a memory chiplet.
    pub mix_core_to_mem: f64,
    pub trace: Option<Trace>,
}

impl TrafficSpec {
    pub fn new(pattern: TrafficPattern) -> TrafficSpec {
        TrafficSpec { pattern, mix_core_to_mem: 0.5, trace: None }
    }

    pub fn uniform() -> TrafficSpec {
        Self::new(TrafficPattern::Uniform)
    }

    pub fn trace(trace: Trace) -> TrafficSpec {
        TrafficSpec { pattern: TrafficPattern::Trace, mix_core_to_mem: 0.5, trace: Some(trace) }
    }
}

/// Destination sampler for one placement and synthetic pattern.
#[derive(Clone, Debug)]
pub struct DestinationGen {
    pattern: TrafficPattern,
    mix: f64,
    n: usize,
    sources: Vec<usize>,
    compute: Vec<usize>,
    memory: Vec<usize>,
    permutation: Vec<usize>,
    /// (row member list index, position in row) per site
    row_pos: Vec<(usize, usize)>,
    rows: Vec<Vec<usize>>,
}

impl DestinationGen {
    /// `seed` fixes the permutation pattern's derangement.
    pub fn new(spec: &TrafficSpec, placement: &Placement, seed: u64) -> Result<DestinationGen> {
        let n = placement.len();
        let rows: Vec<Vec<usize>> = (0..placement.rows()).map(|r| placement.row(r).to_vec()).collect();
        let mut row_pos = vec![(0, 0); n];
        for (r, members) in rows.iter().enumerate() {
            for (i, &id) in members.iter().enumerate() {
                row_pos[id] = (r, i);
            }
        }
        let compute: Vec<usize> = placement.sites_of_kind(ChipletKind::Compute).collect();
        let memory: Vec<usize> = placement.sites_of_kind(ChipletKind::Memory).collect();
        let mut gen = DestinationGen {
            pattern: spec.pattern,
            mix: spec.mix_core_to_mem,
            n,
            sources: (0..n).collect(),
            compute,
            memory,
            permutation: Vec::new(),
            row_pos,
            rows,
        };
        match spec.pattern {
            TrafficPattern::Trace => {
                return Err(Error::Config("trace traffic has no destination sampler".into()));
            }
            TrafficPattern::Uniform if n < 2 => {
                return Err(Error::Config("uniform traffic needs at least 2 sites".into()));
            }
            TrafficPattern::Permutation => {
                if n < 2 {
                    return Err(Error::Config("a permutation needs at least 2 sites".into()));
                }
                gen.permutation = derangement(n, seed);
            }
            TrafficPattern::HeteroMix => {
                if !(0.0..=1.0).contains(&spec.mix_core_to_mem) {
                    return Err(Error::Config("mix_core_to_mem must lie in [0, 1]".into()));
                }
                if gen.memory.is_empty() {
                    return Err(Error::Config("hetero_mix needs memory chiplets in the placement".into()));
                }
                if gen.compute.len() < 2 && spec.mix_core_to_mem < 1.0 {
                    return Err(Error::Config("hetero_mix needs at least 2 compute chiplets".into()));
                }
                gen.sources = gen.compute.clone();
            }
            _ => {}
        }
        Ok(gen)
    }

    pub fn pattern(&self) -> TrafficPattern {
        self.pattern
    }

    /// Sites whose cores inject traffic.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sample(&self, src: usize, rng: &mut impl Rng) -> usize {
        match self.pattern {
            TrafficPattern::Uniform => {
                let d = rng.random_range(0..self.n - 1);
                if d >= src {
                    d + 1
                } else {
                    d
                }
            }
            TrafficPattern::Permutation => self.permutation[src],
            TrafficPattern::Tornado => {
                let (r, i) = self.row_pos[src];
                let row = &self.rows[r];
                row[(i + row.len() / 2) % row.len()]
            }
            TrafficPattern::Neighbor => {
                let (r, i) = self.row_pos[src];
                let row = &self.rows[r];
                row[(i + 1) % row.len()]
            }
            TrafficPattern::HeteroMix => {
                if rng.random::<f64>() < self.mix {
                    self.memory[rng.random_range(0..self.memory.len())]
                } else {
                    pick_other(&self.compute, src, rng)
                }
            }
            TrafficPattern::Trace => unreachable!("rejected in DestinationGen::new"),
        }
    }
}

/// Uniform member of `set` other than `src` (`set` sorted, length ≥ 2 when
/// it contains `src`).
fn pick_other(set: &[usize], src: usize, rng: &mut impl Rng) -> usize {
    match set.binary_search(&src) {
        Ok(pos) => {
            let d = rng.random_range(0..set.len() - 1);
            set[if d >= pos { d + 1 } else { d }]
        }
        Err(_) => set[rng.random_range(0..set.len())],
    }
}

/// Seeded permutation without fixed points.
pub fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_9e37);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    // rotate each fixed point onto its successor's target to remove it
    for i in 0..n {
        if p[i] == i {
            let j = (i + 1) % n;
            p.swap(i, j);
        }
    }
    p
}

/// One-off destination draw; the permutation pattern uses derangement seed 0.
pub fn gen_destination(
    pattern: TrafficPattern,
    src: usize,
    placement: &Placement,
    rng: &mut impl Rng,
) -> Result<usize> {
    if src >= placement.len() {
        return Err(Error::InvalidArgument(format!("source {src} outside placement")));
    }
    let gen = DestinationGen::new(&TrafficSpec::new(pattern), placement, 0)?;
    if pattern == TrafficPattern::HeteroMix && !gen.sources.contains(&src) {
        return Err(Error::Config(format!("site {src} is not a compute chiplet")));
    }
    Ok(gen.sample(src, rng))
}
