//! Substrate technology parameters and the closed-form models built on them:
//! data rate versus link length, bump budgets, link bandwidth, absolute
//! throughput, link latency, chiplet area and power.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Substrate {
    Organic,
    Glass,
}

impl Substrate {
    pub fn name(self) -> &'static str {
        match self {
            Substrate::Organic => "organic",
            Substrate::Glass => "glass",
        }
    }
}

impl fmt::Display for Substrate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Substrate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "organic" => Ok(Substrate::Organic),
            "glass" => Ok(Substrate::Glass),
            other => invalid(format!("unknown substrate '{other}'")),
        }
    }
}

/// Package and chiplet parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechParams {
    pub substrate: Substrate,
    /// Chiplet spacing S_c in µm.
    pub spacing_um: f64,
    /// Chiplet logic area A_c in mm².
    pub chiplet_area_mm2: f64,
    /// Area of one PHY, A_p, in mm².
    pub phy_area_mm2: f64,
    /// Chiplet logic power P_c in W.
    pub chiplet_power_w: f64,
    /// Link energy per transmitted bit in pJ.
    pub energy_per_bit_pj: f64,
    pub phy_latency_ns: f64,
    pub router_latency_ns: f64,
    /// Fraction of bumps reserved for power delivery.
    pub power_bump_fraction: f64,
    /// Fraction of bumps reserved for off-chip I/O.
    pub io_bump_fraction: f64,
    pub cores_per_chiplet: usize,
    pub bump_pitch_um: f64,
    /// Clock, handshake and other non-payload wires per link.
    pub non_data_wires: u64,
    pub dielectric_constant: f64,
    pub speed_of_light_km_s: f64,
    /// Peak per-wire data rate R_max at zero length, Gbit/s.
    pub max_wire_rate_gbps: f64,
    pub cycle_time_ns: f64,
}

impl TechParams {
    /// Default parameters for a substrate. The peak wire rate has no default
    /// and must be supplied.
    pub fn defaults(substrate: Substrate, max_wire_rate_gbps: f64) -> TechParams {
        let (spacing_um, bump_pitch_um, dielectric_constant) = match substrate {
            Substrate::Organic => (150.0, 50.0, 3.1),
            Substrate::Glass => (100.0, 35.0, 3.3),
        };
        TechParams {
            substrate,
            spacing_um,
            chiplet_area_mm2: 74.0,
            phy_area_mm2: 0.88,
            chiplet_power_w: 25.0,
            energy_per_bit_pj: 0.3,
            phy_latency_ns: 2.0,
            router_latency_ns: 3.0,
            power_bump_fraction: 0.5,
            io_bump_fraction: 0.2,
            cores_per_chiplet: 8,
            bump_pitch_um,
            non_data_wires: 12,
            dielectric_constant,
            speed_of_light_km_s: 299_792.0,
            max_wire_rate_gbps,
            cycle_time_ns: 1.0,
        }
    }

    pub fn organic(max_wire_rate_gbps: f64) -> TechParams {
        Self::defaults(Substrate::Organic, max_wire_rate_gbps)
    }

    pub fn glass(max_wire_rate_gbps: f64) -> TechParams {
        Self::defaults(Substrate::Glass, max_wire_rate_gbps)
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_um / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing_um", self.spacing_um),
            ("chiplet_area_mm2", self.chiplet_area_mm2),
            ("phy_area_mm2", self.phy_area_mm2),
            ("chiplet_power_w", self.chiplet_power_w),
            ("energy_per_bit_pj", self.energy_per_bit_pj),
            ("phy_latency_ns", self.phy_latency_ns),
            ("router_latency_ns", self.router_latency_ns),
            ("power_bump_fraction", self.power_bump_fraction),
            ("io_bump_fraction", self.io_bump_fraction),
            ("bump_pitch_um", self.bump_pitch_um),
            ("dielectric_constant", self.dielectric_constant),
            ("speed_of_light_km_s", self.speed_of_light_km_s),
            ("max_wire_rate_gbps", self.max_wire_rate_gbps),
            ("cycle_time_ns", self.cycle_time_ns),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cores_per_chiplet == 0 {
            return Err(Error::Config("cores_per_chiplet must be positive".into()));
        }
        if self.power_bump_fraction + self.io_bump_fraction >= 1.0 {
            return Err(Error::Config("power and I/O bump fractions must sum below 1".into()));
        }
        Ok(())
    }

    pub fn router_latency_cycles(&self) -> u64 {
        quantize(self.router_latency_ns, self.cycle_time_ns)
    }

    pub fn phy_latency_cycles(&self) -> u64 {
        quantize(self.phy_latency_ns, self.cycle_time_ns)
    }
}

fn quantize(ns: f64, cycle_ns: f64) -> u64 {
    // shave float noise so 3.0000000001 cycles stays 3
    ((ns / cycle_ns) - 1e-9).ceil().max(0.0) as u64
}

/// Achievable fraction of the peak data rate as a function of link length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// (length in mm, fraction of peak rate), strictly increasing in length.
    pub anchors: Vec<(f64, f64)>,
    /// Links at or beyond this length carry nothing.
    pub cutoff_mm: f64,
}

impl RateTable {
    pub fn new(anchors: Vec<(f64, f64)>, cutoff_mm: f64) -> Result<RateTable> {
        let t = RateTable { anchors, cutoff_mm };
        t.validate()?;
        Ok(t)
    }

    /// Piecewise-linear defaults through the known points of the
    /// rate-versus-length curve. The range-2 anchor sits at the longest
    /// range-2 link (a 45° diagonal) of a 74 mm² chiplet.
    pub fn default_for(substrate: Substrate) -> RateTable {
        let anchors = match substrate {
            Substrate::Organic => vec![(8.9, 0.97), (16.2, 0.89), (28.6, 0.47), (70.0, 0.05)],
            Substrate::Glass => vec![(8.8, 1.00), (16.1, 0.99), (28.4, 0.66), (70.0, 0.05)],
        };
        RateTable { anchors, cutoff_mm: 70.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::Config("rate table needs at least one anchor".into()));
        }
        if !(self.cutoff_mm > 0.0) {
            return Err(Error::Config("rate table cutoff must be positive".into()));
        }
        for &(len, frac) in &self.anchors {
            if !(len >= 0.0) || !(0.0..=1.0).contains(&frac) {
                return Err(Error::Config(format!("bad rate anchor ({len}, {frac})")));
            }
        }
        for w in self.anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config("rate anchors must strictly increase in length".into()));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::Config("rate anchors must not increase in fraction".into()));
            }
        }
        Ok(())
    }

    /// Fraction of the peak rate at `length_mm`. Assumes a validated table.
    pub fn fraction(&self, length_mm: f64) -> f64 {
        if length_mm >= self.cutoff_mm {
            return 0.0;
        }
        let first = self.anchors[0];
        if length_mm < first.0 {
            return 1.0;
        }
        for w in self.anchors.windows(2) {
            let ((l0, f0), (l1, f1)) = (w[0], w[1]);
            if length_mm <= l1 {
                return f0 + (f1 - f0) * (length_mm - l0) / (l1 - l0);
            }
        }
        self.anchors.last().unwrap().1
    }
}

/// Technology parameters together with their rate-versus-length table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub params: TechParams,
    pub rates: RateTable,
}

impl Technology {
    pub fn new(params: TechParams, rates: RateTable) -> Result<Technology> {
        params.validate()?;
        rates.validate()?;
        Ok(Technology { params, rates })
    }

    pub fn defaults(substrate: Substrate, max_wire_rate_gbps: f64) -> Technology {
        Technology {
            params: TechParams::defaults(substrate, max_wire_rate_gbps),
            rates: RateTable::default_for(substrate),
        }
    }

    pub fn substrate(&self) -> Substrate {
        self.params.substrate
    }
}

pub fn rate_fraction(length_mm: f64, table: &RateTable) -> Result<f64> {
    if !(length_mm >= 0.0) {
        return invalid(format!("link length must be non-negative, got {length_mm}"));
    }
    table.validate()?;
    Ok(table.fraction(length_mm))
}

/// Data wires available to each of `radix` links.
pub fn wires_per_link(tech: &TechParams, radix: usize) -> Result<u64> {
    if radix == 0 {
        return invalid("radix must be at least 1");
    }
    let pitch = tech.bump_pitch_um;
    let total = (tech.chiplet_area_mm2 * 1e6 / (pitch * pitch) + 1e-9).floor();
    let signal = ((1.0 - tech.power_bump_fraction - tech.io_bump_fraction) * total + 1e-9).floor() as u64;
    let per_link = signal / radix as u64;
    if per_link <= tech.non_data_wires {
        return Err(Error::RadixTooHigh {
            radix,
            per_link_bumps: per_link,
            non_data_wires: tech.non_data_wires,
        });
    }
    Ok(per_link - tech.non_data_wires)
}

pub fn link_bandwidth_bits_per_s(
    tech: &TechParams,
    radix: usize,
    length_mm: f64,
    table: &RateTable,
) -> Result<f64> {
    let wires = wires_per_link(tech, radix)?;
    Ok(wires as f64 * rate_fraction(length_mm, table)? * tech.max_wire_rate_gbps * 1e9)
}

/// Bits carried by one flit: one cycle of a link running at the rate
/// allowed by the topology's longest link.
pub fn flit_bits(tech: &TechParams, radix: usize, max_link_mm: f64, table: &RateTable) -> Result<f64> {
    Ok(link_bandwidth_bits_per_s(tech, radix, max_link_mm, table)? * tech.cycle_time_ns * 1e-9)
}

/// Per-chiplet throughput in bits/s from the per-core saturation rate
/// `t_r` (flits per core per cycle):
/// `T_a = T_r · N_c · W · rate(L̂) · R_max`.
pub fn absolute_throughput(
    t_r: f64,
    tech: &TechParams,
    radix: usize,
    max_link_mm: f64,
    table: &RateTable,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t_r) {
        return invalid(format!("relative throughput must lie in [0, 1], got {t_r}"));
    }
    Ok(t_r * tech.cores_per_chiplet as f64 * link_bandwidth_bits_per_s(tech, radix, max_link_mm, table)?)
}

/// Wire delay `L·√ε_r / c`, rounded up to whole cycles.
pub fn link_latency_cycles(length_mm: f64, tech: &TechParams) -> u64 {
    if length_mm <= 0.0 {
        return 0;
    }
    let seconds = length_mm * 1e-3 * tech.dielectric_constant.sqrt() / (tech.speed_of_light_km_s * 1e3);
    let cycles = seconds / (tech.cycle_time_ns * 1e-9);
    (cycles.ceil() as u64).max(1)
}

pub fn chiplet_area_mm2(tech: &TechParams, radix: usize) -> f64 {
    tech.chiplet_area_mm2 + radix as f64 * tech.phy_area_mm2
}

/// Share of a radix-`radix` chiplet's area taken by PHYs.
pub fn phy_area_share(tech: &TechParams, radix: usize) -> f64 {
    radix as f64 * tech.phy_area_mm2 / chiplet_area_mm2(tech, radix)
}

/// Logic power of all chiplets plus link power for the given per-PHY bit rates.
pub fn system_power_w(tech: &TechParams, num_chiplets: usize, per_phy_bits_per_s: &[f64]) -> f64 {
    let bits: f64 = per_phy_bits_per_s.iter().sum();
    num_chiplets as f64 * tech.chiplet_power_w + bits * tech.energy_per_bit_pj * 1e-12
}
