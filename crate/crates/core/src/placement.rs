//! Chiplet layouts on a package substrate.
//!
//! Three arrangements are supported:
//!
//! - `grid`: rows × cols square chiplets on a rectangular lattice.
//! - `hex_block`: rows × cols brick-wall, odd rows shifted right by half a pitch.
//! - `hex_spiral`: centered hexagon of radius `k` (3k²+3k+1 sites), numbered
//!   from the center outwards ring by ring.
//!
//! Hexagonal arrangements carry axial lattice coordinates so that link-ranges
//! can be measured along the three lattice axes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    Grid,
    HexBlock,
    HexSpiral,
}

impl Arrangement {
    pub fn is_hex(self) -> bool {
        matches!(self, Arrangement::HexBlock | Arrangement::HexSpiral)
    }

    pub fn name(self) -> &'static str {
        match self {
            Arrangement::Grid => "grid",
            Arrangement::HexBlock => "hex_block",
            Arrangement::HexSpiral => "hex_spiral",
        }
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arrangement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Arrangement::Grid),
            "hex_block" => Ok(Arrangement::HexBlock),
            "hex_spiral" => Ok(Arrangement::HexSpiral),
            other => invalid(format!("unknown arrangement '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipletKind {
    #[default]
    Compute,
    Memory,
    Io,
}

/// Size of an arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dims {
    Rect { rows: usize, cols: usize },
    Hex { radius: usize },
}

/// Where a link's PHYs sit when measuring its length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhyPolicy {
    /// Center-to-center distance.
    Center,
    /// Center distance minus one chiplet side (half a side per endpoint),
    /// never shorter than the chiplet spacing.
    #[default]
    Edge,
}

impl FromStr for PhyPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(PhyPolicy::Center),
            "edge" => Ok(PhyPolicy::Edge),
            other => invalid(format!("unknown phy policy '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindScheme {
    #[default]
    Homogeneous,
    /// Memory chiplets in the leftmost and rightmost column.
    MemColumns,
    /// IO chiplets in the top and bottom rows, memory on the remaining left
    /// and right edges, compute in the center.
    TraceCmi,
}

impl FromStr for KindScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(KindScheme::Homogeneous),
            "mem_columns" => Ok(KindScheme::MemColumns),
            "trace_cmi" => Ok(KindScheme::TraceCmi),
            other => invalid(format!("unknown kind scheme '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChipletSite {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub kind: ChipletKind,
    pub center_x_mm: f64,
    pub center_y_mm: f64,
    pub side_mm: f64,
    /// Lattice coordinates: (row, col) on grids, axial (q, r) on hex layouts.
    lattice: (i64, i64),
}

impl ChipletSite {
    pub fn lattice(&self) -> (i64, i64) {
        self.lattice
    }
}

#[derive(Clone, Debug)]
pub struct Placement {
    arrangement: Arrangement,
    rows: usize,
    cols: usize,
    radius: Option<usize>,
    spacing_mm: f64,
    chiplet_area_mm2: f64,
    side_mm: f64,
    sites: Vec<ChipletSite>,
    /// Site ids of each row, ordered by column.
    row_members: Vec<Vec<usize>>,
    by_lattice: HashMap<(i64, i64), usize>,
}

const HEX_DIRECTIONS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

pub fn build_placement(
    arrangement: Arrangement,
    dims: Dims,
    chiplet_area_mm2: f64,
    spacing_mm: f64,
) -> Result<Placement> {
    if !(chiplet_area_mm2 > 0.0) || !chiplet_area_mm2.is_finite() {
        return invalid(format!("chiplet area must be positive, got {chiplet_area_mm2}"));
    }
    if !(spacing_mm > 0.0) || !spacing_mm.is_finite() {
        return invalid(format!("chiplet spacing must be positive, got {spacing_mm}"));
    }
    let side = chiplet_area_mm2.sqrt();
    let pitch = side + spacing_mm;

    let mut sites = Vec::new();
    let (rows, cols, radius) = match (arrangement, dims) {
        (Arrangement::Grid | Arrangement::HexBlock, Dims::Rect { rows, cols }) => {
            if rows == 0 || cols == 0 {
                return invalid(format!("dimensions must be positive, got {rows}x{cols}"));
            }
            let hex = arrangement == Arrangement::HexBlock;
            for row in 0..rows {
                for col in 0..cols {
                    let shift = if hex && row % 2 == 1 { pitch / 2.0 } else { 0.0 };
                    let lattice = if hex {
                        (col as i64 - (row as i64 - (row as i64 & 1)) / 2, row as i64)
                    } else {
                        (row as i64, col as i64)
                    };
                    sites.push(ChipletSite {
                        id: sites.len(),
                        row,
                        col,
                        kind: ChipletKind::Compute,
                        center_x_mm: col as f64 * pitch + shift,
                        center_y_mm: row as f64 * pitch,
                        side_mm: side,
                        lattice,
                    });
                }
            }
            (rows, cols, None)
        }
        (Arrangement::HexSpiral, Dims::Hex { radius }) => {
            if radius == 0 {
                return invalid("hexagon radius must be positive");
            }
            let k = radius as i64;
            for (q, r) in spiral_order(k) {
                let q_min = (-k).max(-r - k);
                let x = (q as f64 + r as f64 / 2.0 + k as f64) * pitch;
                sites.push(ChipletSite {
                    id: sites.len(),
                    row: (r + k) as usize,
                    col: (q - q_min) as usize,
                    kind: ChipletKind::Compute,
                    center_x_mm: x,
                    center_y_mm: (r + k) as f64 * pitch,
                    side_mm: side,
                    lattice: (q, r),
                });
            }
            (2 * radius + 1, 2 * radius + 1, Some(radius))
        }
        (a, d) => return invalid(format!("arrangement {a} does not take dimensions {d:?}")),
    };

    let mut row_members = vec![Vec::new(); rows];
    for s in &sites {
        row_members[s.row].push(s.id);
    }
    for members in &mut row_members {
        members.sort_by_key(|&id| sites[id].col);
    }
    let by_lattice = sites.iter().map(|s| (s.lattice, s.id)).collect();
    Ok(Placement {
        arrangement,
        rows,
        cols,
        radius,
        spacing_mm,
        chiplet_area_mm2,
        side_mm: side,
        sites,
        row_members,
        by_lattice,
    })
}

/// Axial coordinates of a radius-`k` hexagon: center first, then each ring.
fn spiral_order(k: i64) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 0)];
    for ring in 1..=k {
        let (dq, dr) = HEX_DIRECTIONS[4];
        let mut hex = (dq * ring, dr * ring);
        for dir in HEX_DIRECTIONS {
            for _ in 0..ring {
                out.push(hex);
                hex = (hex.0 + dir.0, hex.1 + dir.1);
            }
        }
    }
    out
}

/// Number of sites in a centered hexagon of radius `k`.
pub fn centered_hex_count(k: usize) -> usize {
    3 * k * k + 3 * k + 1
}

/// Radius `k` if `n` is a centered hexagonal number (n ≥ 7).
pub fn centered_hex_radius(n: usize) -> Option<usize> {
    (1..64).map(|k| (k, centered_hex_count(k))).find(|&(_, c)| c == n).map(|(k, _)| k)
}

pub fn assign_kinds(placement: &Placement, scheme: KindScheme) -> Result<Placement> {
    let mut out = placement.clone();
    let min_row_len = out.row_members.iter().map(Vec::len).min().unwrap_or(0);
    match scheme {
        KindScheme::Homogeneous => {
            for s in &mut out.sites {
                s.kind = ChipletKind::Compute;
            }
        }
        KindScheme::MemColumns => {
            if min_row_len < 3 {
                return invalid("mem_columns needs at least 3 columns");
            }
            for s in &mut out.sites {
                s.kind = ChipletKind::Compute;
            }
            for members in &placement.row_members {
                out.sites[members[0]].kind = ChipletKind::Memory;
                out.sites[*members.last().unwrap()].kind = ChipletKind::Memory;
            }
        }
        KindScheme::TraceCmi => {
            if placement.rows < 3 || min_row_len < 3 {
                return invalid("trace_cmi needs at least 3 rows and 3 columns");
            }
            for s in &mut out.sites {
                s.kind = ChipletKind::Compute;
            }
            for (row, members) in placement.row_members.iter().enumerate() {
                if row == 0 || row == placement.rows - 1 {
                    for &id in members {
                        out.sites[id].kind = ChipletKind::Io;
                    }
                } else {
                    out.sites[members[0]].kind = ChipletKind::Memory;
                    out.sites[*members.last().unwrap()].kind = ChipletKind::Memory;
                }
            }
        }
    }
    Ok(out)
}

impl Placement {
    pub fn arrangement(&self) -> Arrangement {
        self.arrangement
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns; the widest row for `hex_spiral`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn radius(&self) -> Option<usize> {
        self.radius
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn chiplet_area_mm2(&self) -> f64 {
        self.chiplet_area_mm2
    }

    pub fn side_mm(&self) -> f64 {
        self.side_mm
    }

    pub fn pitch_mm(&self) -> f64 {
        self.side_mm + self.spacing_mm
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[ChipletSite] {
        &self.sites
    }

    pub fn site(&self, id: usize) -> Option<&ChipletSite> {
        self.sites.get(id)
    }

    /// Site ids of `row`, left to right.
    pub fn row(&self, row: usize) -> &[usize] {
        self.row_members.get(row).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn site_at(&self, row: usize, col: usize) -> Option<usize> {
        self.row(row).get(col).copied()
    }

    pub fn site_at_lattice(&self, coord: (i64, i64)) -> Option<usize> {
        self.by_lattice.get(&coord).copied()
    }

    pub fn sites_of_kind(&self, kind: ChipletKind) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().filter(move |s| s.kind == kind).map(|s| s.id)
    }

    fn pair(&self, a: usize, b: usize) -> Result<(&ChipletSite, &ChipletSite)> {
        if a == b {
            return invalid(format!("link endpoints must differ (both {a})"));
        }
        match (self.sites.get(a), self.sites.get(b)) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => invalid(format!("site {a} or {b} not in placement of {} sites", self.len())),
        }
    }

    /// Lattice hop distance: Chebyshev on grids, hexagonal on hex layouts.
    pub fn lattice_distance(&self, a: usize, b: usize) -> Result<usize> {
        let (x, y) = self.pair(a, b)?;
        let (d0, d1) = (x.lattice.0 - y.lattice.0, x.lattice.1 - y.lattice.1);
        let d = if self.arrangement.is_hex() {
            (d0.abs() + d1.abs() + (d0 + d1).abs()) / 2
        } else {
            d0.abs().max(d1.abs())
        };
        Ok(d as usize)
    }

    /// Number of chiplets a link between `a` and `b` stretches across.
    pub fn link_range(&self, a: usize, b: usize) -> Result<usize> {
        Ok(self.lattice_distance(a, b)? - 1)
    }

    pub fn link_length_mm(&self, a: usize, b: usize, policy: PhyPolicy) -> Result<f64> {
        let (x, y) = self.pair(a, b)?;
        let dist = (x.center_x_mm - y.center_x_mm).hypot(x.center_y_mm - y.center_y_mm);
        Ok(match policy {
            PhyPolicy::Center => dist,
            PhyPolicy::Edge => (dist - self.side_mm).max(self.spacing_mm),
        })
    }

    pub fn to_doc(&self) -> PlacementDoc {
        let rect = self.radius.is_none();
        PlacementDoc {
            arrangement: self.arrangement,
            rows: rect.then_some(self.rows),
            cols: rect.then_some(self.cols),
            k: self.radius,
            spacing_mm: self.spacing_mm,
            chiplet_area_mm2: self.chiplet_area_mm2,
            sites: self
                .sites
                .iter()
                .map(|s| SiteDoc {
                    id: s.id,
                    row: s.row,
                    col: s.col,
                    kind: s.kind,
                    x_mm: s.center_x_mm,
                    y_mm: s.center_y_mm,
                })
                .collect(),
        }
    }

    /// Rebuilds a placement from its document form, checking that the listed
    /// sites match the arrangement's geometry.
    pub fn from_doc(doc: &PlacementDoc) -> Result<Placement> {
        let dims = match (doc.arrangement, doc.rows, doc.cols, doc.k) {
            (Arrangement::HexSpiral, _, _, Some(radius)) => Dims::Hex { radius },
            (_, Some(rows), Some(cols), None) => Dims::Rect { rows, cols },
            _ => return invalid("placement document has inconsistent dimensions"),
        };
        let mut p = build_placement(doc.arrangement, dims, doc.chiplet_area_mm2, doc.spacing_mm)?;
        if doc.sites.len() != p.len() {
            return Err(Error::Integrity(format!(
                "document lists {} sites, arrangement has {}",
                doc.sites.len(),
                p.len()
            )));
        }
        for s in &doc.sites {
            let site = p
                .sites
                .get_mut(s.id)
                .ok_or_else(|| Error::Integrity(format!("site id {} out of range", s.id)))?;
            let off = (site.center_x_mm - s.x_mm).abs() + (site.center_y_mm - s.y_mm).abs();
            if site.row != s.row || site.col != s.col || off > 1e-6 {
                return Err(Error::Integrity(format!("site {} does not match the arrangement", s.id)));
            }
            site.kind = s.kind;
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementDoc {
    pub arrangement: Arrangement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub spacing_mm: f64,
    pub chiplet_area_mm2: f64,
    pub sites: Vec<SiteDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteDoc {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub kind: ChipletKind,
    pub x_mm: f64,
    pub y_mm: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> Placement {
        build_placement(Arrangement::Grid, Dims::Rect { rows, cols }, 74.0, 0.15).unwrap()
    }

    #[test]
    fn grid_4x4_geometry() {
        let p = grid(4, 4);
        assert_eq!(p.len(), 16);
        assert!((p.side_mm() - 8.6023).abs() < 1e-4);
        assert!((p.pitch_mm() - 8.7523).abs() < 1e-4);
        let s = p.site(p.site_at(2, 3).unwrap()).unwrap();
        assert!((s.center_x_mm - 3.0 * p.pitch_mm()).abs() < 1e-12);
        assert!((s.center_y_mm - 2.0 * p.pitch_mm()).abs() < 1e-12);
    }

    #[test]
    fn hex_spiral_counts() {
        for k in 1..=8 {
            let p = build_placement(Arrangement::HexSpiral, Dims::Hex { radius: k }, 74.0, 0.15).unwrap();
            assert_eq!(p.len(), centered_hex_count(k));
            assert_eq!(p.site(0).unwrap().lattice(), (0, 0));
        }
        let p = build_placement(Arrangement::HexSpiral, Dims::Hex { radius: 3 }, 74.0, 0.15).unwrap();
        assert_eq!(p.len(), 37);
        // rows of a radius-3 hexagon have 4,5,6,7,6,5,4 sites
        let lens: Vec<_> = (0..p.rows()).map(|r| p.row(r).len()).collect();
        assert_eq!(lens, vec![4, 5, 6, 7, 6, 5, 4]);
    }

    #[test]
    fn hex_block_odd_rows_shift_right() {
        let p = build_placement(Arrangement::HexBlock, Dims::Rect { rows: 2, cols: 3 }, 74.0, 0.10).unwrap();
        let a = p.site(p.site_at(0, 0).unwrap()).unwrap();
        let b = p.site(p.site_at(1, 0).unwrap()).unwrap();
        assert!((b.center_x_mm - a.center_x_mm - 4.3512).abs() < 1e-4);
        // the shifted chiplet touches both chiplets above it
        assert_eq!(p.link_range(p.site_at(1, 0).unwrap(), p.site_at(0, 0).unwrap()).unwrap(), 0);
        assert_eq!(p.link_range(p.site_at(1, 0).unwrap(), p.site_at(0, 1).unwrap()).unwrap(), 0);
        assert_eq!(p.link_range(p.site_at(1, 1).unwrap(), p.site_at(0, 0).unwrap()).unwrap(), 1);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(build_placement(Arrangement::Grid, Dims::Rect { rows: 0, cols: 4 }, 74.0, 0.15).is_err());
        assert!(build_placement(Arrangement::HexSpiral, Dims::Hex { radius: 0 }, 74.0, 0.15).is_err());
        assert!(build_placement(Arrangement::Grid, Dims::Rect { rows: 2, cols: 2 }, -1.0, 0.15).is_err());
        assert!(build_placement(Arrangement::Grid, Dims::Rect { rows: 2, cols: 2 }, 74.0, 0.0).is_err());
        assert!(build_placement(Arrangement::Grid, Dims::Hex { radius: 2 }, 74.0, 0.15).is_err());
    }

    #[test]
    fn kind_schemes() {
        let p = grid(4, 4);
        let m = assign_kinds(&p, KindScheme::MemColumns).unwrap();
        assert_eq!(m.sites_of_kind(ChipletKind::Memory).count(), 8);
        assert_eq!(m.sites_of_kind(ChipletKind::Compute).count(), 8);
        let t = assign_kinds(&p, KindScheme::TraceCmi).unwrap();
        assert_eq!(t.sites_of_kind(ChipletKind::Io).count(), 8);
        assert_eq!(t.sites_of_kind(ChipletKind::Memory).count(), 4);
        assert_eq!(t.sites_of_kind(ChipletKind::Compute).count(), 4);
        assert_eq!(t.site(0).unwrap().kind, ChipletKind::Io);
        let h = assign_kinds(&t, KindScheme::Homogeneous).unwrap();
        assert_eq!(h.sites_of_kind(ChipletKind::Compute).count(), 16);

        assert!(assign_kinds(&grid(4, 2), KindScheme::MemColumns).is_err());
        assert!(assign_kinds(&grid(2, 4), KindScheme::TraceCmi).is_err());
    }

    #[test]
    fn ranges_and_lengths() {
        let p = grid(4, 4);
        assert_eq!(p.link_range(0, 1).unwrap(), 0);
        assert_eq!(p.link_range(0, 2).unwrap(), 1);
        assert!(p.link_range(3, 3).is_err());
        assert!((p.link_length_mm(0, 1, PhyPolicy::Edge).unwrap() - 0.15).abs() < 1e-9);
        assert!((p.link_length_mm(0, 2, PhyPolicy::Edge).unwrap() - 8.9023).abs() < 1e-4);
        assert!((p.link_length_mm(0, 1, PhyPolicy::Center).unwrap() - p.pitch_mm()).abs() < 1e-12);
        assert!(p.link_length_mm(5, 5, PhyPolicy::Edge).is_err());

        let big = grid(16, 16);
        assert_eq!(big.link_range(0, 15).unwrap(), 14);
        let l = big.link_length_mm(0, 15, PhyPolicy::Edge).unwrap();
        assert!((l - 122.68).abs() < 0.01, "{l}");
        assert!(l > 70.0);
    }

    #[test]
    fn doc_roundtrip_keeps_kinds() {
        let p = assign_kinds(
            &build_placement(Arrangement::HexSpiral, Dims::Hex { radius: 2 }, 74.0, 0.1).unwrap(),
            KindScheme::TraceCmi,
        )
        .unwrap();
        let json = serde_json::to_string(&p.to_doc()).unwrap();
        assert!(json.contains("\"k\":2"));
        let back = Placement::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.sites(), p.sites());

        let mut bad = p.to_doc();
        bad.sites[3].x_mm += 1.0;
        assert!(Placement::from_doc(&bad).is_err());
    }
}
