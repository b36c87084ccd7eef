//! Room geometry: grid layout, conditioner/probe placement, labelled boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of packaged air conditioners and of temperature probes.
pub const UNITS: usize = 4;

/// A cell index on the `nx × ny` grid. `i` runs along the width (x), `j` along the depth (y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCoord {
    pub i: usize,
    pub j: usize,
}

impl GridCoord {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// `j = 0`
    Bottom,
    /// `j = ny - 1`
    Top,
    /// `i = 0`
    Left,
    /// `i = nx - 1`
    Right,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Top, Edge::Left, Edge::Right];

    fn index(self) -> usize {
        match self {
            Edge::Bottom => 0,
            Edge::Top => 1,
            Edge::Left => 2,
            Edge::Right => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Wall,
    Window,
    Door,
}

impl SegmentKind {
    /// Walls are adiabatic; windows and doors exchange heat with the outside.
    pub fn is_convective(self) -> bool {
        !matches!(self, SegmentKind::Wall)
    }
}

/// A run of boundary faces `[from, to)` along one edge. Faces are indexed by the
/// boundary cell they belong to (`i` for bottom/top, `j` for left/right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub edge: Edge,
    pub from: usize,
    pub to: usize,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomGeometry {
    pub width: f64,
    pub depth: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub ptac_locations: [GridCoord; UNITS],
    pub probe_locations: [GridCoord; UNITS],
    pub boundary_segments: Vec<BoundarySegment>,
    labels: [Vec<SegmentKind>; 4],
}

impl RoomGeometry {
    pub fn new(
        width: f64,
        depth: f64,
        dx: f64,
        dy: f64,
        ptac_locations: [GridCoord; UNITS],
        probe_locations: [GridCoord; UNITS],
        boundary_segments: Vec<BoundarySegment>,
    ) -> Result<Self> {
        for (name, v) in [("width", width), ("depth", depth), ("dx", dx), ("dy", dy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let nx = (width / dx).round() as usize;
        let ny = (depth / dy).round() as usize;
        if nx < 3 || ny < 3 {
            return Err(Error::config(format!(
                "grid {nx}x{ny} too small; need at least 3 cells per axis"
            )));
        }
        let inside = |c: &GridCoord| c.i >= 1 && c.i + 1 < nx && c.j >= 1 && c.j + 1 < ny;
        for (k, c) in ptac_locations.iter().enumerate() {
            if !inside(c) {
                return Err(Error::config(format!(
                    "AC-{} at ({}, {}) is not strictly inside the {nx}x{ny} grid",
                    k + 1,
                    c.i,
                    c.j
                )));
            }
        }
        for (k, c) in probe_locations.iter().enumerate() {
            if !inside(c) {
                return Err(Error::config(format!(
                    "probe {} at ({}, {}) is not strictly inside the {nx}x{ny} grid",
                    k + 1,
                    c.i,
                    c.j
                )));
            }
        }

        let mut slots: [Vec<Option<SegmentKind>>; 4] =
            [vec![None; nx], vec![None; nx], vec![None; ny], vec![None; ny]];
        for seg in &boundary_segments {
            let edge_slots = &mut slots[seg.edge.index()];
            if seg.from >= seg.to || seg.to > edge_slots.len() {
                return Err(Error::config(format!(
                    "segment {:?} [{}, {}) out of range for edge of length {}",
                    seg.edge,
                    seg.from,
                    seg.to,
                    edge_slots.len()
                )));
            }
            for (face, slot) in edge_slots.iter_mut().enumerate().take(seg.to).skip(seg.from) {
                if slot.is_some() {
                    return Err(Error::config(format!(
                        "boundary face {face} on {:?} edge is labelled twice",
                        seg.edge
                    )));
                }
                *slot = Some(seg.kind);
            }
        }
        let mut labels: [Vec<SegmentKind>; 4] = Default::default();
        for edge in Edge::ALL {
            let resolved: Option<Vec<SegmentKind>> =
                slots[edge.index()].iter().copied().collect();
            labels[edge.index()] = resolved.ok_or_else(|| {
                let face = slots[edge.index()].iter().position(Option::is_none).unwrap_or(0);
                Error::config(format!("boundary face {face} on {edge:?} edge is unlabelled"))
            })?;
        }

        Ok(Self {
            width,
            depth,
            dx,
            dy,
            nx,
            ny,
            ptac_locations,
            probe_locations,
            boundary_segments,
            labels,
        })
    }

    /// Same layout with every boundary face turned into an adiabatic wall.
    pub fn all_walls(&self) -> Self {
        let segments = vec![
            BoundarySegment { edge: Edge::Bottom, from: 0, to: self.nx, kind: SegmentKind::Wall },
            BoundarySegment { edge: Edge::Top, from: 0, to: self.nx, kind: SegmentKind::Wall },
            BoundarySegment { edge: Edge::Left, from: 0, to: self.ny, kind: SegmentKind::Wall },
            BoundarySegment { edge: Edge::Right, from: 0, to: self.ny, kind: SegmentKind::Wall },
        ];
        Self::new(
            self.width,
            self.depth,
            self.dx,
            self.dy,
            self.ptac_locations,
            self.probe_locations,
            segments,
        )
        .expect("wall relabelling of a valid geometry is valid")
    }

    pub fn label(&self, edge: Edge, face: usize) -> SegmentKind {
        self.labels[edge.index()][face]
    }

    pub fn labels(&self, edge: Edge) -> &[SegmentKind] {
        &self.labels[edge.index()]
    }

    #[inline]
    pub fn index(&self, c: GridCoord) -> usize {
        c.j * self.nx + c.i
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Footprint of one grid cell times a unit height, in m³.
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }
}
