//! Geometry and material model of the penetrable obstacle, and its
//! rasterization to a voxel grid for the volume-integral solver.
//!
//! Obstacles are unions of spheres with constant complex permittivity.
//! Rasterization assigns each voxel the permittivity at its cell center
//! (later-listed shapes win on overlap); background cells keep epsilon = 1
//! exactly, so the contrast epsilon - 1 is supported precisely on the
//! marked cells.

use num_complex::Complex64;

use crate::spectra::Waveguide;
use crate::{Error, Point, Result};

/// Homogeneous sphere with complex relative permittivity.
#[derive(Clone, Copy, Debug)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
    pub epsilon: Complex64,
}

impl Sphere {
    fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter(
                "sphere center must be finite".into(),
            ));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.epsilon.re > 0.0) || self.epsilon.im < 0.0 || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "permittivity must have Re > 0 and Im >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn contains(&self, p: Point) -> bool {
        let d0 = p[0] - self.center[0];
        let d1 = p[1] - self.center[1];
        let d2 = p[2] - self.center[2];
        d0 * d0 + d1 * d1 + d2 * d2 <= self.radius * self.radius
    }
}

/// Union of spheres; later entries take precedence where shapes overlap.
#[derive(Clone, Debug, Default)]
pub struct Geometry {
    pub shapes: Vec<Sphere>,
}

impl Geometry {
    pub fn new(shapes: Vec<Sphere>) -> Geometry {
        Geometry { shapes }
    }

    /// Each sphere must be admissible and its closure must sit strictly
    /// inside the open guide cross-section.
    pub fn validate(&self, wg: &Waveguide) -> Result<()> {
        for (i, s) in self.shapes.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::InvalidParameter(format!("sphere {i}: {e}")))?;
            let inside = s.center[0] - s.radius > 0.0
                && s.center[0] + s.radius < wg.a
                && s.center[1] - s.radius > 0.0
                && s.center[1] + s.radius < wg.b;
            if !inside {
                return Err(Error::InvalidParameter(format!(
                    "sphere {i} (center ({}, {}, {}), radius {}) must lie strictly inside the guide cross-section",
                    s.center[0], s.center[1], s.center[2], s.radius
                )));
            }
        }
        Ok(())
    }

    /// Permittivity at a point: the last listed sphere containing it wins;
    /// background returns None.
    pub fn epsilon_at(&self, p: Point) -> Option<Complex64> {
        self.shapes
            .iter()
            .rev()
            .find(|s| s.contains(p))
            .map(|s| s.epsilon)
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Result<BoundingBox> {
        for i in 0..3 {
            if !(min[i] < max[i]) || !min[i].is_finite() || !max[i].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bounding box must satisfy min < max per axis, got axis {i}: [{}, {}]",
                    min[i], max[i]
                )));
            }
        }
        Ok(BoundingBox { min, max })
    }

    fn contains_sphere(&self, s: &Sphere) -> bool {
        (0..3)
            .all(|i| s.center[i] - s.radius >= self.min[i] && s.center[i] + s.radius <= self.max[i])
    }
}

/// Rasterized permittivity on a regular grid; cell data is stored with the
/// first axis fastest.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub bbox: BoundingBox,
    pub dims: [usize; 3],
    pub cell_eps: Vec<Complex64>,
}

/// Support cell handed to the volume-integral solver.
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub center: Point,
    pub volume: f64,
    pub contrast: Complex64,
}

impl VoxelGrid {
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            (self.bbox.max[0] - self.bbox.min[0]) / self.dims[0] as f64,
            (self.bbox.max[1] - self.bbox.min[1]) / self.dims[1] as f64,
            (self.bbox.max[2] - self.bbox.min[2]) / self.dims[2] as f64,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        let d = self.spacing();
        d[0] * d[1] * d[2]
    }

    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * l)
    }

    pub fn cell_center(&self, i: usize, j: usize, l: usize) -> Point {
        let d = self.spacing();
        [
            self.bbox.min[0] + (i as f64 + 0.5) * d[0],
            self.bbox.min[1] + (j as f64 + 0.5) * d[1],
            self.bbox.min[2] + (l as f64 + 0.5) * d[2],
        ]
    }

    /// Index triple of the cell containing `p` (clamped to the grid).
    pub fn cell_of(&self, p: Point) -> [usize; 3] {
        let d = self.spacing();
        let mut out = [0usize; 3];
        for ax in 0..3 {
            let t = ((p[ax] - self.bbox.min[ax]) / d[ax]).floor();
            out[ax] = (t.max(0.0) as usize).min(self.dims[ax] - 1);
        }
        out
    }
}

/// Sample the geometry at every cell center. Every shape must fit in the box.
pub fn rasterize(g: &Geometry, bbox: BoundingBox, dims: [usize; 3]) -> Result<VoxelGrid> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter(format!(
            "voxel dims must all be at least 1, got {dims:?}"
        )));
    }
    for (i, s) in g.shapes.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::InvalidParameter(format!("sphere {i}: {e}")))?;
        if !bbox.contains_sphere(s) {
            return Err(Error::InvalidParameter(format!(
                "sphere {i} extends outside the voxel bounding box"
            )));
        }
    }
    let mut grid = VoxelGrid {
        bbox,
        dims,
        cell_eps: vec![Complex64::new(1.0, 0.0); dims[0] * dims[1] * dims[2]],
    };
    for l in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if let Some(eps) = g.epsilon_at(grid.cell_center(i, j, l)) {
                    let idx = grid.index(i, j, l);
                    grid.cell_eps[idx] = eps;
                }
            }
        }
    }
    Ok(grid)
}

/// Support cells (epsilon != 1) in storage order: first axis fastest.
pub fn contrast_cells(v: &VoxelGrid) -> Vec<Cell> {
    let one = Complex64::new(1.0, 0.0);
    let volume = v.cell_volume();
    let mut out = Vec::new();
    for l in 0..v.dims[2] {
        for j in 0..v.dims[1] {
            for i in 0..v.dims[0] {
                let eps = v.cell_eps[v.index(i, j, l)];
                if eps != one {
                    out.push(Cell {
                        center: v.cell_center(i, j, l),
                        volume,
                        contrast: eps - one,
                    });
                }
            }
        }
    }
    out
}
