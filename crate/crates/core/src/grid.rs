//! Regular axis-aligned discretizations of box domains.
//!
//! A [`RegularGrid`] is a uniform tensor grid over a box; a [`MixedSpace`]
//! glues a continuous block and an integer block into one product space.
//! Enumeration is row-major (last axis fastest) and deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor-product grid over `[lower, upper]`.
///
/// Serializes as `{dim, lower, upper, points_per_axis}`; spacing is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct RegularGrid {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: Vec<usize>,
    spacing: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    points_per_axis: Vec<usize>,
}

impl TryFrom<GridSpec> for RegularGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        let g = RegularGrid::new(s.lower, s.upper, s.points_per_axis)?;
        if g.dim != s.dim {
            return Err(Error::BadGrid("dim field inconsistent with axis vectors".into()));
        }
        Ok(g)
    }
}

impl From<RegularGrid> for GridSpec {
    fn from(g: RegularGrid) -> Self {
        GridSpec { dim: g.dim, lower: g.lower, upper: g.upper, points_per_axis: g.points_per_axis }
    }
}

impl RegularGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if upper.len() != dim || points_per_axis.len() != dim {
            return Err(Error::BadGrid("lower/upper/points_per_axis length mismatch".into()));
        }
        if dim == 0 {
            return Err(Error::BadGrid("grid must have at least one axis".into()));
        }
        for a in 0..dim {
            if !(lower[a] <= upper[a]) {
                return Err(Error::BadGrid(format!("lower[{a}] > upper[{a}]")));
            }
            if points_per_axis[a] == 0 {
                return Err(Error::BadGrid(format!("points_per_axis[{a}] must be positive")));
            }
            if points_per_axis[a] == 1 && lower[a] != upper[a] {
                return Err(Error::BadGrid(format!(
                    "single-point axis {a} requires lower == upper"
                )));
            }
        }
        let spacing = lower
            .iter()
            .zip(&upper)
            .zip(&points_per_axis)
            .map(|((&lo, &hi), &n)| if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 })
            .collect();
        Ok(Self { dim, lower, upper, points_per_axis, spacing })
    }

    /// 1-D convenience constructor.
    pub fn line(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![points])
    }

    /// Rebuild derived fields after deserialization.
    pub fn from_parts(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: Vec<usize>) -> Result<Self> {
        Self::new(lower, upper, points_per_axis)
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along `axis`. Endpoints are exact.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.points_per_axis[axis];
        if i == 0 {
            self.lower[axis]
        } else if i == n - 1 {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    /// Row-major flat index of a multi-index.
    pub fn linearize(&self, multi_index: &[usize]) -> Result<usize> {
        if multi_index.len() != self.dim {
            return Err(Error::IndexError { axis: 0, index: multi_index.to_vec(), size: self.dim });
        }
        let mut flat = 0usize;
        for a in 0..self.dim {
            let n = self.points_per_axis[a];
            if multi_index[a] >= n {
                return Err(Error::IndexError { axis: a, index: multi_index.to_vec(), size: n });
            }
            flat = flat * n + multi_index[a];
        }
        Ok(flat)
    }

    /// Inverse of [`linearize`](Self::linearize).
    pub fn delinearize(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        for a in (0..self.dim).rev() {
            let n = self.points_per_axis[a];
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Coordinates of the grid point with the given flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.delinearize(flat);
        idx.iter().enumerate().map(|(a, &i)| self.axis_coord(a, i)).collect()
    }

    /// One-sided Hausdorff distance from the box to the grid: half the
    /// Euclidean norm of the spacing vector (the cell center is farthest).
    pub fn hausdorff_to_box(&self) -> f64 {
        0.5 * self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// max of the largest pairwise point distance and the largest point norm.
    ///
    /// Both maxima are attained at box corners for a uniform grid.
    pub fn diameter(&self) -> f64 {
        let pairwise: f64 = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                let m = lo.abs().max(hi.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt();
        pairwise.max(norm)
    }

    /// Clamp a point to the box, returning the clamped point and the
    /// Euclidean distance moved.
    pub fn clamp_to_box(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut out = Vec::with_capacity(self.dim);
        let mut dist2 = 0.0;
        for a in 0..self.dim {
            let c = x[a].clamp(self.lower[a], self.upper[a]);
            dist2 += (c - x[a]) * (c - x[a]);
            out.push(c);
        }
        (out, dist2.sqrt())
    }
}

/// Product of an optional continuous block and an optional integer block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSpace {
    pub continuous: Option<RegularGrid>,
    pub integer: Option<RegularGrid>,
}

impl MixedSpace {
    pub fn continuous(grid: RegularGrid) -> Self {
        Self { continuous: Some(grid), integer: None }
    }

    pub fn integer(grid: RegularGrid) -> Result<Self> {
        Self::validate_integer(&grid)?;
        Ok(Self { continuous: None, integer: Some(grid) })
    }

    pub fn mixed(continuous: RegularGrid, integer: RegularGrid) -> Result<Self> {
        Self::validate_integer(&integer)?;
        Ok(Self { continuous: Some(continuous), integer: Some(integer) })
    }

    fn validate_integer(grid: &RegularGrid) -> Result<()> {
        const MAX_EXACT: f64 = 9007199254740992.0; // 2^53
        for a in 0..grid.dim {
            for i in [0, grid.points_per_axis[a] - 1] {
                let c = grid.axis_coord(a, i);
                if c.fract() != 0.0 || c.abs() > MAX_EXACT {
                    return Err(Error::BadGrid(format!(
                        "integer block axis {a} has non-integer coordinate {c}"
                    )));
                }
            }
            if grid.points_per_axis[a] > 1 && grid.spacing()[a].fract() != 0.0 {
                return Err(Error::BadGrid(format!("integer block axis {a} has fractional spacing")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.continuous.as_ref().map_or(0, |g| g.dim) + self.integer.as_ref().map_or(0, |g| g.dim)
    }

    pub fn continuous_dim(&self) -> usize {
        self.continuous.as_ref().map_or(0, |g| g.dim)
    }

    /// The full product space as a single regular grid (continuous axes
    /// first, then integer axes).
    pub fn product_grid(&self) -> Result<RegularGrid> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut points = Vec::new();
        for g in [&self.continuous, &self.integer].into_iter().flatten() {
            lower.extend_from_slice(&g.lower);
            upper.extend_from_slice(&g.upper);
            points.extend_from_slice(&g.points_per_axis);
        }
        RegularGrid::new(lower, upper, points)
    }
}
