//! Discrete and closed-form Legendre-Fenchel transforms.
//!
//! `dlft_bruteforce` is the O(N·K) reference; `dlft_fast` is the
//! production path: O(N+K) per line via a monotone maximizer pointer,
//! extended to d dimensions by transforming one axis at a time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RegularGrid;

/// Real-valued function sampled on a regular grid, values in enumeration
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFn {
    pub grid: RegularGrid,
    pub values: Vec<f64>,
}

impl DiscreteFn {
    pub fn new(grid: RegularGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadValues(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadValues("values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// Sample a closure on a grid.
    pub fn sample(grid: RegularGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation at `x`, clamping to the grid box first;
    /// returns the value and the Euclidean clamp distance (0 when `x`
    /// is inside).
    pub fn interp_clamped(&self, x: &[f64]) -> (f64, f64) {
        let (p, moved) = self.grid.clamp_to_box(x);
        let d = self.grid.dim;
        // cell index and fractional offset per axis
        let mut cell = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for a in 0..d {
            let n = self.grid.points_per_axis[a];
            if n == 1 || self.grid.spacing()[a] == 0.0 {
                cell.push(0usize);
                frac.push(0.0);
                continue;
            }
            let t = (p[a] - self.grid.lower[a]) / self.grid.spacing()[a];
            let i = (t.floor() as usize).min(n - 2);
            cell.push(i);
            frac.push((t - i as f64).clamp(0.0, 1.0));
        }
        let mut val = 0.0;
        let corners = 1usize << d;
        let mut idx = vec![0usize; d];
        for mask in 0..corners {
            let mut w = 1.0;
            for a in 0..d {
                if mask >> a & 1 == 1 {
                    idx[a] = cell[a] + usize::from(self.grid.points_per_axis[a] > 1);
                    w *= frac[a];
                } else {
                    idx[a] = cell[a];
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                val += w * self.values[self.grid.linearize(&idx).expect("cell index in range")];
            }
        }
        (val, moved)
    }

    /// CSV rows: flat_index, one column per coordinate, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("flat_index");
        for a in 0..self.grid.dim {
            out.push_str(&format!(",x{a}"));
        }
        out.push_str(",value\n");
        for i in 0..self.grid.len() {
            out.push_str(&i.to_string());
            for c in self.grid.point(i) {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{}\n", self.values[i]));
        }
        out
    }
}

/// Grid over slope (dual) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualGrid {
    pub grid: RegularGrid,
}

/// Transform output: conjugate values on the dual grid plus, per dual
/// point, the flat primal index attaining the maximum (smallest such
/// index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct LftResult {
    pub output: DiscreteFn,
    pub argmax: Vec<usize>,
}

const CONVEXITY_TOL: f64 = 1e-12;

fn gradients_ok(c: &[f64]) -> Option<usize> {
    for i in 0..c.len().saturating_sub(1) {
        if c[i + 1] < c[i] - CONVEXITY_TOL * (1.0 + c[i].abs()) {
            return Some(i);
        }
    }
    None
}

/// Difference quotients c_i = (f_{i+1} − f_i) / (x_{i+1} − x_i) of a 1-D
/// function.
pub fn discrete_gradients(f: &DiscreteFn) -> Result<Vec<f64>> {
    if f.grid.dim != 1 {
        return Err(Error::BadGrid("discrete_gradients needs a 1-D grid".into()));
    }
    let n = f.grid.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    Ok((0..n - 1)
        .map(|i| {
            let x0 = f.grid.axis_coord(0, i);
            let x1 = f.grid.axis_coord(0, i + 1);
            (f.values[i + 1] - f.values[i]) / (x1 - x0)
        })
        .collect())
}

/// Uniform K-point slope grid spanning exactly the attained gradient
/// range [c_0, c_{N−2}] of a convex 1-D function.
pub fn canonical_dual_grid(f: &DiscreteFn, k: usize) -> Result<DualGrid> {
    if k < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: k });
    }
    let c = discrete_gradients(f)?;
    if let Some(i) = gradients_ok(&c) {
        return Err(Error::NotConvex { axis: 0, position: i });
    }
    let grid = RegularGrid::line(c[0], c[c.len() - 1], k)?;
    Ok(DualGrid { grid })
}

/// Uniform dual box for general (multi-d) functions: per-axis endpoints
/// are the extreme difference quotients over all axis-aligned lines,
/// widened by one grid spacing so every attained slope is interior.
pub fn widened_dual_grid(f: &DiscreteFn, points_per_axis: &[usize]) -> Result<DualGrid> {
    let d = f.grid.dim;
    if points_per_axis.len() != d {
        return Err(Error::BadGrid("points_per_axis length must match dim".into()));
    }
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for a in 0..d {
        let k = points_per_axis[a];
        if k < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: k });
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = f.grid.points_per_axis[a];
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        for_each_line(&f.grid.points_per_axis, a, |base, stride| {
            for t in 0..n - 1 {
                let dx = f.grid.axis_coord(a, t + 1) - f.grid.axis_coord(a, t);
                let c = (f.values[base + (t + 1) * stride] - f.values[base + t * stride]) / dx;
                lo = lo.min(c);
                hi = hi.max(c);
            }
        });
        let h = if hi > lo { (hi - lo) / (k - 1) as f64 } else { 1.0 };
        lower.push(lo - h);
        upper.push(hi + h);
    }
    Ok(DualGrid { grid: RegularGrid::new(lower, upper, points_per_axis.to_vec())? })
}

/// Call `body(base, stride)` once per axis-`a` line of a row-major array
/// with the given dims; element t of the line lives at `base + t*stride`.
fn for_each_line(dims: &[usize], a: usize, mut body: impl FnMut(usize, usize)) {
    let stride: usize = dims[a + 1..].iter().product();
    let n = dims[a];
    let outer: usize = dims[..a].iter().product();
    for o in 0..outer {
        for i in 0..stride {
            body(o * n * stride + i, stride);
        }
    }
}

/// Reference conjugate: exhaustive max of ⟨s,x⟩ − f(x) at every dual
/// point, smallest flat index on ties.
pub fn dlft_bruteforce(f: &DiscreteFn, duals: &DualGrid) -> Result<LftResult> {
    if duals.grid.dim != f.grid.dim {
        return Err(Error::BadGrid("dual grid dimension mismatch".into()));
    }
    let nk = duals.grid.len();
    let mut values = Vec::with_capacity(nk);
    let mut argmax = Vec::with_capacity(nk);
    for j in 0..nk {
        let s = duals.grid.point(j);
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0usize;
        for i in 0..f.grid.len() {
            let x = f.grid.point(i);
            let v = dot(&s, &x) - f.values[i];
            if v > best {
                best = v;
                best_i = i;
            }
        }
        values.push(best);
        argmax.push(best_i);
    }
    Ok(LftResult { output: DiscreteFn::new(duals.grid.clone(), values)?, argmax })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One conjugate line: for ascending slopes, the maximizer of
/// g(i) = s·x_i − f_i only moves right, so a single pointer pass
/// suffices. `xs` are the line's coordinates. Requires a convex line.
fn lft_line(
    xs: &[f64],
    fv: impl Fn(usize) -> f64,
    n: usize,
    svals: &[f64],
    axis: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if n >= 3 {
        let c: Vec<f64> = (0..n - 1).map(|i| (fv(i + 1) - fv(i)) / (xs[i + 1] - xs[i])).collect();
        if let Some(i) = gradients_ok(&c) {
            return Err(Error::NotConvex { axis, position: i });
        }
    }
    let mut out = Vec::with_capacity(svals.len());
    let mut arg = Vec::with_capacity(svals.len());
    let mut i = 0usize;
    for &s in svals {
        while i + 1 < n && s * xs[i + 1] - fv(i + 1) > s * xs[i] - fv(i) {
            i += 1;
        }
        out.push(s * xs[i] - fv(i));
        arg.push(i);
    }
    Ok((out, arg))
}

/// Fast conjugate, identical in output to [`dlft_bruteforce`].
///
/// Axis 0 is transformed first; between passes the intermediate table is
/// negated so the next axis pass is again a plain conjugate of a convex
/// line. Optimizers are recovered by backtracking the per-pass pointers.
pub fn dlft_fast(f: &DiscreteFn, duals: &DualGrid) -> Result<LftResult> {
    let d = f.grid.dim;
    if duals.grid.dim != d {
        return Err(Error::BadGrid("dual grid dimension mismatch".into()));
    }
    let mut dims = f.grid.points_per_axis.clone();
    let mut cur = f.values.clone();
    // per-pass argmax tables and the dims they were produced under
    let mut args: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(d);
    for a in 0..d {
        let n = dims[a];
        let k = duals.grid.points_per_axis[a];
        let xs: Vec<f64> = (0..n).map(|t| f.grid.axis_coord(a, t)).collect();
        let ss: Vec<f64> = (0..k).map(|j| duals.grid.axis_coord(a, j)).collect();
        let mut new_dims = dims.clone();
        new_dims[a] = k;
        let total: usize = new_dims.iter().product();
        let mut next = vec![0.0f64; total];
        let mut arg = vec![0usize; total];
        let new_stride: usize = new_dims[a + 1..].iter().product();
        let mut err = None;
        for_each_line(&dims, a, |base, stride| {
            if err.is_some() {
                return;
            }
            match lft_line(&xs, |t| cur[base + t * stride], n, &ss, a) {
                Ok((line, line_arg)) => {
                    // base has the same outer/inner decomposition in the
                    // new shape because only dims[a] changed
                    let outer = base / (n * stride);
                    let inner = base % stride;
                    let new_base = outer * k * new_stride + inner;
                    for j in 0..k {
                        next[new_base + j * new_stride] = line[j];
                        arg[new_base + j * new_stride] = line_arg[j];
                    }
                }
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if a + 1 < d {
            for v in &mut next {
                *v = -*v;
            }
        }
        args.push((arg, new_dims.clone()));
        dims = new_dims;
        cur = next;
    }

    // backtrack optimizers: pass a's table is indexed by
    // (s_0..s_a, x_{a+1}..x_{d-1})
    let nk = duals.grid.len();
    let mut argmax = Vec::with_capacity(nk);
    for j in 0..nk {
        let smulti = duals.grid.delinearize(j);
        let mut x = vec![0usize; d];
        for a in (0..d).rev() {
            let (table, tdims) = &args[a];
            let mut idx = 0usize;
            for (ax, &n) in tdims.iter().enumerate() {
                let coord = if ax <= a { smulti[ax] } else { x[ax] };
                idx = idx * n + coord;
            }
            x[a] = table[idx];
        }
        argmax.push(f.grid.linearize(&x)?);
    }
    Ok(LftResult { output: DiscreteFn::new(duals.grid.clone(), cur)?, argmax })
}

/// (f*)* sampled back on the primal grid; equals f for convex-extensible
/// inputs with a rich enough dual grid, and the convex minorant (≤ f)
/// otherwise. Both transforms use the exhaustive path so non-convex
/// inputs are fine.
pub fn biconjugate(f: &DiscreteFn, duals: &DualGrid) -> Result<DiscreteFn> {
    let star = dlft_bruteforce(f, duals)?;
    let back = dlft_bruteforce(&star.output, &DualGrid { grid: f.grid.clone() })?;
    Ok(back.output)
}

/// Quadratic a·‖u‖²/2 + ⟨b,u⟩ + c over an optional box (None = all of ℝ
/// on that side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl QuadSpec {
    pub fn eval(&self, u: &[f64]) -> f64 {
        0.5 * self.a * dot(u, u) + dot(&self.b, u) + self.c
    }
}

/// Closed-form conjugate of a separable quadratic over a box: clamp the
/// unconstrained maximizer (s−b)/a coordinate-wise. Returns the value
/// and the maximizer.
pub fn clft_quadratic_opt(q: &QuadSpec, s: &[f64]) -> Result<(f64, Vec<f64>)> {
    let d = q.b.len();
    if s.len() != d {
        return Err(Error::BadParams("slope dimension mismatch".into()));
    }
    if q.a < 0.0 {
        return Err(Error::BadParams("quadratic coefficient must be nonnegative".into()));
    }
    let mut val = -q.c;
    let mut ustar = Vec::with_capacity(d);
    for j in 0..d {
        let lo = q.lower.as_ref().map(|l| l[j]);
        let hi = q.upper.as_ref().map(|h| h[j]);
        let g = s[j] - q.b[j];
        let u = if q.a > 0.0 {
            let mut u = g / q.a;
            if let Some(lo) = lo {
                u = u.max(lo);
            }
            if let Some(hi) = hi {
                u = u.min(hi);
            }
            u
        } else if g > 0.0 {
            hi.ok_or(Error::Unbounded)?
        } else if g < 0.0 {
            lo.ok_or(Error::Unbounded)?
        } else {
            // flat direction: any feasible point works, clamp 0 into the box
            let mut u = 0.0f64;
            if let Some(lo) = lo {
                u = u.max(lo);
            }
            if let Some(hi) = hi {
                u = u.min(hi);
            }
            u
        };
        val += g * u - 0.5 * q.a * u * u;
        ustar.push(u);
    }
    Ok((val, ustar))
}

/// Conjugate value only; see [`clft_quadratic_opt`].
pub fn clft_quadratic(q: &QuadSpec, s: &[f64]) -> Result<f64> {
    clft_quadratic_opt(q, s).map(|(v, _)| v)
}

/// max over the dual grid of |f*(s) − g*(s)|; never exceeds ‖f − g‖∞ on
/// the primal grid.
pub fn lft_perturbation_gap(f: &DiscreteFn, g: &DiscreteFn, duals: &DualGrid) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::BadGrid("perturbation gap needs matching grids".into()));
    }
    let fs = dlft_bruteforce(f, duals)?;
    let gs = dlft_bruteforce(g, duals)?;
    Ok(fs
        .output
        .values
        .iter()
        .zip(&gs.output.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}
