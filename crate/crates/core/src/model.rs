//! Problem containers: linear block dynamics, separable stage costs,
//! finite-support noise, and per-stage overrides. Models round-trip
//! through JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MixedSpace;
use crate::lft::{clft_quadratic_opt, DiscreteFn, QuadSpec};

pub type Mat = Vec<Vec<f64>>;

pub fn mat_vec(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn mat_t_vec(m: &Mat, x: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, &xi) in m.iter().zip(x) {
        for (j, &a) in row.iter().enumerate() {
            out[j] += a * xi;
        }
    }
    out
}

fn mat_cols(m: &Mat) -> usize {
    m.first().map_or(0, Vec::len)
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect()
}

/// Stage cost descriptor. All variants are separable across coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    Zero,
    /// a‖u‖² + ⟨b,u⟩ + c  (b empty means the zero vector)
    Quadratic {
        a: f64,
        #[serde(default)]
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// 1-D convex piecewise-linear function given by its breakpoints;
    /// evaluated by interpolation, extended by the boundary slopes.
    PiecewiseLinear { breakpoints: Vec<f64>, values: Vec<f64> },
    Tabulated { f: DiscreteFn },
}

impl CostFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CostFn::Zero => 0.0,
            CostFn::Quadratic { a, b, c } => {
                let q: f64 = x.iter().map(|v| v * v).sum();
                let lin: f64 = b.iter().zip(x).map(|(p, v)| p * v).sum();
                a * q + lin + c
            }
            CostFn::PiecewiseLinear { breakpoints, values } => {
                let t = x[0];
                let n = breakpoints.len();
                if t <= breakpoints[0] {
                    let s = (values[1] - values[0]) / (breakpoints[1] - breakpoints[0]);
                    return values[0] + s * (t - breakpoints[0]);
                }
                if t >= breakpoints[n - 1] {
                    let s = (values[n - 1] - values[n - 2]) / (breakpoints[n - 1] - breakpoints[n - 2]);
                    return values[n - 1] + s * (t - breakpoints[n - 1]);
                }
                let i = breakpoints.partition_point(|&b| b <= t) - 1;
                let w = (t - breakpoints[i]) / (breakpoints[i + 1] - breakpoints[i]);
                values[i] * (1.0 - w) + values[i + 1] * w
            }
            CostFn::Tabulated { f } => f.interp_clamped(x).0,
        }
    }

    /// Conjugate sup over `box` of ⟨s,u⟩ − cost(u), with its maximizer.
    pub fn conjugate_opt(
        &self,
        s: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            CostFn::Zero => {
                let q = QuadSpec {
                    a: 0.0,
                    b: vec![0.0; s.len()],
                    c: 0.0,
                    lower: Some(lower.to_vec()),
                    upper: Some(upper.to_vec()),
                };
                clft_quadratic_opt(&q, s)
            }
            CostFn::Quadratic { a, b, c } => {
                let mut bb = b.clone();
                bb.resize(s.len(), 0.0);
                let q = QuadSpec {
                    a: 2.0 * a,
                    b: bb,
                    c: *c,
                    lower: Some(lower.to_vec()),
                    upper: Some(upper.to_vec()),
                };
                clft_quadratic_opt(&q, s)
            }
            CostFn::PiecewiseLinear { breakpoints, .. } => {
                // exact: the sup over a polyhedral function is attained
                // at a breakpoint or a box edge
                let mut cands: Vec<f64> = breakpoints
                    .iter()
                    .copied()
                    .filter(|&t| t >= lower[0] && t <= upper[0])
                    .collect();
                cands.push(lower[0]);
                cands.push(upper[0]);
                let mut best = f64::NEG_INFINITY;
                let mut arg = lower[0];
                for t in cands {
                    let v = s[0] * t - self.eval(&[t]);
                    if v > best {
                        best = v;
                        arg = t;
                    }
                }
                Ok((best, vec![arg]))
            }
            CostFn::Tabulated { f } => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = vec![0.0; s.len()];
                for i in 0..f.grid.len() {
                    let u = f.grid.point(i);
                    if u.iter().zip(lower).any(|(a, b)| a < b)
                        || u.iter().zip(upper).any(|(a, b)| a > b)
                    {
                        continue;
                    }
                    let v = s.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() - f.values[i];
                    if v > best {
                        best = v;
                        arg = u;
                    }
                }
                if best == f64::NEG_INFINITY {
                    return Err(Error::NoActions);
                }
                Ok((best, arg))
            }
        }
    }

    /// Strong-convexity modulus when known in closed form (used by the
    /// policy-error bound).
    pub fn strong_convexity(&self) -> Option<f64> {
        match self {
            CostFn::Quadratic { a, .. } => Some(2.0 * a),
            CostFn::Zero => Some(0.0),
            _ => None,
        }
    }
}

/// Finite-support noise entering the dynamics additively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub support: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl NoiseModel {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::BadParams("noise support/probs size mismatch".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::BadParams("noise probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadParams(format!("noise probabilities sum to {total}")));
        }
        let d = support[0].len();
        if support.iter().any(|v| v.len() != d) {
            return Err(Error::BadParams("noise support vectors have mixed dims".into()));
        }
        Ok(Self { support, probs })
    }

    /// Deterministic point mass at the origin.
    pub fn zero(dim: usize) -> Self {
        Self { support: vec![vec![0.0; dim]], probs: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-stage replacements for the stage-independent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gx: Option<CostFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gu: Option<CostFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

/// Finite-horizon control problem with block-linear dynamics: the
/// continuous state evolves by A x + B u + C w, the integer state by
/// D z + E w, costs are separable between states and actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpModel {
    pub a: Mat,
    #[serde(default)]
    pub b: Mat,
    #[serde(default)]
    pub c: Mat,
    #[serde(default)]
    pub d: Mat,
    #[serde(default)]
    pub e: Mat,
    pub state_space: MixedSpace,
    pub action_space: MixedSpace,
    pub gx: CostFn,
    pub gu: CostFn,
    pub gt: CostFn,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stage_overrides: BTreeMap<usize, StageOverride>,
}

impl DpModel {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::BadParams("horizon must be at least 1".into()));
        }
        let dr = self.state_space.continuous_dim();
        let di = self.state_space.dim() - dr;
        let cr = self.action_space.continuous_dim();
        let ci = self.action_space.dim() - cr;
        let dims_ok = self.a.len() == dr
            && self.a.iter().all(|r| r.len() == dr)
            && (self.b.is_empty() && cr == 0 || self.b.len() == dr && mat_cols(&self.b) == cr)
            && (self.c.is_empty() && (ci == 0 || dr == 0)
                || self.c.len() == dr && mat_cols(&self.c) == ci)
            && (self.d.is_empty() && di == 0 || self.d.len() == di && mat_cols(&self.d) == di)
            && (self.e.is_empty() && (ci == 0 || di == 0)
                || self.e.len() == di && mat_cols(&self.e) == ci);
        if !dims_ok {
            return Err(Error::BadParams("dynamics matrix dimensions inconsistent".into()));
        }
        if let Some(n) = &self.noise {
            if n.support[0].len() != self.state_space.dim() {
                return Err(Error::BadParams("noise dimension mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.state_space.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_space.dim()
    }

    fn override_at(&self, t: usize) -> Option<&StageOverride> {
        self.stage_overrides.get(&t)
    }

    /// Full state-transition matrix [[A,0],[0,D]] at stage t.
    pub fn a_prime(&self, t: usize) -> Mat {
        let a = self.override_at(t).and_then(|o| o.a.as_ref()).unwrap_or(&self.a);
        block_diag(a, &self.d)
    }

    /// Full action matrix [[B,C],[0,E]] at stage t.
    pub fn b_prime(&self, t: usize) -> Mat {
        let b = self.override_at(t).and_then(|o| o.b.as_ref()).unwrap_or(&self.b);
        block_ul_lr(b, &self.c, &self.e)
    }

    pub fn gx_at(&self, t: usize) -> &CostFn {
        self.override_at(t).and_then(|o| o.gx.as_ref()).unwrap_or(&self.gx)
    }

    pub fn gu_at(&self, t: usize) -> &CostFn {
        self.override_at(t).and_then(|o| o.gu.as_ref()).unwrap_or(&self.gu)
    }

    /// Noise feeding the transition out of stage t; a point mass at zero
    /// when the model is deterministic.
    pub fn noise_at(&self, t: usize) -> NoiseModel {
        self.override_at(t)
            .and_then(|o| o.noise.clone())
            .or_else(|| self.noise.clone())
            .unwrap_or_else(|| NoiseModel::zero(self.state_dim()))
    }

    /// Action box (continuous axes first, matching `b_prime` columns).
    pub fn action_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.action_space.product_grid()?;
        Ok((g.lower, g.upper))
    }

    /// sup-norm bound of the state box (τ).
    pub fn state_bound(&self) -> Result<f64> {
        let g = self.state_space.product_grid()?;
        Ok(box_sup_norm(&g.lower, &g.upper))
    }

    /// sup-norm bound of the action box (η).
    pub fn action_bound(&self) -> Result<f64> {
        let (lo, hi) = self.action_box()?;
        Ok(box_sup_norm(&lo, &hi))
    }
}

fn box_sup_norm(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(l, u)| l.abs().max(u.abs()))
        .fold(0.0, f64::max)
}

fn block_diag(a: &Mat, d: &Mat) -> Mat {
    let (ra, rd) = (a.len(), d.len());
    let (ca, cd) = (mat_cols(a), mat_cols(d));
    let mut out = vec![vec![0.0; ca + cd]; ra + rd];
    for i in 0..ra {
        out[i][..ca].copy_from_slice(&a[i]);
    }
    for i in 0..rd {
        out[ra + i][ca..].copy_from_slice(&d[i]);
    }
    out
}

/// [[B, C], [0, E]]
fn block_ul_lr(b: &Mat, c: &Mat, e: &Mat) -> Mat {
    let (rb, re) = (b.len(), e.len());
    let (cb, ce) = (mat_cols(b), mat_cols(e).max(mat_cols(c)));
    let mut out = vec![vec![0.0; cb + ce]; rb + re];
    for i in 0..rb {
        out[i][..cb].copy_from_slice(&b[i]);
        if !c.is_empty() {
            out[i][cb..cb + mat_cols(c)].copy_from_slice(&c[i]);
        }
    }
    for i in 0..re {
        out[rb + i][cb..].copy_from_slice(&e[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RegularGrid;

    fn simple_model() -> DpModel {
        let state = MixedSpace::continuous(RegularGrid::line(-2.0, 2.0, 9).unwrap());
        let action = MixedSpace::continuous(RegularGrid::line(-1.0, 1.0, 5).unwrap());
        DpModel {
            a: vec![vec![1.0]],
            b: vec![vec![1.0]],
            c: vec![],
            d: vec![],
            e: vec![],
            state_space: state,
            action_space: action,
            gx: CostFn::Zero,
            gu: CostFn::Quadratic { a: 1.0, b: vec![], c: 0.0 },
            gt: CostFn::Quadratic { a: 1.0, b: vec![], c: 0.0 },
            horizon: 3,
            noise: None,
            stage_overrides: BTreeMap::new(),
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = simple_model();
        m.validate().unwrap();
        let s = serde_json::to_string_pretty(&m).unwrap();
        let back: DpModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn block_assembly() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let d = vec![vec![5.0]];
        let ap = block_diag(&a, &d);
        assert_eq!(ap, vec![
            vec![1.0, 2.0, 0.0],
            vec![3.0, 4.0, 0.0],
            vec![0.0, 0.0, 5.0]
        ]);
        let b = vec![vec![1.0], vec![0.0]];
        let c = vec![vec![2.0], vec![2.0]];
        let e = vec![vec![3.0]];
        let bp = block_ul_lr(&b, &c, &e);
        assert_eq!(bp, vec![vec![1.0, 2.0], vec![0.0, 2.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn stage_overrides_take_effect() {
        let mut m = simple_model();
        m.stage_overrides.insert(
            1,
            StageOverride { b: Some(vec![vec![-1.0]]), ..Default::default() },
        );
        assert_eq!(m.b_prime(0), vec![vec![1.0]]);
        assert_eq!(m.b_prime(1), vec![vec![-1.0]]);
        assert_eq!(m.b_prime(2), vec![vec![1.0]]);
    }

    #[test]
    fn cost_eval_and_conjugates() {
        let q = CostFn::Quadratic { a: 1.0, b: vec![1.0], c: 0.0 };
        assert_eq!(q.eval(&[2.0]), 6.0);
        let (v, u) = q.conjugate_opt(&[0.0], &[0.0], &[2.0]).unwrap();
        assert_eq!((v, u[0]), (0.0, 0.0));

        let pwl = CostFn::PiecewiseLinear {
            breakpoints: vec![-1.0, 0.0, 1.0],
            values: vec![1.0, 0.0, 1.0],
        };
        assert_eq!(pwl.eval(&[0.5]), 0.5);
        assert_eq!(pwl.eval(&[2.0]), 2.0); // boundary slope extension
        let (v, u) = pwl.conjugate_opt(&[0.5], &[-1.0], &[1.0]).unwrap();
        assert_eq!((v, u[0]), (0.0, 0.0));

        let zero = CostFn::Zero;
        let (v, u) = zero.conjugate_opt(&[3.0], &[-1.0], &[1.0]).unwrap();
        assert_eq!((v, u[0]), (3.0, 1.0));
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).is_ok());
        assert!(NoiseModel::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(NoiseModel::new(vec![], vec![]).is_err());
        let z = NoiseModel::zero(2);
        assert_eq!(z.len(), 1);
        assert_eq!(z.probs[0], 1.0);
    }

    #[test]
    fn tabulated_conjugate_respects_box() {
        let f = DiscreteFn::sample(RegularGrid::line(-2.0, 2.0, 5).unwrap(), |u| u[0] * u[0])
            .unwrap();
        let t = CostFn::Tabulated { f };
        let (v, u) = t.conjugate_opt(&[10.0], &[-1.0], &[1.0]).unwrap();
        // without the box the sup would sit at u = 2
        assert_eq!((v, u[0]), (9.0, 1.0));
    }
}
