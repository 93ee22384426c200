//! Deterministic finite-horizon DP: an exhaustive Bellman oracle and the
//! conjugate (dual-space) DP operator with per-stage error accounting.

use serde::{Deserialize, Serialize};

use crate::conditioning::{estimate_curvature, CurvatureReport};
use crate::error::{Error, Result};
use crate::grid::RegularGrid;
use crate::lft::{dlft_fast, widened_dual_grid, DiscreteFn, DualGrid};
use crate::model::{mat_t_vec, mat_vec, CostFn, DpModel, Mat};

/// Bellman-step output: the new value function and the largest distance
/// a transition had to be clamped back into the state box (0 when all
/// transitions are feasible).
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanOut {
    pub value: DiscreteFn,
    pub max_clamp: f64,
}

/// Per-stage solver record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub value: DiscreteFn,
    pub e1: f64,
    pub e2: f64,
    pub curvature: Option<CurvatureReport>,
}

/// Conjugate-step output: the new value function plus, per state, the
/// flat dual index attaining the back-transform (the policy seed).
#[derive(Debug, Clone, PartialEq)]
pub struct ConjStepOut {
    pub value: DiscreteFn,
    pub s_star: Vec<usize>,
}

/// One exhaustive Bellman backup at stage `t`:
/// x ↦ g_x(x) + min_u g_u(u) + J(A'x + B'u), J interpolated multilinearly.
pub fn bellman_step(
    j: &DiscreteFn,
    model: &DpModel,
    action_grid: &RegularGrid,
    t: usize,
) -> Result<BellmanOut> {
    if action_grid.len() == 0 {
        return Err(Error::NoActions);
    }
    let ap = model.a_prime(t);
    let bp = model.b_prime(t);
    let gx = model.gx_at(t);
    let gu = model.gu_at(t);
    let actions: Vec<(Vec<f64>, f64)> = (0..action_grid.len())
        .map(|k| {
            let u = action_grid.point(k);
            let cost = gu.eval(&u);
            (u, cost)
        })
        .collect();
    let mut values = Vec::with_capacity(j.grid.len());
    let mut max_clamp = 0.0f64;
    for i in 0..j.grid.len() {
        let x = j.grid.point(i);
        let ax = mat_vec(&ap, &x);
        let mut best = f64::INFINITY;
        let mut best_clamp = 0.0;
        for (u, ucost) in &actions {
            let bu = mat_vec(&bp, u);
            let next: Vec<f64> = ax.iter().zip(&bu).map(|(a, b)| a + b).collect();
            let (jv, clamp) = j.interp_clamped(&next);
            let v = ucost + jv;
            if v < best {
                best = v;
                best_clamp = clamp;
            }
        }
        max_clamp = max_clamp.max(best_clamp);
        values.push(gx.eval(&x) + best);
    }
    Ok(BellmanOut { value: DiscreteFn::new(j.grid.clone(), values)?, max_clamp })
}

/// Shared inner routine of the deterministic and stochastic conjugate
/// steps. For each point y of `out_grid` it returns
/// Σ_k p_k · (h*(A'(y+ξ_k)) + g_x(y+ξ_k)) where
/// h(s) = g_u*(−B'ᵀs) + V'*(s), together with the dual optimizer of each
/// (y, k) back-transform. The deterministic step is the single-shift
/// case ξ = 0, p = 1, so both pipelines run bit-identical arithmetic.
pub(crate) fn conj_core(
    vprime: &DiscreteFn,
    out_grid: &RegularGrid,
    ap: &Mat,
    bp: &Mat,
    gu: &CostFn,
    act_lo: &[f64],
    act_hi: &[f64],
    gx: &CostFn,
    shifts: &[(Vec<f64>, f64)],
    duals: &DualGrid,
) -> Result<(DiscreteFn, Vec<Vec<usize>>)> {
    let d = vprime.grid.dim;
    if duals.grid.dim != d || out_grid.dim != d {
        return Err(Error::BadGrid("conjugate step dimension mismatch".into()));
    }
    // step 1: conjugate the incoming value function
    let star = dlft_fast(vprime, duals)?;
    // step 2: add the action-cost conjugate in slope space
    let kk = duals.grid.len();
    let mut h = Vec::with_capacity(kk);
    for jj in 0..kk {
        let s = duals.grid.point(jj);
        let ms = mat_t_vec(bp, &s).iter().map(|v| -v).collect::<Vec<_>>();
        let (gustar, _) = gu.conjugate_opt(&ms, act_lo, act_hi)?;
        h.push(gustar + star.output.values[jj]);
    }
    // steps 3-4: conjugate back at the query points A'(y+ξ) and add g_x
    let n = out_grid.len();
    let mut acc = vec![0.0f64; n];
    let mut comp = vec![0.0f64; n]; // Kahan compensation
    let mut s_star = vec![Vec::with_capacity(shifts.len()); n];
    for (xi, p) in shifts {
        if d == 1 {
            // queries are monotone in the state, so one pointer pass works
            let a = ap[0][0];
            let order: Box<dyn Iterator<Item = usize>> =
                if a >= 0.0 { Box::new(0..n) } else { Box::new((0..n).rev()) };
            let ss: Vec<f64> = (0..kk).map(|jj| duals.grid.axis_coord(0, jj)).collect();
            let mut ptr = 0usize;
            for i in order {
                let w = out_grid.axis_coord(0, i) + xi[0];
                let q = a * w;
                while ptr + 1 < kk && q * ss[ptr + 1] - h[ptr + 1] > q * ss[ptr] - h[ptr] {
                    ptr += 1;
                }
                let hstar = q * ss[ptr] - h[ptr];
                kahan_add(&mut acc[i], &mut comp[i], p * (hstar + gx.eval(&[w])));
                s_star[i].push(ptr);
            }
            // restore per-shift register order (reverse pass appended in
            // reverse, but each state gets exactly one entry per shift,
            // so positions line up regardless of visit order)
        } else {
            for i in 0..n {
                let y = out_grid.point(i);
                let w: Vec<f64> = y.iter().zip(xi).map(|(a, b)| a + b).collect();
                let q = mat_vec(ap, &w);
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0usize;
                for jj in 0..kk {
                    let s = duals.grid.point(jj);
                    let v = q.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() - h[jj];
                    if v > best {
                        best = v;
                        arg = jj;
                    }
                }
                kahan_add(&mut acc[i], &mut comp[i], p * (best + gx.eval(&w)));
                s_star[i].push(arg);
            }
        }
    }
    Ok((DiscreteFn::new(out_grid.clone(), acc)?, s_star))
}

fn kahan_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

/// One conjugate DP backup at stage `t` (the dual-space counterpart of
/// [`bellman_step`]).
pub fn conjugate_dp_step(
    jprime: &DiscreteFn,
    model: &DpModel,
    duals: &DualGrid,
    t: usize,
) -> Result<ConjStepOut> {
    let (lo, hi) = model.action_box()?;
    let shifts = vec![(vec![0.0; jprime.grid.dim], 1.0)];
    let (value, s_star) = conj_core(
        jprime,
        &jprime.grid.clone(),
        &model.a_prime(t),
        &model.b_prime(t),
        model.gu_at(t),
        &lo,
        &hi,
        model.gx_at(t),
        &shifts,
        duals,
    )?;
    Ok(ConjStepOut { value, s_star: s_star.into_iter().map(|v| v[0]).collect() })
}

/// Discretization error budget of one conjugate step: E1 covers the
/// primal (state) grid, E2 the dual (slope) grid.
pub fn error_bounds(
    model: &DpModel,
    state_grid: &RegularGrid,
    duals: &DualGrid,
    l_j: f64,
) -> Result<(f64, f64)> {
    let d = model.state_dim() as f64;
    let factor = 1.0 + d.sqrt();
    let e1 = match &model.state_space.continuous {
        Some(g) => {
            // use the actual solve grid's resolution on the continuous axes
            let cont_dims = g.dim;
            let sub = RegularGrid::new(
                state_grid.lower[..cont_dims].to_vec(),
                state_grid.upper[..cont_dims].to_vec(),
                state_grid.points_per_axis[..cont_dims].to_vec(),
            )?;
            factor * l_j * sub.hausdorff_to_box()
        }
        None => 0.0,
    };
    let tau = model.state_bound()?;
    let eta = model.action_bound()?;
    let e2 = factor * (tau + eta) * duals.grid.hausdorff_to_box();
    Ok((e1, e2))
}

/// Largest |difference quotient| over all axis-aligned grid lines.
pub fn lipschitz_estimate(f: &DiscreteFn) -> f64 {
    let d = f.grid.dim;
    let mut l = 0.0f64;
    for a in 0..d {
        let n = f.grid.points_per_axis[a];
        if n < 2 {
            continue;
        }
        let stride: usize = f.grid.points_per_axis[a + 1..].iter().product();
        let outer: usize = f.grid.points_per_axis[..a].iter().product();
        let dx = f.grid.spacing()[a];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for tt in 0..n - 1 {
                    let c = (f.values[base + (tt + 1) * stride] - f.values[base + tt * stride]) / dx;
                    l = l.max(c.abs());
                }
            }
        }
    }
    l
}

/// Backward induction with the conjugate operator. `dual_points` is the
/// per-axis dual resolution; the dual box is rebuilt each stage from the
/// current value function's gradient range. Reports run from stage T−1
/// down to 0.
pub fn solve(model: &DpModel, dual_points: &[usize]) -> Result<Vec<StageReport>> {
    model.validate()?;
    let grid = model.state_space.product_grid()?;
    let mut j = DiscreteFn::sample(grid.clone(), |x| model.gt.eval(x))?;
    let mut reports = Vec::with_capacity(model.horizon);
    for t in (0..model.horizon).rev() {
        let duals = widened_dual_grid(&j, dual_points)?;
        let l_j = lipschitz_estimate(&j);
        let (e1, e2) = error_bounds(model, &grid, &duals, l_j)?;
        let step = conjugate_dp_step(&j, model, &duals, t)?;
        j = step.value.clone();
        let curvature = if grid.dim == 1 { estimate_curvature(&j).ok() } else { None };
        reports.push(StageReport { stage: t, value: step.value, e1, e2, curvature });
    }
    Ok(reports)
}

/// Recover the action from a recorded dual optimizer:
/// argmin over the action box of g_u(u) + ⟨u, B'ᵀ s*⟩.
pub fn extract_policy(
    model: &DpModel,
    t: usize,
    duals: &DualGrid,
    s_star_flat: usize,
) -> Result<Vec<f64>> {
    let s = duals.grid.point(s_star_flat);
    let (lo, hi) = model.action_box()?;
    let ms: Vec<f64> = mat_t_vec(&model.b_prime(t), &s).iter().map(|v| -v).collect();
    let (_, u) = model.gu_at(t).conjugate_opt(&ms, &lo, &hi)?;
    Ok(u)
}

/// Per-axis grid resolutions hitting a target one-step accuracy: state
/// points scale like T/ε per continuous axis, dual points likewise,
/// both rounded up to powers of two.
pub fn resolutions_for_epsilon(model: &DpModel, eps: f64) -> Result<(usize, usize)> {
    if !(eps > 0.0) {
        return Err(Error::BadParams(format!("epsilon must be positive, got {eps}")));
    }
    let raw = (model.horizon as f64 / eps).ceil().max(2.0);
    let pow2 = |v: f64| -> usize {
        let mut n = 2usize;
        while (n as f64) < v && n < 1 << 15 {
            n <<= 1;
        }
        n
    };
    Ok((pow2(raw), pow2(raw)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MixedSpace;
    use std::collections::BTreeMap;

    /// 1-D: dynamics x+u, costs g_x = qx·x², g_u = qu·u², g_T = qt·x²
    fn lqr1(qx: f64, qu: f64, qt: f64, horizon: usize, nx: usize, nu: usize) -> DpModel {
        DpModel {
            a: vec![vec![1.0]],
            b: vec![vec![1.0]],
            c: vec![],
            d: vec![],
            e: vec![],
            state_space: MixedSpace::continuous(RegularGrid::line(-2.0, 2.0, nx).unwrap()),
            action_space: MixedSpace::continuous(RegularGrid::line(-2.0, 2.0, nu).unwrap()),
            gx: CostFn::Quadratic { a: qx, b: vec![], c: 0.0 },
            gu: CostFn::Quadratic { a: qu, b: vec![], c: 0.0 },
            gt: CostFn::Quadratic { a: qt, b: vec![], c: 0.0 },
            horizon,
            noise: None,
            stage_overrides: BTreeMap::new(),
        }
    }

    #[test]
    fn bellman_completes_the_square() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 41, 801);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let act = m.action_space.product_grid().unwrap();
        let out = bellman_step(&j, &m, &act, 0).unwrap();
        for i in 0..out.value.grid.len() {
            let x = out.value.grid.axis_coord(0, i);
            // min_u u² + (x+u)² = x²/2
            assert!(
                (out.value.values[i] - 0.5 * x * x).abs() < 5e-3,
                "x = {x}: {} vs {}",
                out.value.values[i],
                0.5 * x * x
            );
        }
        assert_eq!(out.max_clamp, 0.0);
    }

    #[test]
    fn bellman_without_choice_adds_costs() {
        let mut m = lqr1(1.0, 0.0, 1.0, 1, 21, 3);
        m.b = vec![vec![0.0]];
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let act = m.action_space.product_grid().unwrap();
        let out = bellman_step(&j, &m, &act, 0).unwrap();
        for i in 0..j.grid.len() {
            let x = j.grid.axis_coord(0, i);
            assert!((out.value.values[i] - (x * x + j.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_step_matches_analytic_lqr() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 257, 3);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid.clone(), |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&j, &[2049]).unwrap();
        let step = conjugate_dp_step(&j, &m, &duals, 0).unwrap();
        let l_j = lipschitz_estimate(&j);
        let (e1, e2) = error_bounds(&m, &grid, &duals, l_j).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.axis_coord(0, i);
            worst = worst.max((step.value.values[i] - 0.5 * x * x).abs());
        }
        assert!(worst <= e1 + e2, "deviation {worst} exceeds bound {}", e1 + e2);
    }

    #[test]
    fn conjugate_step_with_killed_state() {
        // A = 0: the new value function is constant
        let mut m = lqr1(0.0, 1.0, 1.0, 1, 65, 3);
        m.a = vec![vec![0.0]];
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&j, &[257]).unwrap();
        let step = conjugate_dp_step(&j, &m, &duals, 0).unwrap();
        let first = step.value.values[0];
        for v in &step.value.values {
            assert!((v - first).abs() < 1e-9);
        }
        // min_u u² + (0 + u)² = 0 at u = 0
        assert!(first.abs() < 1e-9);
    }

    #[test]
    fn solve_tracks_lqr_recursion() {
        let horizon = 3;
        let m = lqr1(0.0, 1.0, 1.0, horizon, 513, 3);
        let reports = solve(&m, &[4097]).unwrap();
        assert_eq!(reports.len(), horizon);
        let budget: f64 = reports.iter().map(|r| r.e1 + r.e2).sum();
        // J_t(x) = x²/(T−t+1)
        let final_stage = reports.last().unwrap();
        assert_eq!(final_stage.stage, 0);
        let grid = &final_stage.value.grid;
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.axis_coord(0, i);
            let exact = x * x / (horizon as f64 + 1.0);
            worst = worst.max((final_stage.value.values[i] - exact).abs());
        }
        assert!(worst <= budget, "deviation {worst} exceeds {budget}");
    }

    #[test]
    fn solve_preserves_convex_extensibility_and_lipschitz() {
        let m = lqr1(1.0, 2.0, 1.0, 4, 129, 3);
        let reports = solve(&m, &[1025]).unwrap();
        for r in &reports {
            let c = crate::lft::discrete_gradients(&r.value).unwrap();
            for i in 1..c.len() {
                assert!(c[i] >= c[i - 1] - 1e-9);
            }
            let cur = r.curvature.as_ref().unwrap();
            assert!(cur.condition_number >= 1.0);
        }
    }

    #[test]
    fn error_bounds_zero_for_integer_state() {
        let state = MixedSpace::integer(RegularGrid::line(0.0, 5.0, 6).unwrap()).unwrap();
        let mut m = lqr1(0.0, 1.0, 1.0, 1, 6, 3);
        m.state_space = state;
        m.a = vec![];
        m.d = vec![vec![1.0]];
        m.b = vec![];
        m.e = vec![];
        m.c = vec![];
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid.clone(), |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&j, &[33]).unwrap();
        let (e1, e2) = error_bounds(&m, &grid, &duals, 10.0).unwrap();
        assert_eq!(e1, 0.0);
        assert!(e2 > 0.0);
    }

    #[test]
    fn dual_refinement_shrinks_e2() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 65, 3);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid.clone(), |x| m.gt.eval(x)).unwrap();
        let coarse = widened_dual_grid(&j, &[65]).unwrap();
        let fine = widened_dual_grid(&j, &[129]).unwrap();
        let (_, e2c) = error_bounds(&m, &grid, &coarse, 1.0).unwrap();
        let (_, e2f) = error_bounds(&m, &grid, &fine, 1.0).unwrap();
        assert!(e2f < e2c);
        assert!((e2c / e2f - 2.0).abs() < 0.1); // halving δs halves E2
    }

    #[test]
    fn policy_examples() {
        // g_u = u² on [−1,1] with B'ᵀs* = 2 → clamp to −1
        let mut m = lqr1(0.0, 1.0, 1.0, 1, 5, 3);
        m.action_space = MixedSpace::continuous(RegularGrid::line(-1.0, 1.0, 3).unwrap());
        let duals = DualGrid { grid: RegularGrid::line(2.0, 2.0, 1).unwrap() };
        let u = extract_policy(&m, 0, &duals, 0).unwrap();
        assert_eq!(u, vec![-1.0]);

        // B' = 0: unconstrained argmin of g_u alone
        m.b = vec![vec![0.0]];
        let u = extract_policy(&m, 0, &duals, 0).unwrap();
        assert_eq!(u, vec![0.0]);
    }

    #[test]
    fn policy_recovers_lqr_action() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 257, 3);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid.clone(), |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&j, &[2049]).unwrap();
        let step = conjugate_dp_step(&j, &m, &duals, 0).unwrap();
        let l_j = lipschitz_estimate(&j);
        let (e1, e2) = error_bounds(&m, &grid, &duals, l_j).unwrap();
        let mu_gu = 2.0;
        let tol = (4.0 * (e1 + e2) / mu_gu).sqrt();
        for i in (0..grid.len()).step_by(16) {
            let x = grid.axis_coord(0, i);
            let u = extract_policy(&m, 0, &duals, step.s_star[i]).unwrap();
            assert!(
                (u[0] - (-0.5 * x)).abs() <= tol,
                "x = {x}: u = {} vs {} (tol {tol})",
                u[0],
                -0.5 * x
            );
        }
    }

    #[test]
    fn epsilon_targeting_monotone() {
        let m = lqr1(0.0, 1.0, 1.0, 4, 5, 3);
        let (n1, k1) = resolutions_for_epsilon(&m, 0.1).unwrap();
        let (n2, k2) = resolutions_for_epsilon(&m, 0.05).unwrap();
        assert!(n2 >= n1 && k2 >= k1);
        assert!(n1.is_power_of_two() && k1.is_power_of_two());
        assert!(resolutions_for_epsilon(&m, 0.0).is_err());
    }
}
