//! Stochastic finite-horizon DP over post-decision states: the value
//! function V_t(m) = E[J_{t+1}(m + ξ)] satisfies a DP recursion of its
//! own, which the conjugate operator handles with a single dual table
//! per stage regardless of the noise support size.

use crate::conditioning::estimate_curvature;
use crate::dp_det::{conj_core, error_bounds, lipschitz_estimate, BellmanOut, StageReport};
use crate::error::{Error, Result};
use crate::grid::{MixedSpace, RegularGrid};
use crate::lft::{widened_dual_grid, DiscreteFn, DualGrid};
use crate::model::{mat_vec, DpModel};

pub use crate::model::NoiseModel;

/// Space of post-decision states m = A'x + B'u. Construction checks that
/// every noise-shifted corner still lies in the state box, since the
/// recursion evaluates stage costs at m + ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct PostDecisionSpace {
    pub space: MixedSpace,
}

impl PostDecisionSpace {
    pub fn new(space: MixedSpace, state_space: &MixedSpace, noise: &NoiseModel) -> Result<Self> {
        let g = space.product_grid()?;
        let s = state_space.product_grid()?;
        let d = g.dim;
        for corner in 0..(1usize << d) {
            let m: Vec<f64> = (0..d)
                .map(|a| if corner >> a & 1 == 1 { g.upper[a] } else { g.lower[a] })
                .collect();
            for xi in &noise.support {
                for a in 0..d {
                    let w = m[a] + xi[a];
                    if w < s.lower[a] - 1e-9 || w > s.upper[a] + 1e-9 {
                        return Err(Error::BadGrid(format!(
                            "post-decision corner plus noise leaves the state box on axis {a}"
                        )));
                    }
                }
            }
        }
        Ok(Self { space })
    }

    /// Reuse the state box as the post-decision box (valid whenever the
    /// dynamics map the feasible set into the state box).
    pub fn from_state_space(model: &DpModel) -> Self {
        Self { space: model.state_space.clone() }
    }
}

/// Conjugate stochastic step output: V̂ plus the dual optimizer of every
/// (post-decision point, noise atom) back-transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjStochOut {
    pub value: DiscreteFn,
    pub s_star: Vec<Vec<usize>>,
}

/// Pre-decision stochastic Bellman backup at stage `t`:
/// x ↦ g_x(x) + min_u [ g_u(u) + Σ_k p_k J(A'x + B'u + ξ_k) ].
pub fn stoch_bellman_step(
    j: &DiscreteFn,
    model: &DpModel,
    noise: &NoiseModel,
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
    let mut values = Vec::with_capacity(j.grid.len());
    let mut max_clamp = 0.0f64;
    for i in 0..j.grid.len() {
        let x = j.grid.point(i);
        let ax = mat_vec(&ap, &x);
        let mut best = f64::INFINITY;
        let mut best_clamp = 0.0f64;
        for k in 0..action_grid.len() {
            let u = action_grid.point(k);
            let bu = mat_vec(&bp, &u);
            let mut expect = 0.0;
            let mut clamp = 0.0f64;
            for (xi, p) in noise.support.iter().zip(&noise.probs) {
                let next: Vec<f64> =
                    ax.iter().zip(&bu).zip(xi).map(|((a, b), c)| a + b + c).collect();
                let (jv, cl) = j.interp_clamped(&next);
                expect += p * jv;
                clamp = clamp.max(cl);
            }
            let v = gu.eval(&u) + expect;
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

/// Post-decision stochastic Bellman backup (the oracle matching
/// [`conj_stoch_step`]): m ↦ Σ_k p_k [ g_x(m+ξ_k) +
/// min_u ( g_u(u) + V'(A'(m+ξ_k) + B'u) ) ].
pub fn stoch_bellman_post(
    vprime: &DiscreteFn,
    model: &DpModel,
    noise: &NoiseModel,
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
            let c = gu.eval(&u);
            (u, c)
        })
        .collect();
    let mut values = Vec::with_capacity(vprime.grid.len());
    let mut max_clamp = 0.0f64;
    for i in 0..vprime.grid.len() {
        let m = vprime.grid.point(i);
        let mut total = 0.0;
        for (xi, p) in noise.support.iter().zip(&noise.probs) {
            let w: Vec<f64> = m.iter().zip(xi).map(|(a, b)| a + b).collect();
            let aw = mat_vec(&ap, &w);
            let mut best = f64::INFINITY;
            let mut best_clamp = 0.0f64;
            for (u, ucost) in &actions {
                let bu = mat_vec(&bp, u);
                let next: Vec<f64> = aw.iter().zip(&bu).map(|(a, b)| a + b).collect();
                let (jv, cl) = vprime.interp_clamped(&next);
                let v = ucost + jv;
                if v < best {
                    best = v;
                    best_clamp = cl;
                }
            }
            max_clamp = max_clamp.max(best_clamp);
            total += p * (gx.eval(&w) + best);
        }
        values.push(total);
    }
    Ok(BellmanOut { value: DiscreteFn::new(vprime.grid.clone(), values)?, max_clamp })
}

/// One conjugate stochastic backup at stage `t`, sharing its inner
/// routine with the deterministic step (a point mass at zero reproduces
/// it bit for bit).
pub fn conj_stoch_step(
    vprime: &DiscreteFn,
    model: &DpModel,
    noise: &NoiseModel,
    duals: &DualGrid,
    t: usize,
) -> Result<ConjStochOut> {
    let (lo, hi) = model.action_box()?;
    let shifts: Vec<(Vec<f64>, f64)> = noise
        .support
        .iter()
        .cloned()
        .zip(noise.probs.iter().copied())
        .collect();
    let (value, s_star) = conj_core(
        vprime,
        &vprime.grid.clone(),
        &model.a_prime(t),
        &model.b_prime(t),
        model.gu_at(t),
        &lo,
        &hi,
        model.gx_at(t),
        &shifts,
        duals,
    )?;
    Ok(ConjStochOut { value, s_star })
}

/// Backward induction over post-decision values. The terminal
/// V_{T−1}(m) = E[g_T(m + ξ_T)] seeds the recursion; each report at
/// stage t holds V_t, computed with the stage-(t+1) costs and dynamics.
/// The final pre-decision value J_0 is recovered with
/// [`first_stage`].
pub fn stoch_solve(model: &DpModel, dual_points: &[usize]) -> Result<Vec<StageReport>> {
    model.validate()?;
    let grid = model.state_space.product_grid()?;
    let horizon = model.horizon;
    // terminal expectation over the last transition's noise
    let last_noise = model.noise_at(horizon - 1);
    let mut v = DiscreteFn::sample(grid.clone(), |m| {
        last_noise
            .support
            .iter()
            .zip(&last_noise.probs)
            .map(|(xi, p)| {
                let w: Vec<f64> = m.iter().zip(xi).map(|(a, b)| a + b).collect();
                p * model.gt.eval(&w)
            })
            .sum()
    })?;
    let mut reports = Vec::with_capacity(horizon);
    for t in (0..horizon - 1).rev() {
        let duals = widened_dual_grid(&v, dual_points)?;
        let l_v = lipschitz_estimate(&v);
        let (e1, e2) = error_bounds(model, &grid, &duals, l_v)?;
        let step = conj_stoch_step(&v, model, &model.noise_at(t), &duals, t + 1)?;
        v = step.value.clone();
        let curvature = if grid.dim == 1 { estimate_curvature(&v).ok() } else { None };
        reports.push(StageReport { stage: t, value: step.value, e1, e2, curvature });
    }
    Ok(reports)
}

/// Assemble the pre-decision stage-0 value J_0 = g_x + h*(A'·) from the
/// last post-decision value, returning it with the per-state dual
/// optimizers (the policy seeds for the first action).
pub fn first_stage(
    model: &DpModel,
    v0: &DiscreteFn,
    dual_points: &[usize],
) -> Result<(DiscreteFn, Vec<usize>, DualGrid)> {
    let duals = widened_dual_grid(v0, dual_points)?;
    let step = crate::dp_det::conjugate_dp_step(v0, model, &duals, 0)?;
    Ok((step.value, step.s_star, duals))
}

/// Policy recovery from a recorded dual optimizer; identical to the
/// deterministic extraction.
pub fn extract_policy_stoch(
    model: &DpModel,
    t: usize,
    duals: &DualGrid,
    s_star_flat: usize,
) -> Result<Vec<f64>> {
    crate::dp_det::extract_policy(model, t, duals, s_star_flat)
}

/// First-stage action by direct minimization of g_u,0(u) + Ṽ_0(A'x + B'u)
/// over the action grid, with Ṽ_0 the interpolated post-decision value.
/// Unlike the dual-slope extraction this does not amplify dual-grid
/// quantization by 1/(2β), so it stays reliable when the action cost is
/// nearly linear.
pub fn greedy_first_action(model: &DpModel, v0: &DiscreteFn, x: &[f64]) -> Result<Vec<f64>> {
    let actions = model.action_space.product_grid()?;
    let ax = mat_vec(&model.a_prime(0), x);
    let gu0 = model.gu_at(0);
    let bp = model.b_prime(0);
    let mut best = f64::INFINITY;
    let mut arg = actions.point(0);
    for j in 0..actions.len() {
        let u = actions.point(j);
        let bu = mat_vec(&bp, &u);
        let m: Vec<f64> = ax.iter().zip(&bu).map(|(a, b)| a + b).collect();
        let (cont, _) = v0.interp_clamped(&m);
        let val = gu0.eval(&u) + cont;
        if val < best {
            best = val;
            arg = u;
        }
    }
    Ok(arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_det::{bellman_step, conjugate_dp_step, solve};
    use crate::model::CostFn;
    use std::collections::BTreeMap;

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
    fn point_mass_noise_reduces_to_deterministic_bellman() {
        let m = lqr1(1.0, 1.0, 1.0, 1, 33, 65);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let act = m.action_space.product_grid().unwrap();
        let det = bellman_step(&j, &m, &act, 0).unwrap();
        let st = stoch_bellman_step(&j, &m, &NoiseModel::zero(1), &act, 0).unwrap();
        assert_eq!(det.value.values, st.value.values);
    }

    #[test]
    fn symmetric_noise_shifts_quadratic_by_variance() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 33, 1601);
        let grid = m.state_space.product_grid().unwrap();
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let act = m.action_space.product_grid().unwrap();
        let delta = 0.25;
        let noise = NoiseModel::new(vec![vec![-delta], vec![delta]], vec![0.5, 0.5]).unwrap();
        let st = stoch_bellman_step(&j, &m, &noise, &act, 0).unwrap();
        // min_u u² + E (x+u+ξ)² = x²/2 + δ², away from the box edge
        for i in 8..25 {
            let x = st.value.grid.axis_coord(0, i);
            let expect = 0.5 * x * x + delta * delta;
            assert!(
                (st.value.values[i] - expect).abs() < 5e-3,
                "x = {x}: {} vs {expect}",
                st.value.values[i]
            );
        }
    }

    #[test]
    fn zero_noise_conjugate_is_bit_identical_to_deterministic() {
        let m = lqr1(1.0, 2.0, 1.5, 1, 129, 3);
        let grid = m.state_space.product_grid().unwrap();
        let v = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&v, &[257]).unwrap();
        let det = conjugate_dp_step(&v, &m, &duals, 0).unwrap();
        let st = conj_stoch_step(&v, &m, &NoiseModel::zero(1), &duals, 0).unwrap();
        assert_eq!(det.value.values, st.value.values);
        let flattened: Vec<usize> = st.s_star.iter().map(|v| v[0]).collect();
        assert_eq!(det.s_star, flattened);
    }

    #[test]
    fn zero_mass_support_points_change_nothing() {
        let m = lqr1(1.0, 1.0, 1.0, 1, 65, 3);
        let grid = m.state_space.product_grid().unwrap();
        let v = DiscreteFn::sample(grid, |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&v, &[129]).unwrap();
        let single = NoiseModel::new(vec![vec![0.25]], vec![1.0]).unwrap();
        let padded =
            NoiseModel::new(vec![vec![0.25], vec![-0.5]], vec![1.0, 0.0]).unwrap();
        let a = conj_stoch_step(&v, &m, &single, &duals, 0).unwrap();
        let b = conj_stoch_step(&v, &m, &padded, &duals, 0).unwrap();
        assert_eq!(a.value.values, b.value.values);
    }

    #[test]
    fn conjugate_step_within_bounds_of_post_decision_oracle() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 129, 1601);
        let grid = m.state_space.product_grid().unwrap();
        let v = DiscreteFn::sample(grid.clone(), |x| m.gt.eval(x)).unwrap();
        let duals = widened_dual_grid(&v, &[2049]).unwrap();
        let noise = NoiseModel::new(vec![vec![-0.5], vec![0.5]], vec![0.5, 0.5]).unwrap();
        let conj = conj_stoch_step(&v, &m, &noise, &duals, 0).unwrap();
        let act = m.action_space.product_grid().unwrap();
        let oracle = stoch_bellman_post(&v, &m, &noise, &act, 0).unwrap();
        let l_v = lipschitz_estimate(&v);
        let (e1, e2) = error_bounds(&m, &grid, &duals, l_v).unwrap();
        let slack = 2e-3; // action-grid and interpolation resolution
        for i in 0..grid.len() {
            let gap = (conj.value.values[i] - oracle.value.values[i]).abs();
            assert!(gap <= e1 + e2 + slack, "gap {gap} at {i} exceeds {}", e1 + e2 + slack);
        }
    }

    #[test]
    fn stoch_solve_with_zero_noise_matches_det_solve() {
        let m = lqr1(0.0, 1.0, 1.0, 3, 129, 3);
        let det = solve(&m, &[257]).unwrap(); // J_2, J_1, J_0
        let st = stoch_solve(&m, &[257]).unwrap(); // V_1, V_0 (V_2 is the seed)
        // zero noise: V_t == J_{t+1}, bit for bit
        assert_eq!(st.len(), 2);
        assert_eq!(st[0].value.values, det[0].value.values); // V_1 == J_2
        assert_eq!(st[1].value.values, det[1].value.values); // V_0 == J_1
    }

    #[test]
    fn post_decision_space_containment() {
        let m = lqr1(0.0, 1.0, 1.0, 1, 9, 3);
        let noise = NoiseModel::new(vec![vec![-0.5], vec![0.5]], vec![0.5, 0.5]).unwrap();
        // same box: corners + noise escape
        assert!(PostDecisionSpace::new(m.state_space.clone(), &m.state_space, &noise).is_err());
        let inner = MixedSpace::continuous(RegularGrid::line(-1.5, 1.5, 7).unwrap());
        assert!(PostDecisionSpace::new(inner, &m.state_space, &noise).is_ok());
        // zero noise: equal boxes are fine
        assert!(PostDecisionSpace::new(
            m.state_space.clone(),
            &m.state_space,
            &NoiseModel::zero(1)
        )
        .is_ok());
    }
}
