//! Classical simulation of the quantum-transform pipeline: postselection
//! and relabeling combinatorics, per-stage success probabilities, and
//! repetition accounting. Values always come from the classical
//! conjugate code paths; the simulator's relabeled outputs are compared
//! against them and any disagreement is surfaced as a diagnostic, never
//! hidden.

use serde::{Deserialize, Serialize};

use crate::conditioning::{estimate_curvature, PhiInputs};
use crate::dp_det::{conjugate_dp_step, solve, StageReport};
use crate::dp_stoch::{conj_stoch_step, stoch_solve};
use crate::error::{Error, Result};
use crate::grid::RegularGrid;
use crate::lft::{dlft_bruteforce, dlft_fast, discrete_gradients, widened_dual_grid, DiscreteFn, DualGrid};
use crate::model::{mat_t_vec, CostFn, DpModel};

/// Entry of a uniform-amplitude indexed superposition: basis index,
/// attached payload, and the good-subspace flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SupEntry {
    pub index: usize,
    pub payload: Vec<f64>,
    pub good: bool,
}

/// Uniform superposition over index/payload pairs; garbage registers are
/// not modeled since they do not affect the success probability.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexedSuperposition {
    pub entries: Vec<SupEntry>,
}

/// The relabeling good set: pairs (i, m) that survive postselection and
/// the dual index each one maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodSet {
    pub pairs: Vec<(usize, usize)>,
    pub j: Vec<usize>,
    pub w: usize,
}

/// Relabeling disagreement with the exhaustive conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub dp_stage: usize,
    pub i: usize,
    pub m: usize,
    pub j: usize,
    pub expected: f64,
    pub got: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Forward,
    Backward,
}

/// Postselection record of one simulated transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProb {
    pub dp_stage: usize,
    pub kind: TransformKind,
    pub good: usize,
    pub total: usize,
    pub prob: f64,
    /// 1/κ̂ of the transformed table, the claimed lower bound
    pub kappa_bound: f64,
}

/// Accumulated accounting of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub stages: Vec<StageProb>,
    pub overall_prob: f64,
    pub expected_amp_rounds: f64,
    /// γ^(d·T) (γ^(d·r·T) with noise) when the model's costs expose
    /// quadratic moduli
    pub gamma_power_bound: Option<f64>,
    pub mismatches: Vec<Mismatch>,
}

impl SimTrace {
    /// Human-readable per-stage table.
    pub fn to_table(&self) -> String {
        let mut out = String::from("stage  kind      good  total  prob      1/kappa\n");
        for s in &self.stages {
            out.push_str(&format!(
                "{:<6} {:<9} {:<5} {:<6} {:<9.6} {:.6}\n",
                s.dp_stage,
                match s.kind {
                    TransformKind::Forward => "forward",
                    TransformKind::Backward => "backward",
                },
                s.good,
                s.total,
                s.prob,
                s.kappa_bound
            ));
        }
        out.push_str(&format!(
            "overall {:.6}  rounds {:.1}  mismatches {}\n",
            self.overall_prob,
            self.expected_amp_rounds,
            self.mismatches.len()
        ));
        out
    }
}

/// Simulated 1-D transform output.
#[derive(Debug, Clone, PartialEq)]
pub struct QlftSim {
    pub output: DiscreteFn,
    pub prob: f64,
    pub good: usize,
    pub total: usize,
    pub w: usize,
    pub mismatches: Vec<Mismatch>,
    pub uncovered: Vec<usize>,
}

/// Enumerate the good set of a convex 1-D function against a uniform
/// dual grid: interior points carry one pair per whole dual step inside
/// their gradient jump (capped at W); the two endpoints always survive
/// with multiplicity one.
pub fn qlft_good_set(f: &DiscreteFn, duals: &DualGrid) -> Result<GoodSet> {
    let n = f.grid.len();
    let k = duals.grid.len();
    let c = discrete_gradients(f)?;
    for i in 0..c.len().saturating_sub(1) {
        if c[i + 1] < c[i] - 1e-12 * (1.0 + c[i].abs()) {
            return Err(Error::NotConvex { axis: 0, position: i });
        }
    }
    let ds = duals.grid.spacing()[0];
    let mut pairs = vec![(0usize, 0usize)];
    let mut j = vec![0usize];
    let mut w = 0usize;
    if ds > 0.0 && n >= 3 {
        for i in 1..n - 1 {
            w = w.max(((c[i] - c[i - 1]) / ds).floor() as usize);
        }
        for i in 1..n - 1 {
            let mult = ((c[i] - c[i - 1]) / ds).floor() as usize;
            if mult == 0 {
                continue;
            }
            // smallest dual index strictly above the left gradient
            let mut ell = 0usize;
            while ell < k && duals.grid.axis_coord(0, ell) <= c[i - 1] {
                ell += 1;
            }
            for m in 0..mult.min(w) {
                let jj = ell + m;
                if jj < k {
                    pairs.push((i, m));
                    j.push(jj);
                }
            }
        }
    }
    pairs.push((n - 1, 0));
    j.push(k - 1);
    Ok(GoodSet { pairs, j, w })
}

/// Simulate the measurement-and-relabel transform of a convex 1-D
/// function: postselect the good set, relabel by j, and read the
/// conjugate values off the surviving entries. Disagreements with the
/// exhaustive conjugate are reported, not repaired.
pub fn simulate_qlft(f: &DiscreteFn, duals: &DualGrid) -> Result<QlftSim> {
    let gs = qlft_good_set(f, duals)?;
    let brute = dlft_bruteforce(f, duals)?;
    let n = f.grid.len();
    let k = duals.grid.len();
    let mut values = vec![f64::NAN; k];
    let mut mismatches = Vec::new();
    for (idx, &(i, m)) in gs.pairs.iter().enumerate() {
        let jj = gs.j[idx];
        let s = duals.grid.axis_coord(0, jj);
        let x = f.grid.axis_coord(0, i);
        let got = s * x - f.values[i];
        let expected = brute.output.values[jj];
        if got != expected {
            mismatches.push(Mismatch { dp_stage: 0, i, m, j: jj, expected, got });
        }
        if values[jj].is_nan() {
            values[jj] = got;
        }
    }
    let uncovered: Vec<usize> =
        (0..k).filter(|&jj| values[jj].is_nan()).collect();
    for &jj in &uncovered {
        values[jj] = brute.output.values[jj];
    }
    let (good, total) = (gs.pairs.len(), n * gs.w);
    let prob = if gs.w == 0 { 1.0 } else { good as f64 / total as f64 };
    Ok(QlftSim {
        output: DiscreteFn::new(duals.grid.clone(), values)?,
        prob,
        good,
        total,
        w: gs.w,
        mismatches,
        uncovered,
    })
}

fn curvature_bound(f: &DiscreteFn) -> f64 {
    match estimate_curvature(f) {
        Ok(c) if c.condition_number.is_finite() => 1.0 / c.condition_number,
        _ => 0.0,
    }
}

fn quad_moduli(c: &CostFn) -> Option<(f64, f64)> {
    match c {
        CostFn::Quadratic { a, .. } if *a > 0.0 => Some((2.0 * a, 2.0 * a)),
        // flat terms are logged with a vanishing modulus so the ratio
        // bound stays defined
        CostFn::Quadratic { .. } | CostFn::Zero => Some((1e-12, 1e-12)),
        _ => None,
    }
}

fn gamma_bound(model: &DpModel, atoms: usize) -> Option<f64> {
    let (lx, mx) = quad_moduli(&model.gx)?;
    let (lu, mu) = quad_moduli(&model.gu)?;
    let (lt, mt) = quad_moduli(&model.gt)?;
    if lu <= 1e-12 || lt <= 1e-12 {
        return None; // terminal/action curvature drives the recursion
    }
    let p = PhiInputs {
        t: 0,
        big_t: model.horizon,
        lp_gx: lx,
        mu_gx: mx,
        lp_gu: lu,
        mu_gu: mu,
        lp_jt: lt,
        mu_jt: mt,
    };
    let g = crate::conditioning::gamma(&p).ok()?;
    let d = model.state_dim() as f64;
    Some(g.powf(d * atoms as f64 * model.horizon as f64))
}

/// Good/total accounting of the backward transform: conjugating the dual
/// table h at the (uniform) query points a·(y + ξ).
fn backward_accounting(
    h: &DiscreteFn,
    a: f64,
    out_grid: &RegularGrid,
    xi: f64,
) -> Result<(usize, usize)> {
    let n = out_grid.len();
    let q0 = a * (out_grid.axis_coord(0, 0) + xi);
    let q1 = a * (out_grid.axis_coord(0, n - 1) + xi);
    let (lo, hi) = if q0 <= q1 { (q0, q1) } else { (q1, q0) };
    if hi - lo <= 0.0 {
        return Ok((0, 0)); // degenerate query set: deterministic relabel
    }
    let queries = DualGrid { grid: RegularGrid::line(lo, hi, n)? };
    let gs = qlft_good_set(h, &queries)?;
    if gs.w == 0 {
        return Ok((0, 0));
    }
    Ok((gs.pairs.len(), h.grid.len() * gs.w))
}

/// Simulate the full pipeline: run the classical conjugate solver stage
/// by stage (so final values are bit-identical to it) while enumerating
/// the postselection sets of the two transforms each stage performs.
/// Stochastic models account one backward transform per noise atom.
pub fn simulate_qdp(model: &DpModel, dual_points: &[usize]) -> Result<(DiscreteFn, SimTrace)> {
    model.validate()?;
    if model.state_dim() != 1 {
        return Err(Error::BadGrid(
            "simulation accounting is implemented for one-dimensional state spaces".into(),
        ));
    }
    let grid = model.state_space.product_grid()?;
    let stochastic = model.noise.is_some()
        || model.stage_overrides.values().any(|o| o.noise.is_some());
    let horizon = model.horizon;

    // terminal register
    let mut v = if stochastic {
        let last = model.noise_at(horizon - 1);
        DiscreteFn::sample(grid.clone(), |m| {
            last.support
                .iter()
                .zip(&last.probs)
                .map(|(xi, p)| {
                    let w: Vec<f64> = m.iter().zip(xi).map(|(a, b)| a + b).collect();
                    p * model.gt.eval(&w)
                })
                .sum()
        })?
    } else {
        DiscreteFn::sample(grid.clone(), |x| model.gt.eval(x))?
    };

    let mut stages = Vec::new();
    let mut mismatches = Vec::new();
    let mut atoms = 1usize;
    let (act_lo, act_hi) = model.action_box()?;
    let steps: Vec<usize> = if stochastic {
        (0..horizon - 1).rev().collect()
    } else {
        (0..horizon).rev().collect()
    };
    for &t in &steps {
        // stage data as used by the classical step
        let (cost_stage, noise) = if stochastic {
            (t + 1, model.noise_at(t))
        } else {
            (t, crate::model::NoiseModel::zero(1))
        };
        atoms = atoms.max(noise.len());
        let duals = widened_dual_grid(&v, dual_points)?;

        // forward transform accounting + relabel check
        let sim = simulate_qlft(&v, &duals)?;
        for mut mm in sim.mismatches {
            mm.dp_stage = t;
            mismatches.push(mm);
        }
        stages.push(StageProb {
            dp_stage: t,
            kind: TransformKind::Forward,
            good: sim.good,
            total: sim.total,
            prob: sim.prob,
            kappa_bound: curvature_bound(&v),
        });

        // dual table h = g_u*(−B'ᵀs) + V'*(s) for the backward accounting
        let star = dlft_fast(&v, &duals)?;
        let bp = model.b_prime(cost_stage);
        let gu = model.gu_at(cost_stage);
        let h_vals: Vec<f64> = (0..duals.grid.len())
            .map(|jj| {
                let s = duals.grid.point(jj);
                let ms: Vec<f64> = mat_t_vec(&bp, &s).iter().map(|x| -x).collect();
                gu.conjugate_opt(&ms, &act_lo, &act_hi).map(|(g, _)| g + star.output.values[jj])
            })
            .collect::<Result<_>>()?;
        let h = DiscreteFn::new(duals.grid.clone(), h_vals)?;
        let a_scalar = model.a_prime(cost_stage)[0][0];
        let mut good = 0usize;
        let mut total = 0usize;
        for xi in &noise.support {
            let (g, tot) = backward_accounting(&h, a_scalar, &grid, xi[0])?;
            good += g;
            total += tot;
        }
        let prob = if total == 0 { 1.0 } else { good as f64 / total as f64 };
        stages.push(StageProb {
            dp_stage: t,
            kind: TransformKind::Backward,
            good,
            total,
            prob,
            kappa_bound: curvature_bound(&h),
        });

        // classical value update (the simulator's value register)
        v = if stochastic {
            conj_stoch_step(&v, model, &noise, &duals, cost_stage)?.value
        } else {
            conjugate_dp_step(&v, model, &duals, cost_stage)?.value
        };
    }

    let overall_prob: f64 = stages.iter().map(|s| s.prob).product();
    let trace = SimTrace {
        overall_prob,
        expected_amp_rounds: 1.0 / overall_prob.sqrt(),
        gamma_power_bound: gamma_bound(model, if stochastic { atoms } else { 1 }),
        mismatches,
        stages,
    };
    Ok((v, trace))
}

/// Expected repetitions to read out one state's value:
/// ⌈√N / √overall_prob⌉.
pub fn point_query_cost(trace: &SimTrace, n_states: usize) -> usize {
    ((n_states as f64).sqrt() / trace.overall_prob.sqrt()).ceil() as usize
}

/// Convenience wrappers returning the classical reports alongside the
/// trace so callers can cross-check without re-running.
pub fn simulate_with_reports(
    model: &DpModel,
    dual_points: &[usize],
) -> Result<(DiscreteFn, SimTrace, Vec<StageReport>)> {
    let (v, trace) = simulate_qdp(model, dual_points)?;
    let reports = if model.noise.is_some()
        || model.stage_overrides.values().any(|o| o.noise.is_some())
    {
        stoch_solve(model, dual_points)?
    } else {
        solve(model, dual_points)?
    };
    Ok((v, trace, reports))
}
