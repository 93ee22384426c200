//! Curvature diagnostics: discrete Lipschitz/strong-convexity estimates,
//! the W relabeling-multiplicity parameter, and the condition-number
//! bound φ of value functions under the conjugate DP recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lft::{discrete_gradients, DiscreteFn};

/// Second-difference curvature surrogates of a 1-D grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// max |difference quotient|
    pub lipschitz: f64,
    /// max second difference / spacing
    pub grad_lipschitz: f64,
    /// min second difference / spacing
    pub strong_convexity: f64,
    /// grad_lipschitz / strong_convexity, +∞ if not strongly convex
    pub condition_number: f64,
}

/// Arguments of the φ bound: stage range and the curvature moduli of the
/// state cost, action cost, and terminal value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiInputs {
    pub t: usize,
    pub big_t: usize,
    pub lp_gx: f64,
    pub mu_gx: f64,
    pub lp_gu: f64,
    pub mu_gu: f64,
    pub lp_jt: f64,
    pub mu_jt: f64,
}

impl PhiInputs {
    fn validate(&self) -> Result<()> {
        if self.t > self.big_t {
            return Err(Error::BadParams(format!("t = {} > T = {}", self.t, self.big_t)));
        }
        for &m in [self.lp_gx, self.mu_gx, self.lp_gu, self.mu_gu, self.lp_jt, self.mu_jt].iter() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::BadModulus(m));
            }
        }
        Ok(())
    }
}

/// Curvature surrogates from samples on a uniform 1-D grid.
pub fn estimate_curvature(f: &DiscreteFn) -> Result<CurvatureReport> {
    let n = f.grid.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let delta = f.grid.spacing()[0];
    if !(delta > 0.0) {
        return Err(Error::BadGrid("curvature needs positive spacing".into()));
    }
    let c = discrete_gradients(f)?;
    let lipschitz = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut lp = f64::NEG_INFINITY;
    let mut mu = f64::INFINITY;
    for i in 1..c.len() {
        let second = (c[i] - c[i - 1]) / delta;
        lp = lp.max(second);
        mu = mu.min(second);
    }
    let (grad_lipschitz, strong_convexity) = (lp, mu.max(0.0));
    let condition_number = if mu > 0.0 { lp / mu } else { f64::INFINITY };
    Ok(CurvatureReport { lipschitz, grad_lipschitz, strong_convexity, condition_number })
}

/// W = floor of the largest interior gradient jump divided by the dual
/// spacing; the per-point multiplicity budget of the relabeling step.
pub fn w_parameter(f: &DiscreteFn, delta_s: f64) -> Result<usize> {
    let n = f.grid.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    if !(delta_s > 0.0) {
        return Err(Error::BadParams(format!("dual spacing must be positive, got {delta_s}")));
    }
    let c = discrete_gradients(f)?;
    let max_jump = (1..c.len()).map(|i| c[i] - c[i - 1]).fold(0.0f64, f64::max);
    Ok((max_jump / delta_s).floor() as usize)
}

/// One application of the curvature recursion: the infimal convolution
/// with the action cost harmonic-averages the moduli, then the state
/// cost adds.
fn recurse_once(v: f64, g_u: f64, g_x: f64) -> f64 {
    v * g_u / (v + g_u) + g_x
}

/// n-fold application of `recurse_once`, solved in closed form.
///
/// The recursion v ← v·y/(v+y) + x is a Möbius map with matrix
/// [[x+y, xy], [1, y]]; its n-th power follows from the eigenvalues
/// λ± = ((x+2y) ± √(x(x+4y)))/2, which are real and distinct for
/// positive x, y.
fn phi_one_sided(n: usize, x: f64, y: f64, z: f64) -> f64 {
    if n == 0 {
        return z;
    }
    let disc = (x * (x + 4.0 * y)).sqrt();
    let lam_p = 0.5 * ((x + 2.0 * y) + disc);
    let lam_m = 0.5 * ((x + 2.0 * y) - disc);
    let rho_n = (lam_m / lam_p).powi(n as i32);
    let a = (x + y - lam_m) - rho_n * (x + y - lam_p);
    let b = x * y * (1.0 - rho_n);
    let c = 1.0 - rho_n;
    let d = (y - lam_m) - rho_n * (y - lam_p);
    (a * z + b) / (c * z + d)
}

/// Closed-form bound on the condition number of the stage-t value
/// function: the gradient-Lipschitz recursion over the strong-convexity
/// recursion, both solved explicitly.
pub fn phi_closed_form(p: &PhiInputs) -> Result<f64> {
    p.validate()?;
    let n = p.big_t - p.t;
    let num = phi_one_sided(n, p.lp_gx, p.lp_gu, p.lp_jt);
    let den = phi_one_sided(n, p.mu_gx, p.mu_gu, p.mu_jt);
    Ok(num / den)
}

/// Independent oracle for [`phi_closed_form`]: iterate the recursion
/// stage by stage.
pub fn phi_recursive(p: &PhiInputs) -> Result<f64> {
    p.validate()?;
    let mut lp = p.lp_jt;
    let mut mu = p.mu_jt;
    for _ in p.t..p.big_t {
        lp = recurse_once(lp, p.lp_gu, p.lp_gx);
        mu = recurse_once(mu, p.mu_gu, p.mu_gx);
    }
    Ok(lp / mu)
}

/// φ at t = 0; `gamma^(d·T)` bounds the expected amplitude-amplification
/// rounds of the simulated pipeline.
pub fn gamma(p: &PhiInputs) -> Result<f64> {
    let mut q = p.clone();
    q.t = 0;
    phi_closed_form(&q)
}

/// Cross-check of the two φ implementations; a relative gap above 1e-6
/// is surfaced as a diagnostic string rather than an error.
pub fn phi_with_check(p: &PhiInputs) -> Result<(f64, Option<String>)> {
    let closed = phi_closed_form(p)?;
    let rec = phi_recursive(p)?;
    let rel = (closed - rec).abs() / rec.abs().max(1e-300);
    let diag = (rel > 1e-6).then(|| {
        format!("phi implementations disagree: closed {closed} vs recursive {rec} (rel {rel:.3e})")
    });
    Ok((closed, diag))
}
