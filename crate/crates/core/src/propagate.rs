//! Time evolution for slowly driven Hermitian generators: smooth switching
//! profiles and an adaptive fourth-order Magnus integrator for
//! iσ ∂_t U = G(t) U.

use crate::linalg::{expi_hermitian, max_abs};
use crate::{C64, CMat, Error, Result};

/// Smooth ramp from 0 at s=0 to 1 at s=1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Switch {
    /// C∞ profile e^{-1/s}/(e^{-1/s} + e^{-1/(1-s)}); every derivative
    /// vanishes at both endpoints.
    FlatExp,
    /// Quintic smoothstep 6s⁵ − 15s⁴ + 10s³; C² at the endpoints.
    Smoothstep,
}

impl Switch {
    /// Value and first two derivatives at `s`, clamped outside [0, 1].
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match self {
            Switch::FlatExp => {
                // Guard the endpoint regions: u or v underflows there and
                // the 1/s powers blow up, producing 0·inf.
                if s < 1e-3 {
                    return (0.0, 0.0, 0.0);
                }
                if s > 1.0 - 1e-3 {
                    return (1.0, 0.0, 0.0);
                }
                let r = 1.0 - s;
                let u = (-1.0 / s).exp();
                let v = (-1.0 / r).exp();
                let du = u / (s * s);
                let dv = -v / (r * r);
                let ddu = u * (1.0 / s.powi(4) - 2.0 / s.powi(3));
                let ddv = v * (1.0 / r.powi(4) - 2.0 / r.powi(3));
                let w = u + v;
                let f = u / w;
                let num = du * v - u * dv;
                let df = num / (w * w);
                let ddf = (ddu * v - u * ddv) / (w * w) - 2.0 * num * (du + dv) / (w * w * w);
                (f, df, ddf)
            }
            Switch::Smoothstep => {
                if s <= 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                if s >= 1.0 {
                    return (1.0, 0.0, 0.0);
                }
                let f = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
                let df = 30.0 * s * s * (1.0 - s) * (1.0 - s);
                let ddf = 60.0 * s * (2.0 * s - 1.0) * (s - 1.0);
                (f, df, ddf)
            }
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }
}

/// Accuracy knobs for `evolve`.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Global accuracy target; the local error allowance per step is
    /// tol · h / (t1 − t0).
    pub tol: f64,
    /// Maximum halvings of one step before giving up.
    pub max_halvings: u32,
    /// Starting step; defaults to (t1 − t0)/16.
    pub initial_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tol: 1e-8,
            max_halvings: 40,
            initial_step: None,
        }
    }
}

/// Propagator U(t1, t0) of iσ ∂_t U = G(t) U, U(t0, t0) = 1, by the
/// fourth-order Magnus rule on two-point Gauss nodes with adaptive step
/// doubling. The step error is estimated against two half-steps and the
/// half-step result is kept. Backward evolution is the adjoint of the
/// forward propagator.
pub fn evolve(
    g: &dyn Fn(f64) -> Result<CMat>,
    sigma: f64,
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
) -> Result<CMat> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "evolution scale must be positive, got {sigma}"
        )));
    }
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!(
            "backward evolution requested ({t1} < {t0}); take the adjoint of the forward propagator"
        )));
    }
    let probe = g(t0)?;
    let n = probe.nrows();
    if probe.ncols() != n {
        return Err(Error::InvalidArgument("generator must be square".into()));
    }
    let mut u = crate::linalg::identity(n);
    let total = t1 - t0;
    if total == 0.0 {
        return Ok(u);
    }
    let mut t = t0;
    let mut h = ctrl.initial_step.unwrap_or(total / 16.0).min(total);
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("initial step must be positive".into()));
    }
    const GAUSS: f64 = 0.288675134594812882; // √3/6
    let step = |tl: f64, hh: f64| -> Result<CMat> {
        let g1 = g(tl + (0.5 - GAUSS) * hh)?;
        let g2 = g(tl + (0.5 + GAUSS) * hh)?;
        // exp(−i[(h/2σ)(G₁+G₂) − (√3h²/12σ²)·i[G₂,G₁]])
        let sum = (&g1 + &g2).mapv(|z| z * (0.5 * hh / sigma));
        let corr = crate::linalg::commutator(&g2, &g1)
            .mapv(|z| z * C64::new(0.0, -3f64.sqrt() * hh * hh / (12.0 * sigma * sigma)));
        expi_hermitian(&(sum + corr), -1.0)
    };
    while t < t1 {
        h = h.min(t1 - t);
        let mut halvings = 0u32;
        loop {
            let coarse = step(t, h)?;
            let first = step(t, 0.5 * h)?;
            let second = step(t + 0.5 * h, 0.5 * h)?;
            let fine = second.dot(&first);
            let err = max_abs(&(&coarse - &fine));
            let allowance = ctrl.tol * h / total;
            if err <= allowance {
                u = fine.dot(&u);
                t += h;
                let grow = if err > 0.0 {
                    (0.9 * (allowance / err).powf(0.2)).clamp(0.5, 2.0)
                } else {
                    2.0
                };
                h *= grow;
                break;
            }
            halvings += 1;
            if halvings > ctrl.max_halvings {
                return Err(Error::ConvergenceFailure(format!(
                    "step at t={t} rejected after {halvings} halvings (error {err:.3e})"
                )));
            }
            h *= 0.5;
        }
    }
    Ok(u)
}

/// Propagators U(tᵢ, t₀) at each time of an ascending grid.
pub fn evolve_times(
    g: &dyn Fn(f64) -> Result<CMat>,
    sigma: f64,
    times: &[f64],
    ctrl: &StepControl,
) -> Result<Vec<CMat>> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be ascending".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let probe = g(times[0])?;
    let mut u = crate::linalg::identity(probe.nrows());
    out.push(u.clone());
    for w in times.windows(2) {
        let seg = evolve(g, sigma, w[0], w[1], ctrl)?;
        u = seg.dot(&u);
        out.push(u.clone());
    }
    Ok(out)
}
