//! Adiabatic perturbation theory around a gapped spectral cluster: the
//! parallel-transport generator, the order-1 and order-2 superadiabatic
//! coefficients, the dressed frame, and the defect operator measuring how
//! far the dressed evolution is from solving the true Schrödinger equation.

use crate::linalg::{commutator, expi_hermitian, identity, op_norm};
use crate::spectral::{
    inverse_liouvillian, liouvillian, offdiagonal_part, ClusterSelector, InverseMode, SpectralData,
};
use crate::{C64, CMat, Result};

fn icomm(a: &CMat, b: &CMat) -> CMat {
    commutator(a, b).mapv(|z| z * C64::new(0.0, 1.0))
}

/// First-order adiabatic data at a single time: spectral cluster, projector
/// motion, parallel-transport generator, and the order-1 superadiabatic
/// coefficient with its effective correction.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub data: SpectralData,
    pub h: CMat,
    pub hdot: CMat,
    /// Cluster projector P.
    pub p: CMat,
    /// Projector derivative induced by `hdot`.
    pub pdot: CMat,
    /// i[Ṗ, P]; generates parallel transport of P.
    pub k_parallel: CMat,
    /// Order-1 coefficient I(I(Ḣ)) of the dressing generator.
    pub a1: CMat,
    /// Effective order-1 correction i[H, A₁]. Coincides with `k_parallel`
    /// in exact-blockwise mode; differs inside the far block when filtered.
    pub k1: CMat,
    pub mode: InverseMode,
}

/// Builds the first-order adiabatic data for `h` with cluster `selector`.
pub fn first_order(
    h: &CMat,
    hdot: &CMat,
    selector: &ClusterSelector,
    eta: Option<f64>,
    mode: &InverseMode,
) -> Result<FirstOrder> {
    let data = SpectralData::new(h, selector, eta)?;
    let p = data.projector();
    let pdot = data.projector_derivative(hdot);
    let k_parallel = icomm(&pdot, &p);
    let ihdot = inverse_liouvillian(&data, hdot, mode)?;
    let a1 = inverse_liouvillian(&data, &ihdot, mode)?;
    let k1 = icomm(h, &a1);
    Ok(FirstOrder {
        data,
        h: h.clone(),
        hdot: hdot.clone(),
        p,
        pdot,
        k_parallel,
        a1,
        k1,
        mode: mode.clone(),
    })
}

/// Order-2 superadiabatic expansion at one time. The dressing generator is
/// S(ε) = A₁ + εA₂ and the effective correction K(ε) = K₁ + εK₂; both K's
/// commute with the cluster projector blockwise, so the corrected dynamics
/// transports the cluster exactly.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub first: FirstOrder,
    /// Time derivative of A₁ (Richardson-extrapolated central difference).
    pub a1_dot: CMat,
    /// −½[A₁, [A₁, H]].
    pub l2: CMat,
    /// −Ȧ₁.
    pub q2: CMat,
    /// Order-2 coefficient I(L₂ − Q₂).
    pub a2: CMat,
    /// Effective order-2 correction L₂ − Q₂ − ℒ(A₂).
    pub k2: CMat,
}

impl Expansion {
    /// Dressing generator S(ε) = A₁ + εA₂.
    pub fn s(&self, eps: f64) -> CMat {
        &self.first.a1 + &self.a2.mapv(|z| z * eps)
    }

    /// Effective correction K(ε) = K₁ + εK₂.
    pub fn k(&self, eps: f64) -> CMat {
        &self.first.k1 + &self.k2.mapv(|z| z * eps)
    }

    /// Dressed frame V(ε) = exp(iεS(ε)).
    pub fn frame(&self, eps: f64) -> Result<CMat> {
        expi_hermitian(&self.s(eps), eps)
    }

    /// Generator H + εK₁ + ε²K₂ of the effective evolution.
    pub fn generator(&self, eps: f64) -> CMat {
        &self.first.h + &self.first.k1.mapv(|z| z * eps) + &self.k2.mapv(|z| z * (eps * eps))
    }

    /// Dressed projector V P V*.
    pub fn dressed_projector(&self, eps: f64) -> Result<CMat> {
        let v = self.frame(eps)?;
        Ok(v.dot(&self.first.p).dot(&v.t().mapv(|z| z.conj())))
    }
}

/// Richardson-extrapolated central difference of a matrix-valued map.
pub(crate) fn matrix_derivative(
    t: f64,
    step: f64,
    f: &mut dyn FnMut(f64) -> Result<CMat>,
) -> Result<CMat> {
    let central = |h: f64, f: &mut dyn FnMut(f64) -> Result<CMat>| -> Result<CMat> {
        let plus = f(t + h)?;
        let minus = f(t - h)?;
        Ok((&plus - &minus).mapv(|z| z / (2.0 * h)))
    };
    let coarse = central(step, f)?;
    let fine = central(0.5 * step, f)?;
    // (4 D(h/2) − D(h)) / 3 cancels the O(h²) error term.
    Ok((fine.mapv(|z| z * 4.0) - coarse).mapv(|z| z / 3.0))
}

/// Builds the order-2 expansion at time `t` for the family `h_fn` with
/// derivative `hdot_fn`. `fd_step` is the stencil width for Ȧ₁.
pub fn expansion_order2(
    h_fn: &dyn Fn(f64) -> Result<CMat>,
    hdot_fn: &dyn Fn(f64) -> Result<CMat>,
    t: f64,
    selector: &ClusterSelector,
    eta: Option<f64>,
    mode: &InverseMode,
    fd_step: f64,
) -> Result<Expansion> {
    if fd_step <= 0.0 {
        return Err(crate::Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let first = first_order(&h_fn(t)?, &hdot_fn(t)?, selector, eta, mode)?;
    let mut a1_at = |s: f64| -> Result<CMat> {
        Ok(first_order(&h_fn(s)?, &hdot_fn(s)?, selector, eta, mode)?.a1)
    };
    let a1_dot = matrix_derivative(t, fd_step, &mut a1_at)?;
    let l2 = commutator(&first.a1, &commutator(&first.a1, &first.h)).mapv(|z| z * -0.5);
    let q2 = a1_dot.mapv(|z| -z);
    let source = &l2 - &q2;
    let a2 = inverse_liouvillian(&first.data, &source, mode)?;
    let k2 = &source - &liouvillian(&first.h, &a2);
    Ok(Expansion {
        first,
        a1_dot,
        l2,
        q2,
        a2,
        k2,
    })
}

/// Residual generator of the dressed evolution: with V = exp(iεS) and
/// K = K₁ + εK₂, the dressed propagator V·U_eff solves the Schrödinger
/// equation for H up to V(iεV*V̇ + H − V*HV + εK)V*. Returns the inner
/// bracket, whose operator norm equals the defect norm.
pub fn defect_operator(
    h_fn: &dyn Fn(f64) -> Result<CMat>,
    hdot_fn: &dyn Fn(f64) -> Result<CMat>,
    t: f64,
    eps: f64,
    selector: &ClusterSelector,
    eta: Option<f64>,
    mode: &InverseMode,
    fd_step: f64,
) -> Result<CMat> {
    let expansion = expansion_order2(h_fn, hdot_fn, t, selector, eta, mode, fd_step)?;
    let h = expansion.first.h.clone();
    let k = expansion.k(eps);
    let v = expansion.frame(eps)?;
    let vs = v.t().mapv(|z| z.conj());
    let mut frame_at = |s: f64| -> Result<CMat> {
        expansion_order2(h_fn, hdot_fn, s, selector, eta, mode, fd_step)?.frame(eps)
    };
    let vdot = matrix_derivative(t, fd_step, &mut frame_at)?;
    let transported = vs.dot(&h).dot(&v);
    let twist = vs.dot(&vdot).mapv(|z| z * C64::new(0.0, eps));
    Ok(&twist + &h - &transported + &k.mapv(|z| z * eps))
}

/// Operator norm of the defect; decays as ε³ for smooth gapped families.
pub fn superadiabatic_defect(
    h_fn: &dyn Fn(f64) -> Result<CMat>,
    hdot_fn: &dyn Fn(f64) -> Result<CMat>,
    t: f64,
    eps: f64,
    selector: &ClusterSelector,
    eta: Option<f64>,
    mode: &InverseMode,
    fd_step: f64,
) -> Result<f64> {
    Ok(op_norm(&defect_operator(
        h_fn, hdot_fn, t, eps, selector, eta, mode, fd_step,
    )?))
}

/// Order-1 coefficient from projector motion: PṖR + RṖP. Agrees with
/// `FirstOrder::a1` for width-zero clusters in exact-blockwise mode.
pub fn a1_from_pdot(data: &SpectralData, pdot: &CMat, e_ref: Option<f64>) -> Result<CMat> {
    let p = data.projector();
    let r = data.reduced_resolvent(e_ref)?;
    Ok(p.dot(pdot).dot(&r) + r.dot(pdot).dot(&p))
}

/// The same coefficient written through the squared resolvent:
/// −(R²Ḣ_od + Ḣ_od R²).
pub fn a1_from_hdot(data: &SpectralData, hdot: &CMat, e_ref: Option<f64>) -> Result<CMat> {
    let r = data.reduced_resolvent(e_ref)?;
    let r2 = r.dot(&r);
    let hod = offdiagonal_part(data, hdot);
    Ok((r2.dot(&hod) + hod.dot(&r2)).mapv(|z| -z))
}

/// Block part of the order-2 correction in the parallel-transport frame:
/// PṖRṖP. Positive semidefinite for ground clusters.
pub fn k2_parallel(data: &SpectralData, pdot: &CMat, e_ref: Option<f64>) -> Result<CMat> {
    let p = data.projector();
    let r = data.reduced_resolvent(e_ref)?;
    Ok(p.dot(pdot).dot(&r).dot(pdot).dot(&p))
}

/// The same block through the double commutator: −½P[Ã₁, [Ã₁, H − e_ref]]P
/// with Ã₁ = PṖR + RṖP.
pub fn k2_parallel_commutator(
    data: &SpectralData,
    h: &CMat,
    pdot: &CMat,
    e_ref: Option<f64>,
) -> Result<CMat> {
    let a_tilde = a1_from_pdot(data, pdot, e_ref)?;
    let p = data.projector();
    let shift = e_ref.unwrap_or_else(|| data.e_cluster());
    let h_shifted = h - &identity(data.dim()).mapv(|z| z * shift);
    let inner = commutator(&a_tilde, &commutator(&a_tilde, &h_shifted));
    Ok(p.dot(&inner).dot(&p).mapv(|z| z * -0.5))
}
