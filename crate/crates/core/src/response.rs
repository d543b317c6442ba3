//! Linear response of a gapped cluster to slow driving: equivalent
//! response-coefficient formulas (resolvent, curvature, eigenstate sum),
//! current expectations along driven dynamics, and Chern numbers on a
//! parameter torus via plaquette fluxes.

use crate::adiabatic::matrix_derivative;
use crate::linalg::{adjoint, commutator, det, trace};
use crate::spectral::{ClusterSelector, SpectralData};
use crate::{C64, CMat, Error, Result};

/// Normalized state supported on the cluster: P/q.
pub fn parallel_state(data: &SpectralData) -> CMat {
    let q = data.cluster_size() as f64;
    data.projector().mapv(|z| z / q)
}

/// Current expectation per volume: Re tr(ρ J) / |Λ|.
pub fn current_expectation(rho: &CMat, j: &CMat, volume: f64) -> f64 {
    trace(&rho.dot(j)).re / volume
}

/// Response coefficient in resolvent form:
/// (i/|Λ|) tr(ρ_∥ (J R Ṗ − Ṗ R J)).
pub fn response_resolvent(
    data: &SpectralData,
    j: &CMat,
    pdot: &CMat,
    volume: f64,
    e_ref: Option<f64>,
) -> Result<f64> {
    check_volume(volume)?;
    let r = data.reduced_resolvent(e_ref)?;
    let rho = parallel_state(data);
    let m = j.dot(&r).dot(pdot) - pdot.dot(&r).dot(j);
    Ok((trace(&rho.dot(&m)) * C64::new(0.0, 1.0)).re / volume)
}

/// Response coefficient in curvature form: (i/|Λ|) tr(ρ_∥ [Ṗ, ∂_αP]),
/// where ∂_αP is the projector derivative along the driven perturbation.
pub fn response_curvature(
    data: &SpectralData,
    pdot: &CMat,
    dp_dalpha: &CMat,
    volume: f64,
) -> Result<f64> {
    check_volume(volume)?;
    let rho = parallel_state(data);
    Ok((trace(&rho.dot(&commutator(pdot, dp_dalpha))) * C64::new(0.0, 1.0)).re / volume)
}

/// Response coefficient as an explicit eigenstate sum, valid for a simple
/// (non-degenerate) cluster: (2/|Λ|) Σ_{n≠0} Im(J_{0n} Ḣ_{n0}) / (E_n − E_0)².
pub fn response_eigensum(
    data: &SpectralData,
    j: &CMat,
    hdot: &CMat,
    volume: f64,
) -> Result<f64> {
    check_volume(volume)?;
    if data.cluster_size() != 1 {
        return Err(Error::Unsupported(
            "eigenstate-sum response needs a non-degenerate cluster".into(),
        ));
    }
    let g = data.cluster[0];
    let je = data.to_eigenbasis(j);
    let he = data.to_eigenbasis(hdot);
    let eg = data.values[g];
    let mut sum = 0.0;
    for n in 0..data.dim() {
        if n == g {
            continue;
        }
        let de = data.values[n] - eg;
        sum += (je[[g, n]] * he[[n, g]]).im / (de * de);
    }
    Ok(2.0 * sum / volume)
}

/// Response read off the driven state: Re tr(Uρ₀U* J) / (ε |Λ|).
pub fn driven_response(u: &CMat, rho0: &CMat, j: &CMat, eps: f64, volume: f64) -> f64 {
    let rho = u.dot(rho0).dot(&adjoint(u));
    current_expectation(&rho, j, volume) / eps
}

/// Projector of the selected cluster differentiated along a parameter,
/// by Richardson-extrapolated central differences at parameter value 0.
/// Projectors carry no gauge, so the differences are well defined.
pub fn projector_gradient(
    h_at: &dyn Fn(f64) -> Result<CMat>,
    selector: &ClusterSelector,
    eta: Option<f64>,
    fd_step: Option<f64>,
) -> Result<CMat> {
    let step = fd_step.unwrap_or(1e-4);
    if step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut p_at =
        |a: f64| -> Result<CMat> { Ok(SpectralData::new(&h_at(a)?, selector, eta)?.projector()) };
    matrix_derivative(0.0, step, &mut p_at)
}

/// Chern number from a periodic grid of cluster frames: the sum of
/// plaquette fluxes arg det(M₁M₂M₃M₄) over the torus, divided by 2π.
/// Frames are (dim × κ) column-orthonormal; `frames[i][j]` lives at grid
/// node (i, j) and neighbors wrap.
pub fn chern_from_frames(frames: &[Vec<CMat>]) -> Result<f64> {
    let n1 = frames.len();
    if n1 < 2 || frames.iter().any(|row| row.len() != frames[0].len()) {
        return Err(Error::InvalidArgument(
            "frame grid must be rectangular with at least 2 nodes per direction".into(),
        ));
    }
    let n2 = frames[0].len();
    if n2 < 2 {
        return Err(Error::InvalidArgument(
            "frame grid must be rectangular with at least 2 nodes per direction".into(),
        ));
    }
    let shape = frames[0][0].dim();
    if frames.iter().flatten().any(|f| f.dim() != shape) {
        return Err(Error::InvalidArgument(
            "all frames must have the same shape".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let f00 = &frames[i][j];
            let f10 = &frames[(i + 1) % n1][j];
            let f11 = &frames[(i + 1) % n1][(j + 1) % n2];
            let f01 = &frames[i][(j + 1) % n2];
            let loop_overlap = adjoint(f00)
                .dot(f10)
                .dot(&adjoint(f10).dot(f11))
                .dot(&adjoint(f11).dot(f01))
                .dot(&adjoint(f01).dot(f00));
            let d = det(&loop_overlap)?;
            if d.norm() < 1e-12 {
                return Err(Error::ConvergenceFailure(format!(
                    "vanishing plaquette overlap at node ({i}, {j}); grid too coarse or gap closing"
                )));
            }
            total += d.arg();
        }
    }
    Ok(total / std::f64::consts::TAU)
}

/// Chern number of the selected cluster for a family over the 2π-periodic
/// parameter torus, sampled on an n_g × n_g grid.
pub fn chern_from_family(
    h: &dyn Fn(f64, f64) -> Result<CMat>,
    selector: &ClusterSelector,
    eta: Option<f64>,
    n_g: usize,
) -> Result<f64> {
    if n_g < 2 {
        return Err(Error::InvalidArgument(format!(
            "parameter grid needs at least 2 nodes per direction, got {n_g}"
        )));
    }
    let tau = std::f64::consts::TAU;
    let mut frames: Vec<Vec<CMat>> = Vec::with_capacity(n_g);
    let mut kappa: Option<usize> = None;
    for i in 0..n_g {
        let mut row = Vec::with_capacity(n_g);
        for j in 0..n_g {
            let b1 = tau * i as f64 / n_g as f64;
            let b2 = tau * j as f64 / n_g as f64;
            let data = SpectralData::new(&h(b1, b2)?, selector, eta)?;
            match kappa {
                None => kappa = Some(data.cluster_size()),
                Some(k) if k != data.cluster_size() => {
                    return Err(Error::GapClosed {
                        t: None,
                        gap: data.gap,
                        min: 0.0,
                        spectrum: data.values.clone(),
                    });
                }
                _ => {}
            }
            row.push(data.cluster_frame());
        }
        frames.push(row);
    }
    chern_from_frames(&frames)
}

fn check_volume(volume: f64) -> Result<()> {
    if !(volume > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "volume must be positive, got {volume}"
        )));
    }
    Ok(())
}
