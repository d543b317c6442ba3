//! Light-cone and volume bounds: the commutator estimate for evolved local
//! observables with its velocity, measured against direct Heisenberg
//! propagation, and operator-norm growth of localization-restricted
//! interactions against the expected volume factor.

use crate::fock::{FockSector, Ladder};
use crate::interaction::Interaction;
use crate::lattice::{decay_weights, norm_f_gamma_default, DecayFunction, LocalizationPlane};
use crate::linalg::{adjoint, commutator, eigh, op_norm};
use crate::{C64, CMat, Error, Result};
use std::collections::BTreeSet;

/// Propagation speed 2^{2d+2}·‖F‖_Γ·‖Φ‖_{a,0}/a extracted from the
/// commutator bound for exponentially decaying interactions.
pub fn lr_velocity(phi: &Interaction, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decay rate must be positive, got {a}"
        )));
    }
    let d = phi.lattice().d();
    let zeta = DecayFunction::exponential(a)?;
    let plane = LocalizationPlane::trivial(d);
    let norm = phi.norm(&zeta, 0, &plane)?;
    Ok(2f64.powi(2 * d as i32 + 2) * norm_f_gamma_default(d) * norm / a)
}

/// Operator norm of an interaction on the full Fock space. Pure hopping
/// plus potentials (every word a single a†a) has the exact closed form
/// max(Σλ⁺, −Σλ⁻) over one-body eigenvalues; anything else is swept over
/// particle-number sectors, which is feasible only for small mode counts.
pub fn fock_norm(phi: &Interaction) -> Result<f64> {
    let n_modes = phi.lattice().n_sites() * phi.internal_dim();
    let mut one_body = CMat::zeros((n_modes, n_modes));
    let mut quadratic = true;
    'scan: for term in phi.terms() {
        for w in term.words() {
            match w.ops.as_slice() {
                [(Ladder::Create, m), (Ladder::Annihilate, n)] => {
                    one_body[[*m, *n]] += w.coeff;
                }
                _ => {
                    quadratic = false;
                    break 'scan;
                }
            }
        }
    }
    if quadratic {
        let (vals, _) = eigh(&one_body)?;
        let pos: f64 = vals.iter().filter(|v| **v > 0.0).sum();
        let neg: f64 = vals.iter().filter(|v| **v < 0.0).sum();
        return Ok(pos.max(-neg));
    }
    if n_modes > 12 {
        return Err(Error::Unsupported(format!(
            "{n_modes} modes: full Fock norm of a non-quadratic interaction needs a sector sweep, feasible only up to 12 modes"
        )));
    }
    let mut best = 0.0f64;
    for n in 0..=n_modes {
        let sector = FockSector::new(phi.lattice().clone(), phi.internal_dim(), n)?;
        let op = phi.assemble(&sector)?;
        best = best.max(op_norm(&op.matrix));
    }
    Ok(best)
}

/// One sampled time of the commutator check.
#[derive(Debug, Clone)]
pub struct LRSample {
    pub t: f64,
    /// ‖[u_t(A), B]‖ over the full Fock space.
    pub lhs: f64,
    /// Bound with the min{|X|,|Y|}·ζ(d(X,Y)) simplification.
    pub rhs: f64,
    /// Bound with the boundary double sum Σ_{x∈∂_ΦX}Σ_{y∈Y} F_ζ(d(x,y)).
    pub rhs_sharp: f64,
    pub margin: f64,
    pub margin_sharp: f64,
}

/// Commutator-bound measurement for two local observables.
#[derive(Debug, Clone)]
pub struct LRReport {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Torus distance between the supports.
    pub distance: u64,
    pub min_size: usize,
    /// Σ_{x∈∂_ΦX}Σ_{y∈Y} F_ζ(d(x,y)) computed from the term list.
    pub boundary_sum: f64,
    pub phi_norm: f64,
    pub a_norm: f64,
    pub b_norm: f64,
    /// Exponential growth rate 2^{2d+2}‖F‖_Γ‖Φ‖_{ζ,0} of the bound.
    pub exponent_rate: f64,
    /// Velocity for exponential ζ (rate / decay rate); None for tabulated ζ.
    pub velocity: Option<f64>,
    pub samples: Vec<LRSample>,
    pub min_margin: f64,
}

fn union_support(obs: &Interaction) -> Vec<usize> {
    let set: BTreeSet<usize> = obs
        .terms()
        .iter()
        .flat_map(|t| t.support().iter().copied())
        .collect();
    set.into_iter().collect()
}

/// Measures ‖[u_t(A), B]‖ under the Heisenberg dynamics of `phi` at
/// macroscopic scaling against the commutator bound, sample by sample.
/// A and B must be supported on disjoint site sets; conserving particle
/// number makes them even. The dynamics, A, and B are assembled per
/// particle-number sector and the norms maximized over sectors.
pub fn lr_check(
    phi: &Interaction,
    a: &Interaction,
    b: &Interaction,
    times: &[f64],
    zeta: &DecayFunction,
) -> Result<LRReport> {
    for obs in [a, b] {
        if obs.lattice() != phi.lattice() || obs.internal_dim() != phi.internal_dim() {
            return Err(Error::InvalidArgument(
                "observables must live on the interaction's lattice".into(),
            ));
        }
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument("no sample times given".into()));
    }
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "sample times must be non-negative".into(),
        ));
    }
    let x = union_support(a);
    let y = union_support(b);
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "observables must have non-empty support".into(),
        ));
    }
    let x_set: BTreeSet<usize> = x.iter().copied().collect();
    if y.iter().any(|s| x_set.contains(s)) {
        return Err(Error::InvalidArgument(
            "observable supports overlap; the commutator bound needs disjoint sets".into(),
        ));
    }

    let lattice = phi.lattice();
    let d = lattice.d();
    let f_gamma = norm_f_gamma_default(d);
    let plane = LocalizationPlane::trivial(d);
    let phi_norm = phi.norm(zeta, 0, &plane)?;
    let a_norm = fock_norm(a)?;
    let b_norm = fock_norm(b)?;
    let exponent_rate = 2f64.powi(2 * d as i32 + 2) * f_gamma * phi_norm;
    let velocity = match zeta {
        DecayFunction::Exponential { rate } => Some(exponent_rate / rate),
        DecayFunction::Tabulated { .. } => None,
    };

    let distance = x
        .iter()
        .flat_map(|&i| y.iter().map(move |&j| (i, j)))
        .map(|(i, j)| lattice.distance_idx(i, j))
        .min()
        .unwrap();
    let min_size = x.len().min(y.len());

    // Φ-boundary of X: sites of X belonging to a term that sticks out.
    let boundary: BTreeSet<usize> = phi
        .terms()
        .iter()
        .filter(|t| {
            let sup = t.support();
            sup.iter().any(|s| x_set.contains(s)) && sup.iter().any(|s| !x_set.contains(s))
        })
        .flat_map(|t| t.support().iter().copied().filter(|s| x_set.contains(s)))
        .collect();
    let boundary_sum: f64 = boundary
        .iter()
        .flat_map(|&i| y.iter().map(move |&j| (i, j)))
        .map(|(i, j)| decay_weights(lattice.distance_idx(i, j), d, zeta).1)
        .sum();

    let zeta_dist = zeta.eval(distance);
    let dim_factor = 2f64.powi(-2 * (d as i32));
    // 2^{−2d}‖A‖‖B‖(e^{rate·t}−1)·min{|X|,|Y|}·ζ(d(X,Y))
    let rhs_at = |t: f64| {
        dim_factor * a_norm * b_norm * (exponent_rate * t).exp_m1() * min_size as f64 * zeta_dist
    };
    // the same prefactors with the boundary double sum in place of
    // ‖F‖_Γ·min{|X|,|Y|}·ζ(d(X,Y))
    let sharp_at = |t: f64| {
        dim_factor / f_gamma * a_norm * b_norm * (exponent_rate * t).exp_m1() * boundary_sum
    };

    // Heisenberg LHS per particle-number sector, maximized over sectors.
    let n_modes = lattice.n_sites() * phi.internal_dim();
    let mut lhs = vec![0.0f64; times.len()];
    for n in 0..=n_modes {
        let sector = FockSector::new(lattice.clone(), phi.internal_dim(), n)?;
        let h = phi.assemble(&sector)?.matrix;
        let a_mat = a.assemble(&sector)?.matrix;
        let b_mat = b.assemble(&sector)?.matrix;
        let (evals, vecs) = eigh(&h)?;
        let vecs_h = adjoint(&vecs);
        for (k, &t) in times.iter().enumerate() {
            let phase =
                CMat::from_diag(&ndarray::Array1::from_iter(evals.iter().map(|&e| {
                    C64::from_polar(1.0, -e * t)
                })));
            let u = vecs.dot(&phase).dot(&vecs_h);
            let a_t = u.dot(&a_mat).dot(&adjoint(&u));
            lhs[k] = lhs[k].max(op_norm(&commutator(&a_t, &b_mat)));
        }
    }

    let samples: Vec<LRSample> = times
        .iter()
        .zip(&lhs)
        .map(|(&t, &l)| {
            let rhs = rhs_at(t);
            let rhs_sharp = sharp_at(t);
            LRSample {
                t,
                lhs: l,
                rhs,
                rhs_sharp,
                margin: rhs - l,
                margin_sharp: rhs_sharp - l,
            }
        })
        .collect();
    let min_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(LRReport {
        x,
        y,
        distance,
        min_size,
        boundary_sum,
        phi_norm,
        a_norm,
        b_norm,
        exponent_rate,
        velocity,
        samples,
        min_margin,
    })
}

/// One lattice size of the norm-volume table.
#[derive(Debug, Clone)]
pub struct NormVolumeRow {
    pub m: i64,
    pub operator_norm: f64,
    pub phi_norm: f64,
    /// M^{d−|ℓ|} for the row's localization plane.
    pub volume_factor: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct NormVolumeReport {
    pub rows: Vec<NormVolumeRow>,
    pub max_ratio: f64,
}

/// Ratio table ‖A^Λ‖ / (‖Φ‖_{ζ,0,L} · M^{d−|ℓ|}) across lattice sizes;
/// boundedness of the ratio is the volume-growth estimate.
pub fn norm_volume_check(
    items: &[(Interaction, LocalizationPlane)],
    zeta: &DecayFunction,
) -> Result<NormVolumeReport> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty model list".into()));
    }
    let mut rows = Vec::with_capacity(items.len());
    for (phi, plane) in items {
        let d = phi.lattice().d();
        if plane.ell.len() != d {
            return Err(Error::InvalidArgument(
                "localization plane dimension does not match the lattice".into(),
            ));
        }
        let m = phi.lattice().m();
        let operator_norm = fock_norm(phi)?;
        let phi_norm = phi.norm(zeta, 0, plane)?;
        let volume_factor = (m as f64).powi((d - plane.n_constrained()) as i32);
        let denom = phi_norm * volume_factor;
        let ratio = if operator_norm == 0.0 {
            0.0
        } else {
            operator_norm / denom
        };
        rows.push(NormVolumeRow {
            m,
            operator_norm,
            phi_norm,
            volume_factor,
            ratio,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    Ok(NormVolumeReport { rows, max_ratio })
}
