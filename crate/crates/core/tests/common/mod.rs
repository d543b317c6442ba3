//! Shared fixtures for the integration suite: random matrices with planted
//! spectra, and the small driven lattice families the acceptance checks run.

#![allow(dead_code)]

use adiflow::fock::FockSector;
use adiflow::interaction::{build_tvw_scalar, Interaction};
use adiflow::lattice::TorusLattice;
use adiflow::propagate::Switch;
use adiflow::{C64, CMat, Result};
use ndarray::{array, Array1};
use ndarray_linalg::QR;
use rand::Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_complex<R: Rng>(rng: &mut R) -> C64 {
    // Box-Muller for roughly Gaussian entries
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    C64::new(r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin())
}

pub fn random_matrix<R: Rng>(n: usize, rng: &mut R) -> CMat {
    CMat::from_shape_fn((n, n), |_| random_complex(rng))
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    (&a + &adiflow::linalg::adjoint(&a)) * C64::new(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    let (q, r) = a.qr().unwrap();
    // fix the phase convention so the distribution is not skewed by QR
    let mut q = q;
    for (j, col) in q.columns_mut().into_iter().enumerate() {
        let d = r[[j, j]];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for z in col {
                *z *= phase;
            }
        }
    }
    q
}

/// Hermitian matrix with a planted spectral cluster: `n_low` eigenvalues
/// spread over [0, width], the rest starting at width + gap.
pub fn random_gapped<R: Rng>(
    n: usize,
    n_low: usize,
    width: f64,
    gap: f64,
    rng: &mut R,
) -> (CMat, Vec<f64>) {
    assert!(n_low >= 1 && n_low < n);
    let mut vals: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n_low {
        if i == 0 {
            vals.push(0.0);
        } else {
            vals.push(rng.random::<f64>() * width);
        }
    }
    for i in 0..n - n_low {
        if i == 0 {
            vals.push(width + gap);
        } else {
            vals.push(width + gap + rng.random::<f64>() * 3.0);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let u = random_unitary(n, rng);
    let lam = CMat::from_diag(&vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Array1<_>>());
    let h = u.dot(&lam).dot(&adiflow::linalg::adjoint(&u));
    ((&h + &adiflow::linalg::adjoint(&h)) * C64::new(0.5, 0.0), vals)
}

pub fn stagger(x: &[i64]) -> f64 {
    if x[0].rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn no_bias(_: &[i64]) -> f64 {
    0.0
}

/// Half-filled fermion chain with a staggered on-site potential whose
/// amplitude is ramped by a flat switch, plus an optional ramped site bias:
///   V(t, x) = (v_base + v_amp·f(t))·(−1)^x + f(t)·bias(x).
/// Hopping and the nearest-neighbour repulsion stay constant, so the family
/// is affine in the switch value. A complex hopping phase threads flux
/// through the ring; with a real Hamiltonian and a real observable the
/// first-order adiabatic response is an imaginary part of a real number and
/// vanishes identically, so the scaling checks need the flux to see it.
pub struct ChainFamily {
    pub lattice: TorusLattice,
    pub sector: FockSector,
    pub hop: C64,
    pub v_base: f64,
    pub v_amp: f64,
    pub w: f64,
    pub bias: fn(&[i64]) -> f64,
    pub ramp: Switch,
}

impl ChainFamily {
    pub fn new(m: i64, n_particles: usize, hop: C64, v_base: f64, v_amp: f64, w: f64) -> Self {
        let lattice = TorusLattice::new(1, m).unwrap();
        let sector = FockSector::new(lattice.clone(), 1, n_particles).unwrap();
        ChainFamily {
            lattice,
            sector,
            hop,
            v_base,
            v_amp,
            w,
            bias: no_bias,
            ramp: Switch::FlatExp,
        }
    }

    pub fn with_bias(mut self, bias: fn(&[i64]) -> f64) -> Self {
        self.bias = bias;
        self
    }

    fn pairs(&self) -> Vec<(Vec<i64>, f64)> {
        if self.w != 0.0 {
            vec![(vec![1], self.w)]
        } else {
            Vec::new()
        }
    }

    pub fn interaction(&self, t: f64) -> Result<Interaction> {
        let f = self.ramp.value(t);
        let v = self.v_base + self.v_amp * f;
        let bias = self.bias;
        build_tvw_scalar(
            &self.lattice,
            &[(vec![1], self.hop)],
            |x| v * stagger(x) + f * bias(x),
            0.0,
            &self.pairs(),
        )
    }

    pub fn interaction_dot(&self, t: f64) -> Result<Interaction> {
        let df = self.ramp.eval(t).1;
        let bias = self.bias;
        let amp = self.v_amp;
        build_tvw_scalar(&self.lattice, &[], |x| df * (amp * stagger(x) + bias(x)), 0.0, &[])
    }

    pub fn h(&self, t: f64) -> Result<CMat> {
        Ok(self.interaction(t)?.assemble(&self.sector)?.matrix)
    }

    pub fn hdot(&self, t: f64) -> Result<CMat> {
        Ok(self.interaction_dot(t)?.assemble(&self.sector)?.matrix)
    }

    /// (H₀, H₁) with H(t) = H₀ + f(t)·H₁ and Ḣ(t) = f′(t)·H₁; assembling the
    /// two pieces once keeps the propagation loops off the slow term-by-term
    /// rebuild.
    pub fn split(&self) -> Result<(CMat, CMat)> {
        let v0 = self.v_base;
        let h0 = build_tvw_scalar(
            &self.lattice,
            &[(vec![1], self.hop)],
            |x| v0 * stagger(x),
            0.0,
            &self.pairs(),
        )?
        .assemble(&self.sector)?
        .matrix;
        let amp = self.v_amp;
        let bias = self.bias;
        let h1 = build_tvw_scalar(&self.lattice, &[], |x| amp * stagger(x) + bias(x), 0.0, &[])?
            .assemble(&self.sector)?
            .matrix;
        Ok((h0, h1))
    }
}

/// Two-level avoided crossing steered by a flat switch:
/// H(t) = cos θ σ_z + sin θ σ_x with θ(t) = θ₀ + θ_amp·f(t). The gap is
/// pinned at 2 for every t.
pub struct TwoLevelFamily {
    pub theta0: f64,
    pub theta_amp: f64,
    pub ramp: Switch,
}

impl TwoLevelFamily {
    pub fn new(theta0: f64, theta_amp: f64) -> Self {
        TwoLevelFamily { theta0, theta_amp, ramp: Switch::FlatExp }
    }

    fn theta(&self, t: f64) -> (f64, f64) {
        let (f, df, _) = self.ramp.eval(t);
        (self.theta0 + self.theta_amp * f, self.theta_amp * df)
    }

    pub fn h(&self, t: f64) -> Result<CMat> {
        let (th, _) = self.theta(t);
        Ok(array![
            [c(th.cos(), 0.0), c(th.sin(), 0.0)],
            [c(th.sin(), 0.0), c(-th.cos(), 0.0)],
        ])
    }

    pub fn hdot(&self, t: f64) -> Result<CMat> {
        let (th, dth) = self.theta(t);
        Ok(array![
            [c(-th.sin() * dth, 0.0), c(th.cos() * dth, 0.0)],
            [c(th.cos() * dth, 0.0), c(th.sin() * dth, 0.0)],
        ])
    }
}

/// Staggered chain at half filling with the parameters the acceptance
/// checks share: unit hopping with a flux phase, potential ramp 7 → 7.15,
/// repulsion 0.4. Deep wells and a gentle ramp keep the asymptotic window
/// of the adiabatic expansion wide, so the sub-leading orders stay
/// negligible even at the largest drive rate sampled (ε = 0.2).
pub fn driven_chain(m: i64) -> ChainFamily {
    ChainFamily::new(m, (m / 2) as usize, C64::from_polar(1.0, 0.5), 7.0, 0.15, 0.4)
}

/// Single-bond hopping observable a*_x a_y + a*_y a_x on the chain's sector.
pub fn bond_matrix(fam: &ChainFamily, x: i64, y: i64) -> Result<CMat> {
    let mut obs = Interaction::new(fam.lattice.clone(), 1)?;
    obs.add_hop(&[x], 0, &[y], 0, c(1.0, 0.0))?;
    Ok(obs.assemble(&fam.sector)?.matrix)
}

/// Density observable n_x as an interaction (for commutator-bound checks).
pub fn density(lattice: &TorusLattice, x: i64) -> Result<Interaction> {
    let mut obs = Interaction::new(lattice.clone(), 1)?;
    obs.add_number(&[x], 0, 1.0)?;
    Ok(obs)
}
