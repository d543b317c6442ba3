//! Builds lattice models from a run configuration: the static interaction,
//! the driven part, their sector matrices, and the named observables.

use adiflow::fock::FockSector;
use adiflow::interaction::Interaction;
use adiflow::lattice::TorusLattice;
use adiflow::propagate::Switch;
use adiflow::{C64, CMat};

use crate::config::{Config, ObsKind, ObservableSection, PotentialTable};
use crate::CliError;

/// Sector dimensions above this would need multi-gigabyte dense matrices.
const MAX_SECTOR_DIM: usize = 4096;

/// Geometry and interaction terms; enough for the norm and commutator
/// checks, which never assemble the full many-body matrix up front.
pub struct LatticeModel {
    pub lattice: TorusLattice,
    pub phi0: Interaction,
    pub drive_phi: Option<Interaction>,
    pub switch: Switch,
    pub t0: f64,
    pub t1: f64,
    pub m: i64,
}

impl LatticeModel {
    pub fn build(cfg: &Config, m: i64) -> Result<LatticeModel, CliError> {
        let usage = |e: adiflow::Error| CliError::Usage(format!("M = {m}: {e}"));
        let d = cfg.model.d;
        let lattice = TorusLattice::new(d, m).map_err(usage)?;

        let mut phi0 = Interaction::new(lattice.clone(), 1).map_err(usage)?;
        for s in lattice.sites() {
            let x = lattice.coords(s).to_vec();
            for hop in &cfg.model.hops {
                let phase = hop.landau * x[0] as f64;
                let amp = C64::new(hop.re, hop.im) * C64::from_polar(1.0, phase);
                let y = wrapped_target(&lattice, &x, &hop.offset).map_err(usage)?;
                phi0.add_hop(&x, 0, &y, 0, amp).map_err(usage)?;
            }
            let v = potential_value(&cfg.model.potential, &x) - cfg.model.mu;
            if v != 0.0 {
                phi0.add_number(&x, 0, v).map_err(usage)?;
            }
            for pair in &cfg.model.pairs {
                let y = wrapped_target(&lattice, &x, &pair.offset).map_err(usage)?;
                phi0.add_pair(&x, 0, &y, 0, pair.w).map_err(usage)?;
            }
        }

        let mut drive_phi = None;
        let mut switch = Switch::FlatExp;
        if let Some(drive) = &cfg.drive {
            switch = match drive.schedule.as_str() {
                "smoothstep" => Switch::Smoothstep,
                _ => Switch::FlatExp,
            };
            let mut phi1 = Interaction::new(lattice.clone(), 1).map_err(usage)?;
            for s in lattice.sites() {
                let x = lattice.coords(s).to_vec();
                let v = potential_value(&drive.potential, &x);
                if v != 0.0 {
                    phi1.add_number(&x, 0, v).map_err(usage)?;
                }
            }
            drive_phi = Some(phi1);
        }

        Ok(LatticeModel {
            lattice,
            phi0,
            drive_phi,
            switch,
            t0: cfg.sweep.t_start,
            t1: cfg.sweep.t_end,
            m,
        })
    }

    /// Switch value and time derivative at ramp time t; the switch itself
    /// runs over [0, 1], rescaled from the sweep window.
    pub fn ramp(&self, t: f64) -> (f64, f64) {
        let width = self.t1 - self.t0;
        let (f, df, _) = self.switch.eval((t - self.t0) / width);
        (f, df / width)
    }

    /// Density observable n_x as an interaction on this geometry.
    pub fn density(&self, x: &[i64]) -> Result<Interaction, CliError> {
        let usage = |e: adiflow::Error| CliError::Usage(format!("M = {}: {e}", self.m));
        let mut obs = Interaction::new(self.lattice.clone(), 1).map_err(usage)?;
        let canon = self
            .lattice
            .coords(self.lattice.site_index_wrapped(x).map_err(usage)?)
            .to_vec();
        obs.add_number(&canon, 0, 1.0).map_err(usage)?;
        Ok(obs)
    }
}

/// A lattice model assembled on its particle-number sector, with the affine
/// split H(t) = H₀ + f(t)·H₁ as dense matrices.
pub struct SectorModel {
    pub base: LatticeModel,
    pub sector: FockSector,
    pub h0: CMat,
    pub h1: Option<CMat>,
    pub volume: f64,
}

impl SectorModel {
    pub fn build(cfg: &Config, m: i64) -> Result<SectorModel, CliError> {
        let base = LatticeModel::build(cfg, m)?;
        let usage = |e: adiflow::Error| CliError::Usage(format!("M = {m}: {e}"));

        let n_modes = base.lattice.n_sites();
        let n = match (cfg.model.n, cfg.model.filling) {
            (Some(n), _) => n,
            (None, Some(f)) => (f * n_modes as f64).round() as usize,
            (None, None) => unreachable!("validated"),
        };
        if n == 0 || n > n_modes {
            return Err(CliError::Usage(format!(
                "model.n: M = {m} has {n_modes} modes, cannot place {n} particles"
            )));
        }
        let sector = FockSector::new(base.lattice.clone(), 1, n).map_err(usage)?;
        if sector.dim() > MAX_SECTOR_DIM {
            return Err(CliError::Usage(format!(
                "model.m: M = {m} with {n} particles spans a sector of dimension {}, \
                 beyond the dense-matrix limit {MAX_SECTOR_DIM}",
                sector.dim()
            )));
        }

        let h0 = base.phi0.assemble(&sector).map_err(usage)?.matrix;
        let h1 = match &base.drive_phi {
            Some(phi1) => Some(phi1.assemble(&sector).map_err(usage)?.matrix),
            None => None,
        };
        let volume = (m as f64).powi(cfg.model.d as i32);
        Ok(SectorModel { base, sector, h0, h1, volume })
    }

    pub fn h(&self, t: f64) -> adiflow::Result<CMat> {
        match &self.h1 {
            Some(h1) => {
                let (f, _) = self.base.ramp(t);
                Ok(&self.h0 + &h1.mapv(|z| z * f))
            }
            None => Ok(self.h0.clone()),
        }
    }

    pub fn hdot(&self, t: f64) -> adiflow::Result<CMat> {
        match &self.h1 {
            Some(h1) => {
                let (_, df) = self.base.ramp(t);
                Ok(h1.mapv(|z| z * df))
            }
            None => Ok(CMat::zeros(self.h0.raw_dim())),
        }
    }

    pub fn observable(&self, obs: &ObservableSection) -> Result<CMat, CliError> {
        let usage =
            |e: adiflow::Error| CliError::Usage(format!("observable \"{}\": {e}", obs.name));
        let mut phi = Interaction::new(self.base.lattice.clone(), 1).map_err(usage)?;
        match obs.kind {
            ObsKind::Hop => {
                phi.add_hop(&obs.sites[0], 0, &obs.sites[1], 0, C64::new(obs.re, obs.im))
                    .map_err(usage)?;
            }
            ObsKind::Number => {
                phi.add_number(&obs.sites[0], 0, obs.re).map_err(usage)?;
            }
        }
        Ok(phi.assemble(&self.sector).map_err(usage)?.matrix)
    }
}

/// Checkerboard sign (−1)^(x₁+…+x_d).
fn checkerboard(x: &[i64]) -> f64 {
    if x.iter().sum::<i64>().rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn potential_value(pot: &PotentialTable, x: &[i64]) -> f64 {
    let mut v = pot.uniform + pot.staggered * checkerboard(x);
    for site in &pot.sites {
        if site.at == x {
            v += site.value;
        }
    }
    v
}

/// Canonical coordinates of x + offset on the torus.
fn wrapped_target(
    lattice: &TorusLattice,
    x: &[i64],
    offset: &[i64],
) -> adiflow::Result<Vec<i64>> {
    let raw: Vec<i64> = x.iter().zip(offset).map(|(a, b)| a + b).collect();
    Ok(lattice.coords(lattice.site_index_wrapped(&raw)?).to_vec())
}
