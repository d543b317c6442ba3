//! Fermionic Fock sectors: occupation-number bases at fixed particle number,
//! ladder operators with Jordan–Wigner signs, number operators, and the
//! position/twist diagonals.
//!
//! Modes are ordered lexicographically in (linear site index, internal
//! index); a basis state is the u64 bit pattern with bit m = occupation of
//! mode m. The sign of any ladder monomial follows from
//! (−1)^{#occupied modes strictly before the acted position} in this order.

use crate::lattice::TorusLattice;
use crate::{C64, CMat, Error, Result};
use std::collections::HashMap;

pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// N-particle sector of the Fock space over `internal_dim` modes per site.
#[derive(Debug, Clone)]
pub struct FockSector {
    lattice: TorusLattice,
    internal_dim: usize,
    n_particles: usize,
    n_modes: usize,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl FockSector {
    pub fn new(lattice: TorusLattice, internal_dim: usize, n_particles: usize) -> Result<Self> {
        if internal_dim == 0 {
            return Err(Error::InvalidArgument("internal dimension must be ≥ 1".into()));
        }
        let n_modes = internal_dim * lattice.n_sites();
        if n_modes > 60 {
            return Err(Error::InvalidArgument(format!(
                "{n_modes} modes exceed the 60-bit pattern limit"
            )));
        }
        if n_particles > n_modes {
            return Err(Error::InvalidArgument(format!(
                "{n_particles} particles in {n_modes} modes"
            )));
        }
        let states = enumerate_patterns(n_modes, n_particles);
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(FockSector {
            lattice,
            internal_dim,
            n_particles,
            n_modes,
            states,
            index,
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn pattern(&self, basis_pos: usize) -> u64 {
        self.states[basis_pos]
    }

    pub fn position_of(&self, pattern: u64) -> Option<usize> {
        self.index.get(&pattern).copied()
    }

    pub fn mode_of(&self, site_idx: usize, internal: usize) -> usize {
        site_idx * self.internal_dim + internal
    }

    pub fn site_of_mode(&self, mode: usize) -> (usize, usize) {
        (mode / self.internal_dim, mode % self.internal_dim)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range (sector has {} modes)",
                self.n_modes
            )));
        }
        Ok(())
    }
}

/// All n-bit patterns with k set bits, ascending numeric order.
fn enumerate_patterns(n: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let limit: u64 = 1 << n;
    let mut v: u64 = (1 << k) - 1;
    while v < limit {
        out.push(v);
        // Gosper's hack: next higher integer with the same popcount
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// a_mode (or a*_mode) applied to a bit pattern: Jordan–Wigner sign and the
/// new pattern, or None when the result vanishes.
pub fn apply_ladder(pattern: u64, mode: usize, kind: Ladder) -> Option<(f64, u64)> {
    let bit = 1u64 << mode;
    let occupied = pattern & bit != 0;
    match kind {
        Ladder::Annihilate if !occupied => None,
        Ladder::Create if occupied => None,
        _ => {
            let below = (pattern & (bit - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            Some((sign, pattern ^ bit))
        }
    }
}

/// A product of ladder operators applied right-to-left (so `ops` reads like
/// the operator product on paper).
pub fn apply_word(pattern: u64, ops: &[(Ladder, usize)]) -> Option<(f64, u64)> {
    let mut sign = 1.0;
    let mut p = pattern;
    for &(kind, mode) in ops.iter().rev() {
        let (s, q) = apply_ladder(p, mode, kind)?;
        sign *= s;
        p = q;
    }
    Some((sign, p))
}

/// Matrix on a Fock sector, tagged with Hermiticity and (when local) the
/// site support.
#[derive(Debug, Clone)]
pub struct Operator {
    pub matrix: CMat,
    pub hermitian: bool,
    pub support: Option<Vec<usize>>,
}

impl Operator {
    pub fn general(matrix: CMat, support: Option<Vec<usize>>) -> Self {
        Operator {
            matrix,
            hermitian: false,
            support,
        }
    }

    /// Tag as Hermitian; rejects matrices violating ‖A − A*‖_max ≤ 1e−12.
    pub fn hermitian(matrix: CMat, support: Option<Vec<usize>>) -> Result<Self> {
        let defect = crate::linalg::herm_defect(&matrix);
        if defect > HERMITICITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix tagged hermitian has defect {defect:.3e}"
            )));
        }
        Ok(Operator {
            matrix,
            hermitian: true,
            support,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Σ c_{mm′} a*_m a_{m′} on the sector. The Hermitian tag is set when the
/// coefficient table is Hermitian.
pub fn ladder_map(
    pairs: &[((usize, usize), C64)],
    sector: &FockSector,
) -> Result<Operator> {
    let dim = sector.dim();
    let mut mat = CMat::zeros((dim, dim));
    for &((m, mp), _) in pairs {
        sector.check_mode(m)?;
        sector.check_mode(mp)?;
    }
    for (col, &s) in sector.states().iter().enumerate() {
        for &((m, mp), c) in pairs {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            if let Some((sign, p)) =
                apply_word(s, &[(Ladder::Create, m), (Ladder::Annihilate, mp)])
            {
                let row = sector
                    .position_of(p)
                    .expect("number-conserving word stays in the sector");
                mat[[row, col]] += c * sign;
            }
        }
    }
    // table hermiticity ⇒ matrix hermiticity
    let mut table: HashMap<(usize, usize), C64> = HashMap::new();
    for &((m, mp), c) in pairs {
        *table.entry((m, mp)).or_insert(C64::new(0.0, 0.0)) += c;
    }
    let symmetric = table.iter().all(|(&(m, mp), &c)| {
        let back = table.get(&(mp, m)).copied().unwrap_or(C64::new(0.0, 0.0));
        (back.conj() - c).norm() <= HERMITICITY_TOL
    });
    Ok(if symmetric {
        Operator::hermitian(mat, None)?
    } else {
        Operator::general(mat, None)
    })
}

/// Diagonal operator counting occupied modes on `region` (site indices).
pub fn number_operator(region: &[usize], sector: &FockSector) -> Result<Operator> {
    let mut mask: u64 = 0;
    for &site in region {
        if site >= sector.lattice().n_sites() {
            return Err(Error::InvalidArgument(format!(
                "site index {site} outside the lattice"
            )));
        }
        for i in 0..sector.internal_dim() {
            mask |= 1 << sector.mode_of(site, i);
        }
    }
    let dim = sector.dim();
    let mut mat = CMat::zeros((dim, dim));
    for (k, &s) in sector.states().iter().enumerate() {
        mat[[k, k]] = C64::new((s & mask).count_ones() as f64, 0.0);
    }
    Operator::hermitian(mat, Some(region.to_vec()))
}

/// Half-space number operator 𝔑_j for the cut {x_j = 0}: counts particles on
/// sites with x_j ≤ 0.
pub fn half_space_number(direction: usize, sector: &FockSector) -> Result<Operator> {
    let lat = sector.lattice();
    if direction >= lat.d() {
        return Err(Error::InvalidArgument(format!(
            "direction {direction} outside dimension {}",
            lat.d()
        )));
    }
    let region: Vec<usize> = lat
        .sites()
        .filter(|&s| lat.coords(s)[direction] <= 0)
        .collect();
    number_operator(&region, sector)
}

/// Shifted position diagonals Q_{y,k} (one per direction) and the twist
/// unitary exp(−i α·Q_y).
pub fn position_twist(
    y: &[i64],
    alpha: &[f64],
    sector: &FockSector,
) -> Result<(Vec<Operator>, Operator)> {
    let lat = sector.lattice().clone();
    let d = lat.d();
    if y.len() != d || alpha.len() != d {
        return Err(Error::InvalidArgument(
            "anchor site and twist angle must have the lattice dimension".into(),
        ));
    }
    lat.site_index(y)?;
    // displacement (x −^Λ y)_k per mode
    let mut disp = vec![vec![0.0f64; sector.n_modes()]; d];
    for site in lat.sites() {
        let delta = lat.sub(lat.coords(site), y);
        for i in 0..sector.internal_dim() {
            let mode = sector.mode_of(site, i);
            for k in 0..d {
                disp[k][mode] = delta[k] as f64;
            }
        }
    }
    let dim = sector.dim();
    let mut q_ops = Vec::with_capacity(d);
    let mut q_diag = vec![vec![0.0f64; dim]; d];
    for k in 0..d {
        let mut mat = CMat::zeros((dim, dim));
        for (pos, &s) in sector.states().iter().enumerate() {
            let mut total = 0.0;
            let mut bits = s;
            while bits != 0 {
                let mode = bits.trailing_zeros() as usize;
                total += disp[k][mode];
                bits &= bits - 1;
            }
            q_diag[k][pos] = total;
            mat[[pos, pos]] = C64::new(total, 0.0);
        }
        q_ops.push(Operator::hermitian(mat, None)?);
    }
    let mut twist = CMat::zeros((dim, dim));
    for pos in 0..dim {
        let phase: f64 = (0..d).map(|k| alpha[k] * q_diag[k][pos]).sum();
        twist[[pos, pos]] = C64::from_polar(1.0, -phase);
    }
    Ok((q_ops, Operator::general(twist, None)))
}

/// Single ladder operator on the full 2^n Fock space as a sparse column map:
/// entry j ↦ (i, sign) with matrix element M[i,j] = sign. Used for CAR checks
/// where the dense 2^n matrix would be wasteful.
pub fn ladder_full(n_modes: usize, mode: usize, kind: Ladder) -> Vec<Option<(usize, f64)>> {
    (0..1u64 << n_modes)
        .map(|p| apply_ladder(p, mode, kind).map(|(s, q)| (q as usize, s)))
        .collect()
}
