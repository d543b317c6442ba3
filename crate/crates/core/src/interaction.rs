//! Finite-range interactions as set functions: each local term carries its
//! site support and a list of number-conserving ladder words. Keeping the
//! words (rather than only sector matrices) is what makes twists, currents,
//! and local operator norms exact instead of numerically differentiated.
//!
//! Twist angles multiply word coefficients by explicit phases, so twisted
//! families H(α), H(β) and their derivatives (currents) are closed-form in
//! the coefficients; no finite differencing of Hamiltonians is involved.

use crate::fock::{apply_word, FockSector, Ladder, Operator};
use crate::lattice::{decay_weights, DecayFunction, LocalizationPlane, TorusLattice};
use crate::linalg::{herm_defect, op_norm};
use crate::{C64, CMat, Error, Result};
use std::collections::{BTreeMap, HashMap};

const HERM_TOL: f64 = 1e-12;

/// One ladder monomial: coeff · (product of ops read left to right).
#[derive(Debug, Clone)]
pub struct Word {
    pub coeff: C64,
    pub ops: Vec<(Ladder, usize)>,
}

impl Word {
    fn conserves_number(&self) -> bool {
        let creates = self
            .ops
            .iter()
            .filter(|(k, _)| *k == Ladder::Create)
            .count();
        creates * 2 == self.ops.len()
    }
}

/// A Hermitian local term: sorted site support plus its ladder words.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    support: Vec<usize>,
    words: Vec<Word>,
    diameter: i64,
}

impl LocalTerm {
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn diameter(&self) -> i64 {
        self.diameter
    }
}

/// Finite-range interaction on a fixed torus with `internal_dim` modes per
/// site.
#[derive(Debug, Clone)]
pub struct Interaction {
    lattice: TorusLattice,
    internal_dim: usize,
    terms: Vec<LocalTerm>,
}

impl Interaction {
    pub fn new(lattice: TorusLattice, internal_dim: usize) -> Result<Self> {
        if internal_dim == 0 {
            return Err(Error::InvalidArgument("internal dimension must be ≥ 1".into()));
        }
        Ok(Interaction {
            lattice,
            internal_dim,
            terms: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn mode_of(&self, site_idx: usize, internal: usize) -> usize {
        site_idx * self.internal_dim + internal
    }

    fn site_of_mode(&self, mode: usize) -> usize {
        mode / self.internal_dim
    }

    /// Adds one local term from raw words. Words must conserve particle
    /// number and the term must be Hermitian.
    pub fn add_term(&mut self, words: Vec<Word>) -> Result<()> {
        if words.is_empty() {
            return Err(Error::InvalidArgument("term with no words".into()));
        }
        let mut support: Vec<usize> = Vec::new();
        for w in &words {
            if !w.conserves_number() {
                return Err(Error::InvalidArgument(
                    "word does not conserve particle number".into(),
                ));
            }
            for &(_, mode) in &w.ops {
                let site = self.site_of_mode(mode);
                if site >= self.lattice.n_sites() {
                    return Err(Error::InvalidArgument(format!(
                        "mode {mode} outside the lattice"
                    )));
                }
                if let Err(pos) = support.binary_search(&site) {
                    support.insert(pos, site);
                }
            }
        }
        let diameter = self.lattice.diameter(&support) as i64;
        let term = LocalTerm {
            support,
            words,
            diameter,
        };
        let local = self.local_matrix(&term)?;
        let defect = herm_defect(&local);
        if defect > HERM_TOL {
            return Err(Error::InvalidArgument(format!(
                "local term is not Hermitian (defect {defect:.3e})"
            )));
        }
        self.terms.push(term);
        Ok(())
    }

    /// t a*_{x,ix} a_{y,iy} + h.c.
    pub fn add_hop(
        &mut self,
        x: &[i64],
        ix: usize,
        y: &[i64],
        iy: usize,
        t: C64,
    ) -> Result<()> {
        let mx = self.mode_of(self.lattice.site_index(x)?, ix);
        let my = self.mode_of(self.lattice.site_index(y)?, iy);
        let mut words = vec![Word {
            coeff: t,
            ops: vec![(Ladder::Create, mx), (Ladder::Annihilate, my)],
        }];
        if mx != my {
            words.push(Word {
                coeff: t.conj(),
                ops: vec![(Ladder::Create, my), (Ladder::Annihilate, mx)],
            });
        } else if t.im.abs() > HERM_TOL {
            return Err(Error::InvalidArgument(
                "diagonal hopping amplitude must be real".into(),
            ));
        }
        self.add_term(words)
    }

    /// v n_{x,ix}
    pub fn add_number(&mut self, x: &[i64], ix: usize, v: f64) -> Result<()> {
        let m = self.mode_of(self.lattice.site_index(x)?, ix);
        self.add_term(vec![Word {
            coeff: C64::new(v, 0.0),
            ops: vec![(Ladder::Create, m), (Ladder::Annihilate, m)],
        }])
    }

    /// w n_{x,ix} n_{y,iy}
    pub fn add_pair(
        &mut self,
        x: &[i64],
        ix: usize,
        y: &[i64],
        iy: usize,
        w: f64,
    ) -> Result<()> {
        let mx = self.mode_of(self.lattice.site_index(x)?, ix);
        let my = self.mode_of(self.lattice.site_index(y)?, iy);
        self.add_term(vec![Word {
            coeff: C64::new(w, 0.0),
            ops: vec![
                (Ladder::Create, mx),
                (Ladder::Annihilate, mx),
                (Ladder::Create, my),
                (Ladder::Annihilate, my),
            ],
        }])
    }

    /// Concatenation of two interactions on the same geometry.
    pub fn plus(&self, other: &Interaction) -> Result<Interaction> {
        if self.lattice.d() != other.lattice.d()
            || self.lattice.m() != other.lattice.m()
            || self.internal_dim != other.internal_dim
        {
            return Err(Error::InvalidArgument(
                "interactions live on different geometries".into(),
            ));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    /// All word coefficients scaled by a real factor.
    pub fn scaled(&self, factor: f64) -> Interaction {
        let mut out = self.clone();
        for term in &mut out.terms {
            for w in &mut term.words {
                w.coeff *= factor;
            }
        }
        out
    }

    pub fn max_diameter(&self) -> i64 {
        self.terms.iter().map(|t| t.diameter).max().unwrap_or(0)
    }

    /// The term's matrix on its own modes (local Jordan–Wigner signs). A
    /// fermionic mode relabeling is implemented by a Fock-space unitary, so
    /// the spectrum and norm of this matrix equal those of the term on any
    /// ambient space; holes and wrap-arounds in the support are harmless.
    pub fn local_matrix(&self, term: &LocalTerm) -> Result<CMat> {
        let k = term.support.len() * self.internal_dim;
        if k > 24 {
            return Err(Error::Unsupported(format!(
                "local term with {k} modes is too large for a dense norm"
            )));
        }
        let mut rank: HashMap<usize, usize> = HashMap::new();
        for (r_site, &site) in term.support.iter().enumerate() {
            for i in 0..self.internal_dim {
                rank.insert(self.mode_of(site, i), r_site * self.internal_dim + i);
            }
        }
        let dim = 1usize << k;
        let mut mat = CMat::zeros((dim, dim));
        for w in &term.words {
            let local_ops: Vec<(Ladder, usize)> =
                w.ops.iter().map(|&(kind, m)| (kind, rank[&m])).collect();
            for col in 0..dim as u64 {
                if let Some((sign, row)) = apply_word(col, &local_ops) {
                    mat[[row as usize, col as usize]] += w.coeff * sign;
                }
            }
        }
        Ok(mat)
    }

    /// Operator norm of one term, via its local matrix.
    pub fn local_norm(&self, term: &LocalTerm) -> Result<f64> {
        Ok(op_norm(&self.local_matrix(term)?))
    }

    /// Matrix of a single term on a sector (global Jordan–Wigner signs).
    pub fn term_matrix(&self, term: &LocalTerm, sector: &FockSector) -> Result<CMat> {
        self.check_sector(sector)?;
        let dim = sector.dim();
        let mut mat = CMat::zeros((dim, dim));
        for w in &term.words {
            for (col, &s) in sector.states().iter().enumerate() {
                if let Some((sign, p)) = apply_word(s, &w.ops) {
                    let row = sector
                        .position_of(p)
                        .expect("number-conserving word stays in the sector");
                    mat[[row, col]] += w.coeff * sign;
                }
            }
        }
        Ok(mat)
    }

    fn check_sector(&self, sector: &FockSector) -> Result<()> {
        if sector.lattice().d() != self.lattice.d()
            || sector.lattice().m() != self.lattice.m()
            || sector.internal_dim() != self.internal_dim
        {
            return Err(Error::InvalidArgument(
                "sector geometry does not match the interaction".into(),
            ));
        }
        Ok(())
    }

    /// Full Hamiltonian on the sector.
    pub fn assemble(&self, sector: &FockSector) -> Result<Operator> {
        self.check_sector(sector)?;
        let dim = sector.dim();
        let mut mat = CMat::zeros((dim, dim));
        for term in &self.terms {
            mat = mat + self.term_matrix(term, sector)?;
        }
        Operator::hermitian(mat, None)
    }

    /// ‖Φ‖ = max over site pairs (x,y) of Σ_{X ∋ x,y} |X|^p ‖Φ(X)‖ divided
    /// by F_ζ(d_L(x,y)). Terms sharing a support are merged before taking
    /// norms, so Φ is evaluated as a set function.
    pub fn norm(
        &self,
        zeta: &DecayFunction,
        weight_power: u32,
        plane: &LocalizationPlane,
    ) -> Result<f64> {
        let merged = self.merged_norms()?;
        let d = self.lattice.d();
        let mut best: f64 = 0.0;
        for x in self.lattice.sites() {
            for y in self.lattice.sites() {
                let mut total = 0.0;
                for (support, nm) in &merged {
                    if support.binary_search(&x).is_ok() && support.binary_search(&y).is_ok() {
                        total += (support.len() as f64).powi(weight_power as i32) * nm;
                    }
                }
                if total == 0.0 {
                    continue;
                }
                let r = self.lattice.plane_distance(
                    self.lattice.coords(x),
                    self.lattice.coords(y),
                    plane,
                );
                let (_, f_zeta) = decay_weights(r, d, zeta);
                best = best.max(total / f_zeta);
            }
        }
        Ok(best)
    }

    /// (support, ‖Φ(X)‖) with same-support terms merged.
    fn merged_norms(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        let mut groups: BTreeMap<Vec<usize>, CMat> = BTreeMap::new();
        for term in &self.terms {
            let local = self.local_matrix(term)?;
            groups
                .entry(term.support.clone())
                .and_modify(|m| *m = &*m + &local)
                .or_insert(local);
        }
        groups
            .into_iter()
            .map(|(s, m)| Ok((s, op_norm(&m))))
            .collect()
    }

    fn check_twistable(&self, term: &LocalTerm) -> Result<()> {
        if 3 * term.diameter >= self.lattice.m() {
            return Err(Error::Configuration(format!(
                "term of diameter {} cannot be twisted consistently on a torus of extent {}",
                term.diameter,
                self.lattice.m()
            )));
        }
        Ok(())
    }

    /// Per-word phase exponent Σ_cre θ − Σ_ann θ with θ(x) = α·(x −Λ anchor);
    /// independent of the anchor choice within the support for small terms.
    fn word_phase(&self, anchor_site: usize, w: &Word, alpha: &[f64]) -> f64 {
        let anchor = self.lattice.coords(anchor_site).to_vec();
        let mut phase = 0.0;
        for &(kind, mode) in &w.ops {
            let x = self.lattice.coords(self.site_of_mode(mode));
            let delta = self.lattice.sub(x, &anchor);
            let theta: f64 = delta
                .iter()
                .zip(alpha)
                .map(|(&dk, &ak)| ak * dk as f64)
                .sum();
            match kind {
                Ladder::Create => phase += theta,
                Ladder::Annihilate => phase -= theta,
            }
        }
        phase
    }

    /// Uniform twist: every term conjugated by exp(−i α·Q) with the position
    /// diagonal anchored inside the term. At α_k ∈ (2π/M)Z this is a gauge
    /// transformation; in between it threads flux.
    pub fn twist(&self, alpha: &[f64]) -> Result<Interaction> {
        if alpha.len() != self.lattice.d() {
            return Err(Error::InvalidArgument(
                "twist angle must have one component per direction".into(),
            ));
        }
        let mut out = self.clone();
        for term in &mut out.terms {
            self.check_twistable(term)?;
            let anchor = term.support[0];
            for w in &mut term.words {
                let phase = self.word_phase(anchor, w, alpha);
                w.coeff *= C64::from_polar(1.0, -phase);
            }
        }
        Ok(out)
    }

    /// d/dα_k of the twisted family at α = 0: per word the factor
    /// i(Σ_ann q_k − Σ_cre q_k). Zero words are dropped.
    pub fn current(&self, direction: usize) -> Result<Interaction> {
        if direction >= self.lattice.d() {
            return Err(Error::InvalidArgument(format!(
                "direction {direction} outside dimension {}",
                self.lattice.d()
            )));
        }
        let mut alpha = vec![0.0; self.lattice.d()];
        alpha[direction] = 1.0;
        let mut out = Interaction::new(self.lattice.clone(), self.internal_dim)?;
        for term in &self.terms {
            self.check_twistable(term)?;
            let mut words = Vec::new();
            for w in &term.words {
                let q = self.word_phase(term.support[0], w, &alpha);
                if q != 0.0 {
                    words.push(Word {
                        coeff: w.coeff * C64::new(0.0, -q),
                        ops: w.ops.clone(),
                    });
                }
            }
            if !words.is_empty() {
                out.add_term(words)?;
            }
        }
        Ok(out)
    }

    /// #creations minus #annihilations at sites with x_j ≤ 0.
    fn cut_imbalance(&self, w: &Word, direction: usize) -> i64 {
        let mut imbalance = 0i64;
        for &(kind, mode) in &w.ops {
            let x = self.lattice.coords(self.site_of_mode(mode));
            if x[direction] <= 0 {
                match kind {
                    Ladder::Create => imbalance += 1,
                    Ladder::Annihilate => imbalance -= 1,
                }
            }
        }
        imbalance
    }

    fn near_cut(&self, term: &LocalTerm, direction: usize, radius: i64) -> bool {
        term.support.iter().any(|&s| {
            self.lattice.coords(s)[direction]
                .rem_euclid(self.lattice.m())
                .min(
                    (-self.lattice.coords(s)[direction]).rem_euclid(self.lattice.m()),
                )
                <= radius
        })
    }

    /// Flux through the cut {x_j = 0}: terms within `radius` of the cut are
    /// conjugated by exp(−i β 𝔑_j), the rest are untouched. Terms crossing
    /// the opposite seam of the torus stay untwisted, which is what makes
    /// the family genuinely β-dependent.
    pub fn twist_cut(&self, direction: usize, beta: f64, radius: i64) -> Result<Interaction> {
        if direction >= self.lattice.d() {
            return Err(Error::InvalidArgument(format!(
                "direction {direction} outside dimension {}",
                self.lattice.d()
            )));
        }
        let mut out = self.clone();
        for term in &mut out.terms {
            if !self.near_cut(term, direction, radius) {
                continue;
            }
            for w in &mut term.words {
                let imbalance = self.cut_imbalance(w, direction);
                w.coeff *= C64::from_polar(1.0, -beta * imbalance as f64);
            }
        }
        Ok(out)
    }

    /// d/dβ of `twist_cut` at β = 0: the current through the cut.
    pub fn current_through_cut(&self, direction: usize, radius: i64) -> Result<Interaction> {
        if direction >= self.lattice.d() {
            return Err(Error::InvalidArgument(format!(
                "direction {direction} outside dimension {}",
                self.lattice.d()
            )));
        }
        let mut out = Interaction::new(self.lattice.clone(), self.internal_dim)?;
        for term in &self.terms {
            if !self.near_cut(term, direction, radius) {
                continue;
            }
            let mut words = Vec::new();
            for w in &term.words {
                let imbalance = self.cut_imbalance(w, direction);
                if imbalance != 0 {
                    words.push(Word {
                        coeff: w.coeff * C64::new(0.0, -imbalance as f64),
                        ops: w.ops.clone(),
                    });
                }
            }
            if !words.is_empty() {
                out.add_term(words)?;
            }
        }
        Ok(out)
    }
}

/// Hopping + potential + density-density model on a torus:
///   Σ_{x,z} a*_x T(z) a_{x+z} + h.c.  +  Σ_x a*_x (B(x) − μ) a_x
///   + ½ Σ_{x,z,ij} W(z)_ij (n_{x,i} n_{x+z,j} + n_{x+z,i} n_{x,j}).
/// Each displacement z is listed once; the reverse hop follows from
/// Hermiticity. `onsite` returns the full internal block B(x) at site x.
pub fn build_tvw(
    lattice: &TorusLattice,
    internal_dim: usize,
    hops: &[(Vec<i64>, CMat)],
    onsite: impl Fn(&[i64]) -> CMat,
    mu: f64,
    pairs: &[(Vec<i64>, ndarray::Array2<f64>)],
) -> Result<Interaction> {
    let mut phi = Interaction::new(lattice.clone(), internal_dim)?;
    let ell = internal_dim;
    for (z, t) in hops {
        if t.nrows() != ell || t.ncols() != ell {
            return Err(Error::InvalidArgument(
                "hopping block has the wrong internal dimension".into(),
            ));
        }
        if z.iter().all(|&c| c.rem_euclid(lattice.m()) == 0) {
            return Err(Error::InvalidArgument(
                "hopping displacement wraps to zero; put it in the on-site block".into(),
            ));
        }
    }
    for site in lattice.sites() {
        let x = lattice.coords(site).to_vec();
        // on-site block
        let b = onsite(&x);
        if b.nrows() != ell || b.ncols() != ell {
            return Err(Error::InvalidArgument(
                "on-site block has the wrong internal dimension".into(),
            ));
        }
        if herm_defect(&b) > HERM_TOL {
            return Err(Error::InvalidArgument(format!(
                "on-site block at {x:?} is not Hermitian"
            )));
        }
        for i in 0..ell {
            let v = b[[i, i]].re - mu;
            if v != 0.0 {
                phi.add_number(&x, i, v)?;
            }
            for j in (i + 1)..ell {
                if b[[i, j]].norm() > 0.0 {
                    phi.add_hop(&x, i, &x, j, b[[i, j]])?;
                }
            }
        }
        // hops out of x
        for (z, t) in hops {
            let y = lattice.add(&x, z);
            let mut words = Vec::new();
            for i in 0..ell {
                for j in 0..ell {
                    if t[[i, j]].norm() == 0.0 {
                        continue;
                    }
                    let mx = phi.mode_of(site, i);
                    let my = phi.mode_of(lattice.site_index(&y)?, j);
                    words.push(Word {
                        coeff: t[[i, j]],
                        ops: vec![(Ladder::Create, mx), (Ladder::Annihilate, my)],
                    });
                    words.push(Word {
                        coeff: t[[i, j]].conj(),
                        ops: vec![(Ladder::Create, my), (Ladder::Annihilate, mx)],
                    });
                }
            }
            if !words.is_empty() {
                phi.add_term(words)?;
            }
        }
        // symmetrized pair couplings
        for (z, w) in pairs {
            if w.nrows() != ell || w.ncols() != ell {
                return Err(Error::InvalidArgument(
                    "pair block has the wrong internal dimension".into(),
                ));
            }
            if z.iter().all(|&c| c.rem_euclid(lattice.m()) == 0) {
                return Err(Error::InvalidArgument(
                    "pair displacement wraps to zero".into(),
                ));
            }
            let y = lattice.add(&x, z);
            let ysite = lattice.site_index(&y)?;
            let mut words = Vec::new();
            for i in 0..ell {
                for j in 0..ell {
                    if w[[i, j]] == 0.0 {
                        continue;
                    }
                    for (ma, mb) in [
                        (phi.mode_of(site, i), phi.mode_of(ysite, j)),
                        (phi.mode_of(ysite, i), phi.mode_of(site, j)),
                    ] {
                        words.push(Word {
                            coeff: C64::new(0.5 * w[[i, j]], 0.0),
                            ops: vec![
                                (Ladder::Create, ma),
                                (Ladder::Annihilate, ma),
                                (Ladder::Create, mb),
                                (Ladder::Annihilate, mb),
                            ],
                        });
                    }
                }
            }
            if !words.is_empty() {
                phi.add_term(words)?;
            }
        }
    }
    Ok(phi)
}

/// Single-band convenience: scalar hops t_z, scalar potential v(x), chemical
/// potential μ, scalar pair couplings w_z.
pub fn build_tvw_scalar(
    lattice: &TorusLattice,
    hops: &[(Vec<i64>, C64)],
    potential: impl Fn(&[i64]) -> f64,
    mu: f64,
    pairs: &[(Vec<i64>, f64)],
) -> Result<Interaction> {
    let hops_m: Vec<(Vec<i64>, CMat)> = hops
        .iter()
        .map(|(z, t)| (z.clone(), CMat::from_elem((1, 1), *t)))
        .collect();
    let pairs_m: Vec<(Vec<i64>, ndarray::Array2<f64>)> = pairs
        .iter()
        .map(|(z, w)| (z.clone(), ndarray::Array2::from_elem((1, 1), *w)))
        .collect();
    build_tvw(
        lattice,
        1,
        &hops_m,
        |x| CMat::from_elem((1, 1), C64::new(potential(x), 0.0)),
        mu,
        &pairs_m,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ladder_full, position_twist};
    use crate::linalg::{adjoint, eigh, max_abs};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain(m: i64) -> TorusLattice {
        TorusLattice::new(1, m).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// staggered nearest-neighbor chain with optional pair coupling
    fn staggered(m: i64, t: f64, v: f64, mu: f64, w: f64) -> Interaction {
        let lat = chain(m);
        let pairs: Vec<(Vec<i64>, f64)> = if w != 0.0 {
            vec![(vec![1], w)]
        } else {
            vec![]
        };
        build_tvw_scalar(
            &lat,
            &[(vec![1], c(t, 0.0))],
            |x| v * if x[0].rem_euclid(2) == 0 { 1.0 } else { -1.0 },
            mu,
            &pairs,
        )
        .unwrap()
    }

    #[test]
    fn free_fermion_spectrum_oracle() {
        // hopping + potential with no pair term: sector eigenvalues are sums
        // of one-body eigenvalues over occupation choices
        let m = 6;
        let (t, v, mu) = (1.0, 0.5, 0.3);
        let phi = staggered(m, t, v, mu, 0.0);
        let lat = chain(m);
        let mut h1 = CMat::zeros((6, 6));
        for s in lat.sites() {
            let x = lat.coords(s)[0];
            h1[[s, s]] = c(v * if x.rem_euclid(2) == 0 { 1.0 } else { -1.0 } - mu, 0.0);
            let y = lat.add(lat.coords(s), &[1]);
            let sy = lat.site_index(&y).unwrap();
            h1[[s, sy]] += c(t, 0.0);
            h1[[sy, s]] += c(t, 0.0);
        }
        let (e1, _) = eigh(&h1).unwrap();
        let sector = FockSector::new(lat, 1, 3).unwrap();
        let h = phi.assemble(&sector).unwrap();
        let (e, _) = eigh(&h.matrix).unwrap();
        // all C(6,3) = 20 occupation sums, sorted
        let mut sums = Vec::new();
        for a in 0..6 {
            for b in (a + 1)..6 {
                for d in (b + 1)..6 {
                    sums.push(e1[a] + e1[b] + e1[d]);
                }
            }
        }
        sums.sort_by(f64::total_cmp);
        assert_eq!(sums.len(), e.len());
        for (lhs, rhs) in e.iter().zip(&sums) {
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn local_norm_closed_forms() {
        let lat = chain(6);
        let mut phi = Interaction::new(lat, 1).unwrap();
        let t = c(0.7, 0.2);
        phi.add_hop(&[0], 0, &[1], 0, t).unwrap();
        phi.add_pair(&[2], 0, &[3], 0, 0.4).unwrap();
        let norms: Vec<f64> = phi
            .terms()
            .iter()
            .map(|term| phi.local_norm(term).unwrap())
            .collect();
        assert_relative_eq!(norms[0], t.norm(), epsilon = 1e-13);
        assert_relative_eq!(norms[1], 0.4, epsilon = 1e-13);

        // hop + on-site number in one term: blocks give max(v, v/2 + √(v²/4 + |t|²))
        let mut phi2 = Interaction::new(chain(6), 1).unwrap();
        let (tt, v) = (0.6, 0.9);
        phi2.add_term(vec![
            Word {
                coeff: c(tt, 0.0),
                ops: vec![(Ladder::Create, 0), (Ladder::Annihilate, 1)],
            },
            Word {
                coeff: c(tt, 0.0),
                ops: vec![(Ladder::Create, 1), (Ladder::Annihilate, 0)],
            },
            Word {
                coeff: c(v, 0.0),
                ops: vec![(Ladder::Create, 0), (Ladder::Annihilate, 0)],
            },
        ])
        .unwrap();
        let expect = (v / 2.0 + (v * v / 4.0 + tt * tt).sqrt()).max(v);
        assert_relative_eq!(
            phi2.local_norm(&phi2.terms()[0]).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    /// dense matrix of a term on the full 2^n Fock space, via sparse ladders
    fn dense_term(_phi: &Interaction, term: &LocalTerm, n_modes: usize) -> CMat {
        let dim = 1 << n_modes;
        let mut out = CMat::zeros((dim, dim));
        for w in term.words() {
            for col in 0..dim as u64 {
                if let Some((sign, row)) = apply_word(col, &w.ops) {
                    out[[row as usize, col as usize]] += w.coeff * sign;
                }
            }
        }
        out
    }

    #[test]
    fn local_norm_matches_global_with_holes_and_wraps() {
        // support {0, 2} with a bystander site in between, plus a hop across
        // the torus seam; the local norm must equal the full-space norm
        let lat = chain(4);
        let mut phi = Interaction::new(lat.clone(), 1).unwrap();
        let i0 = lat.site_index(&[0]).unwrap();
        let i2 = lat.site_index(&[2]).unwrap();
        phi.add_term(vec![
            Word {
                coeff: c(0.8, 0.1),
                ops: vec![(Ladder::Create, i0), (Ladder::Annihilate, i2)],
            },
            Word {
                coeff: c(0.8, -0.1),
                ops: vec![(Ladder::Create, i2), (Ladder::Annihilate, i0)],
            },
            Word {
                coeff: c(0.5, 0.0),
                ops: vec![(Ladder::Create, i0), (Ladder::Annihilate, i0)],
            },
            Word {
                coeff: c(-0.3, 0.0),
                ops: vec![(Ladder::Create, i2), (Ladder::Annihilate, i2)],
            },
        ])
        .unwrap();
        phi.add_hop(&[2], 0, &[-1], 0, c(0.6, 0.4)).unwrap();
        for term in phi.terms() {
            let local = phi.local_norm(term).unwrap();
            let global = op_norm(&dense_term(&phi, term, 4));
            assert_relative_eq!(local, global, epsilon = 1e-12);
        }
    }

    #[test]
    fn interaction_norm_nearest_neighbor_value() {
        // unit nearest-neighbor hopping, exponential weight of rate 1:
        // the supremum sits on adjacent pairs and equals 1/F_ζ(1) = 4e
        let phi = staggered(6, 1.0, 0.0, 0.0, 0.0);
        let zeta = DecayFunction::exponential(1.0).unwrap();
        let plane = LocalizationPlane::trivial(1);
        let nm = phi.norm(&zeta, 0, &plane).unwrap();
        assert_relative_eq!(nm, 4.0 * std::f64::consts::E, epsilon = 1e-12);
        // weight power 1 doubles it (|X| = 2 on the extremal pair)
        let nm1 = phi.norm(&zeta, 1, &plane).unwrap();
        assert_relative_eq!(nm1, 8.0 * std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn interaction_norm_with_plane() {
        let lat = chain(6);
        let mut phi = Interaction::new(lat, 1).unwrap();
        phi.add_number(&[2], 0, 0.7).unwrap();
        let zeta = DecayFunction::exponential(0.5).unwrap();
        // plane localized at x = 0: the on-site term at x = 2 sits at
        // localized distance 2·2 = 4
        let plane = LocalizationPlane::new(vec![true], vec![0]).unwrap();
        let nm = phi.norm(&zeta, 0, &plane).unwrap();
        let (_, fz) = decay_weights(4, 1, &zeta);
        assert_relative_eq!(nm, 0.7 / fz, epsilon = 1e-12);
        // localization only increases the norm
        let nm_trivial = phi
            .norm(&zeta, 0, &LocalizationPlane::trivial(1))
            .unwrap();
        assert!(nm >= nm_trivial);
    }

    #[test]
    fn quantized_twist_is_a_gauge_transformation() {
        let m = 6;
        let phi = staggered(m, 1.0, 0.4, 0.2, 0.3);
        let sector = FockSector::new(chain(m), 1, 2).unwrap();
        let h = phi.assemble(&sector).unwrap().matrix;
        let alpha = 2.0 * std::f64::consts::PI / m as f64;
        let twisted = phi.twist(&[alpha]).unwrap().assemble(&sector).unwrap().matrix;
        let (_, w) = position_twist(&[0], &[alpha], &sector).unwrap();
        let conj = w.matrix.dot(&h).dot(&adjoint(&w.matrix));
        assert!(max_abs(&(&twisted - &conj)) < 1e-12);
        // full period: the twisted family is 2π-periodic exactly
        let back = phi
            .twist(&[2.0 * std::f64::consts::PI])
            .unwrap()
            .assemble(&sector)
            .unwrap()
            .matrix;
        assert!(max_abs(&(&back - &h)) < 1e-12);
    }

    #[test]
    fn current_is_twist_derivative() {
        let m = 6;
        let phi = staggered(m, 1.0, 0.4, 0.0, 0.25);
        let sector = FockSector::new(chain(m), 1, 3).unwrap();
        let j = phi.current(0).unwrap().assemble(&sector).unwrap().matrix;
        let h = 1e-5;
        let hp = phi.twist(&[h]).unwrap().assemble(&sector).unwrap().matrix;
        let hm = phi.twist(&[-h]).unwrap().assemble(&sector).unwrap().matrix;
        let fd = (&hp - &hm) / c(2.0 * h, 0.0);
        assert!(max_abs(&(&j - &fd)) < 1e-8);
    }

    #[test]
    fn cut_current_is_cut_twist_derivative() {
        let m = 6;
        let phi = staggered(m, 1.0, 0.4, 0.1, 0.25);
        let sector = FockSector::new(chain(m), 1, 3).unwrap();
        let radius = phi.max_diameter();
        let j = phi
            .current_through_cut(0, radius)
            .unwrap()
            .assemble(&sector)
            .unwrap()
            .matrix;
        let h = 1e-5;
        let hp = phi
            .twist_cut(0, h, radius)
            .unwrap()
            .assemble(&sector)
            .unwrap()
            .matrix;
        let hm = phi
            .twist_cut(0, -h, radius)
            .unwrap()
            .assemble(&sector)
            .unwrap()
            .matrix;
        let fd = (&hp - &hm) / c(2.0 * h, 0.0);
        assert!(max_abs(&(&j - &fd)) < 1e-8);
        // only the bond terms at the cut contribute
        assert!(phi.current_through_cut(0, radius).unwrap().terms().len() >= 1);
    }

    #[test]
    fn cut_twist_keeps_spectrum_period() {
        let m = 6;
        let phi = staggered(m, 1.0, 0.4, 0.0, 0.2);
        let sector = FockSector::new(chain(m), 1, 3).unwrap();
        let r = phi.max_diameter();
        let h0 = phi.twist_cut(0, 0.7, r).unwrap().assemble(&sector).unwrap().matrix;
        let h1 = phi
            .twist_cut(0, 0.7 + 2.0 * std::f64::consts::PI, r)
            .unwrap()
            .assemble(&sector)
            .unwrap()
            .matrix;
        assert!(max_abs(&(&h1 - &h0)) < 1e-12);
    }

    #[test]
    fn twist_rejects_large_terms() {
        let lat = chain(4);
        let mut phi = Interaction::new(lat, 1).unwrap();
        // diameter 2 on extent 4 violates the consistency margin
        phi.add_hop(&[0], 0, &[2], 0, c(1.0, 0.0)).unwrap();
        assert!(matches!(
            phi.twist(&[0.3]),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn builder_rejects_bad_blocks() {
        let lat = chain(4);
        // wrapping displacement
        assert!(build_tvw_scalar(&lat, &[(vec![4], c(1.0, 0.0))], |_| 0.0, 0.0, &[]).is_err());
        // non-Hermitian on-site block
        let mut b = CMat::zeros((2, 2));
        b[[0, 1]] = c(1.0, 0.0);
        let bad = b.clone();
        assert!(build_tvw(&lat, 2, &[], move |_| bad.clone(), 0.0, &[]).is_err());
    }

    #[test]
    fn hubbard_style_pair_counts_once() {
        // two internal modes, on-site style coupling via z = (1): check the
        // assembled diagonal against direct occupation counting
        let lat = chain(4);
        let w = 1.3;
        let phi = build_tvw_scalar(&lat, &[], |_| 0.0, 0.0, &[(vec![1], w)]).unwrap();
        let sector = FockSector::new(lat.clone(), 1, 2).unwrap();
        let h = phi.assemble(&sector).unwrap().matrix;
        for (k, &s) in sector.states().iter().enumerate() {
            let mut expect = 0.0;
            for site in lat.sites() {
                let y = lat.add(lat.coords(site), &[1]);
                let sy = lat.site_index(&y).unwrap();
                if s & (1 << site) != 0 && s & (1 << sy) != 0 {
                    expect += w;
                }
            }
            assert_relative_eq!(h[[k, k]].re, expect, epsilon = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn assembled_interactions_are_hermitian(
            t_re in -1.0f64..1.0, t_im in -1.0f64..1.0,
            v in -1.0f64..1.0, w in -1.0f64..1.0, mu in -0.5f64..0.5,
        ) {
            let lat = chain(4);
            let phi = build_tvw_scalar(
                &lat,
                &[(vec![1], c(t_re, t_im))],
                |x| v * x[0] as f64,
                mu,
                &[(vec![1], w)],
            ).unwrap();
            let sector = FockSector::new(lat, 1, 2).unwrap();
            let h = phi.assemble(&sector).unwrap();
            prop_assert!(h.hermitian);
            // triangle inequality against merged local norms
            let total: f64 = phi.merged_norms().unwrap().iter().map(|(_, n)| n).sum();
            let sector_norm = op_norm(&h.matrix);
            prop_assert!(sector_norm <= total + 1e-10);
        }

        #[test]
        fn twist_roundtrip_and_norm_monotonicity(
            alpha in -2.0f64..2.0,
            t_im in -0.5f64..0.5,
        ) {
            let lat = chain(6);
            let phi = build_tvw_scalar(
                &lat,
                &[(vec![1], c(1.0, t_im))],
                |x| 0.3 * x[0] as f64,
                0.1,
                &[(vec![1], 0.4)],
            ).unwrap();
            let sector = FockSector::new(lat, 1, 2).unwrap();
            let h = phi.assemble(&sector).unwrap().matrix;
            let back = phi.twist(&[alpha]).unwrap().twist(&[-alpha]).unwrap()
                .assemble(&sector).unwrap().matrix;
            prop_assert!(max_abs(&(&back - &h)) < 1e-12);

            let zeta = DecayFunction::exponential(0.8).unwrap();
            let plane = LocalizationPlane::trivial(1);
            let n0 = phi.norm(&zeta, 0, &plane).unwrap();
            let n1 = phi.norm(&zeta, 1, &plane).unwrap();
            let n2 = phi.norm(&zeta, 2, &plane).unwrap();
            prop_assert!(n0 <= n1 && n1 <= n2);
        }
    }

    #[test]
    fn ladder_full_and_term_matrix_agree() {
        // the sector matrix is the full-space matrix compressed to the
        // sector basis
        let lat = chain(4);
        let mut phi = Interaction::new(lat.clone(), 1).unwrap();
        phi.add_hop(&[-1], 0, &[0], 0, c(0.9, 0.3)).unwrap();
        let term = &phi.terms()[0];
        let sector = FockSector::new(lat, 1, 2).unwrap();
        let sec = phi.term_matrix(term, &sector).unwrap();
        let m0 = phi.mode_of(0, 0);
        let m1 = phi.mode_of(1, 0);
        let dim = 16;
        let cre = |m: usize| {
            let map = ladder_full(4, m, Ladder::Create);
            let mut out = CMat::zeros((dim, dim));
            for (j, e) in map.iter().enumerate() {
                if let Some((i, s)) = e {
                    out[[*i, j]] = c(*s, 0.0);
                }
            }
            out
        };
        let ann = |m: usize| adjoint(&cre(m));
        let full = cre(m0).dot(&ann(m1)) * c(0.9, 0.3) + cre(m1).dot(&ann(m0)) * c(0.9, -0.3);
        for (a, &sa) in sector.states().iter().enumerate() {
            for (b, &sb) in sector.states().iter().enumerate() {
                assert_eq!(sec[[a, b]], full[[sa as usize, sb as usize]]);
            }
        }
    }
}
