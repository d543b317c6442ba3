//! Torus geometry, localization planes, and the polynomial/exponential decay
//! weights that enter every interaction norm.
//!
//! Sites live in the centered box {−⌈M/2⌉+1, …, ⌊M/2⌋}^d with mod-M
//! arithmetic (for even M this is {−M/2+1, …, M/2}). The linear site index is
//! row-major over coordinates; all fermionic sign conventions downstream hang
//! off this single ordering.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusLattice {
    d: usize,
    m: i64,
    coords: Vec<Vec<i64>>,
}

impl TorusLattice {
    /// `d ≥ 1` spatial dimensions, side length `m ≥ 2`. Even `m` is the
    /// standard case; odd side lengths use the same centered-box convention.
    pub fn new(d: usize, m: i64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
        }
        if m < 2 {
            return Err(Error::InvalidArgument(format!("side length {m} < 2")));
        }
        let n = (m as usize).pow(d as u32);
        let lo = -((m - 1) / 2);
        let mut coords = Vec::with_capacity(n);
        let mut x = vec![lo; d];
        loop {
            coords.push(x.clone());
            // odometer increment, last coordinate fastest (row-major)
            let mut j = d;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                x[j] += 1;
                if x[j] <= lo + m - 1 {
                    break;
                }
                x[j] = lo;
                if j == 0 {
                    return Ok(TorusLattice { d, m, coords });
                }
            }
            if coords.len() == n {
                return Ok(TorusLattice { d, m, coords });
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn coord_lo(&self) -> i64 {
        -((self.m - 1) / 2)
    }

    pub fn coord_hi(&self) -> i64 {
        self.m / 2
    }

    pub fn coords(&self, idx: usize) -> &[i64] {
        &self.coords[idx]
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        0..self.coords.len()
    }

    /// Centered mod-M representative of a single coordinate.
    pub fn wrap(&self, v: i64) -> i64 {
        let r = v.rem_euclid(self.m);
        if r > self.coord_hi() {
            r - self.m
        } else {
            r
        }
    }

    pub fn site_index(&self, x: &[i64]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "site has {} coordinates, lattice dimension is {}",
                x.len(),
                self.d
            )));
        }
        let (lo, hi) = (self.coord_lo(), self.coord_hi());
        let mut idx = 0usize;
        for &c in x {
            if c < lo || c > hi {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {c} outside the centered box [{lo}, {hi}]"
                )));
            }
            idx = idx * self.m as usize + (c - lo) as usize;
        }
        Ok(idx)
    }

    /// Index of the wrapped site, accepting any integer coordinates.
    pub fn site_index_wrapped(&self, x: &[i64]) -> Result<usize> {
        let wrapped: Vec<i64> = x.iter().map(|&c| self.wrap(c)).collect();
        self.site_index(&wrapped)
    }

    /// x +^Λ y, componentwise mod-M representative in the centered box.
    pub fn add(&self, x: &[i64], y: &[i64]) -> Vec<i64> {
        x.iter().zip(y).map(|(&a, &b)| self.wrap(a + b)).collect()
    }

    /// x −^Λ y.
    pub fn sub(&self, x: &[i64], y: &[i64]) -> Vec<i64> {
        x.iter().zip(y).map(|(&a, &b)| self.wrap(a - b)).collect()
    }

    /// ℓ¹ distance on the torus.
    pub fn distance(&self, x: &[i64], y: &[i64]) -> u64 {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| self.wrap(a - b).unsigned_abs())
            .sum()
    }

    pub fn distance_idx(&self, i: usize, j: usize) -> u64 {
        self.distance(&self.coords[i], &self.coords[j])
    }

    /// dist(x, L): ℓ¹ distance of x to the localization plane, counting only
    /// the constrained directions.
    pub fn plane_offset(&self, x: &[i64], plane: &LocalizationPlane) -> u64 {
        x.iter()
            .zip(&plane.anchor)
            .zip(&plane.ell)
            .map(|((&a, &b), &constrained)| {
                if constrained {
                    self.wrap(a - b).unsigned_abs()
                } else {
                    0
                }
            })
            .sum()
    }

    /// d^Λ_L(x,y) = d^Λ(x,y) + dist(x,L) + dist(y,L).
    pub fn plane_distance(&self, x: &[i64], y: &[i64], plane: &LocalizationPlane) -> u64 {
        self.distance(x, y) + self.plane_offset(x, plane) + self.plane_offset(y, plane)
    }

    /// ℓ¹ diameter of a set of sites (max pairwise torus distance).
    pub fn diameter(&self, sites: &[usize]) -> u64 {
        let mut diam = 0;
        for (k, &i) in sites.iter().enumerate() {
            for &j in &sites[k + 1..] {
                diam = diam.max(self.distance_idx(i, j));
            }
        }
        diam
    }
}

/// A (d−|ℓ|)-dimensional plane through `anchor`: directions with `ell[j]`
/// set are constrained. All-zeros `ell` is the trivial plane (distance 0
/// everywhere).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizationPlane {
    pub ell: Vec<bool>,
    pub anchor: Vec<i64>,
}

impl LocalizationPlane {
    pub fn new(ell: Vec<bool>, anchor: Vec<i64>) -> Result<Self> {
        if ell.len() != anchor.len() {
            return Err(Error::InvalidArgument(
                "plane bit vector and anchor must share the lattice dimension".into(),
            ));
        }
        Ok(LocalizationPlane { ell, anchor })
    }

    /// The trivial plane: nothing constrained, distance identically zero.
    pub fn trivial(d: usize) -> Self {
        LocalizationPlane {
            ell: vec![false; d],
            anchor: vec![0; d],
        }
    }

    /// Number of constrained directions |ℓ|.
    pub fn n_constrained(&self) -> usize {
        self.ell.iter().filter(|&&b| b).count()
    }
}

/// Decay profile ζ: bounded by 1, non-increasing, ζ(r+s) ≥ ζ(r)ζ(s),
/// faster than any polynomial. The exponential preset is the workhorse;
/// tabulated profiles are clamped to their last value beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayFunction {
    Exponential { rate: f64 },
    Tabulated { values: Vec<f64> },
}

impl DecayFunction {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay rate must be positive, got {rate}"
            )));
        }
        Ok(DecayFunction::Exponential { rate })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty decay table".into()));
        }
        let mut prev = 1.0_f64;
        for &v in &values {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "decay table entries must lie in (0, 1], got {v}"
                )));
            }
            if v > prev {
                return Err(Error::InvalidArgument(
                    "decay table must be non-increasing".into(),
                ));
            }
            prev = v;
        }
        Ok(DecayFunction::Tabulated { values })
    }

    pub fn eval(&self, r: u64) -> f64 {
        match self {
            DecayFunction::Exponential { rate } => (-rate * r as f64).exp(),
            DecayFunction::Tabulated { values } => {
                let i = (r as usize).min(values.len() - 1);
                values[i]
            }
        }
    }
}

/// F(r) = (1+r)^{−(d+1)} and F_ζ(r) = ζ(r)·F(r).
pub fn decay_weights(r: u64, d: usize, zeta: &DecayFunction) -> (f64, f64) {
    let f = (1.0 + r as f64).powi(-(d as i32 + 1));
    (f, zeta.eval(r) * f)
}

/// Number of points of Z^d at ℓ¹ distance exactly r from the origin.
fn l1_sphere_count(d: usize, r: u64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    // choose k nonzero coordinates (sign each), compose r into k positive parts
    let mut total = 0.0;
    let kmax = d.min(r as usize);
    for k in 1..=kmax {
        total += 2f64.powi(k as i32) * binom(d, k) * binom(r as usize - 1, k - 1);
    }
    total
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Truncated lattice sum ‖F‖_Γ = Σ_{y∈Z^d} F(‖y‖₁), returned with an upper
/// bound on the truncated tail.
pub fn norm_f_gamma(d: usize, cutoff: u64) -> (f64, f64) {
    let mut sum = 0.0;
    for r in 0..=cutoff {
        sum += l1_sphere_count(d, r) * (1.0 + r as f64).powi(-(d as i32 + 1));
    }
    // c_d(r)/(1+r)^{d+1} ≤ 2^{2d−1}/((d−1)!·r²) for r ≥ d, so the tail past
    // the cutoff is below 2^{2d−1}/((d−1)!·cutoff)
    let mut fact = 1.0;
    for i in 1..d {
        fact *= i as f64;
    }
    let tail = 2f64.powi(2 * d as i32 - 1) / (fact * cutoff as f64);
    (sum, tail)
}

/// ‖F‖_Γ at a cutoff giving roughly 1e−6 absolute accuracy.
pub fn norm_f_gamma_default(d: usize) -> f64 {
    norm_f_gamma(d, 4_000_000).0
}
