//! Eigendecompositions with cluster bookkeeping: spectral projectors that
//! never split near-degenerate levels, reduced resolvents, projector
//! derivatives, and the inverse Liouvillian in its exact-blockwise and
//! frequency-filtered forms.

use crate::linalg::{eigh, identity};
use crate::{C64, CMat, Error, Result};

/// Which part of the spectrum forms the tracked cluster.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSelector {
    /// The lowest eigenvalue (grown across near-degeneracies).
    Ground,
    /// All eigenvalues in [lo, hi].
    Window { lo: f64, hi: f64 },
    /// Explicit contiguous eigenvalue indices (ascending order).
    Explicit(Vec<usize>),
}

/// Full eigendecomposition of a Hermitian matrix together with a gapped
/// eigenvalue cluster.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: CMat,
    /// Cluster member indices, contiguous and ascending.
    pub cluster: Vec<usize>,
    /// Distance from the cluster to the rest of the spectrum.
    pub gap: f64,
    /// Spread of the cluster eigenvalues.
    pub width: f64,
    pub e_min: f64,
    pub e_max: f64,
}

impl SpectralData {
    /// Decomposes `h` and selects a cluster, growing it over any spectral
    /// step of size ≤ η (default 1e−8·max(|E|, 1)) so near-degenerate levels
    /// are never split. Fails with `GapClosed` when the cluster swallows the
    /// whole spectrum.
    pub fn new(h: &CMat, selector: &ClusterSelector, eta: Option<f64>) -> Result<Self> {
        let (values, vectors) = eigh(h)?;
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let scale = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let eta = eta.unwrap_or(1e-8 * scale.max(1.0));
        let (mut lo, mut hi) = match selector {
            ClusterSelector::Ground => (0usize, 0usize),
            ClusterSelector::Window { lo, hi } => {
                if lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "empty energy window [{lo}, {hi}]"
                    )));
                }
                let idx: Vec<usize> = (0..n).filter(|&i| values[i] >= *lo && values[i] <= *hi).collect();
                match (idx.first(), idx.last()) {
                    (Some(&a), Some(&b)) => (a, b),
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "no eigenvalues in the window [{lo}, {hi}]"
                        )))
                    }
                }
            }
            ClusterSelector::Explicit(idx) => {
                if idx.is_empty() {
                    return Err(Error::InvalidArgument("empty cluster".into()));
                }
                let contiguous = idx.windows(2).all(|w| w[1] == w[0] + 1);
                if !contiguous {
                    return Err(Error::InvalidArgument(
                        "cluster indices must be contiguous and ascending".into(),
                    ));
                }
                if *idx.last().unwrap() >= n {
                    return Err(Error::InvalidArgument(format!(
                        "cluster index {} out of range (dim {n})",
                        idx.last().unwrap()
                    )));
                }
                (idx[0], *idx.last().unwrap())
            }
        };
        // absorb near-degenerate neighbors
        while lo > 0 && values[lo] - values[lo - 1] <= eta {
            lo -= 1;
        }
        while hi + 1 < n && values[hi + 1] - values[hi] <= eta {
            hi += 1;
        }
        if lo == 0 && hi == n - 1 {
            return Err(Error::GapClosed {
                t: None,
                gap: 0.0,
                min: eta,
                spectrum: values,
            });
        }
        let gap_below = if lo == 0 {
            f64::INFINITY
        } else {
            values[lo] - values[lo - 1]
        };
        let gap_above = if hi == n - 1 {
            f64::INFINITY
        } else {
            values[hi + 1] - values[hi]
        };
        Ok(SpectralData {
            e_min: values[0],
            e_max: values[n - 1],
            gap: gap_below.min(gap_above),
            width: values[hi] - values[lo],
            cluster: (lo..=hi).collect(),
            values,
            vectors,
        })
    }

    pub fn ground(h: &CMat) -> Result<Self> {
        Self::new(h, &ClusterSelector::Ground, None)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster.len()
    }

    pub fn in_cluster(&self, idx: usize) -> bool {
        idx >= self.cluster[0] && idx <= *self.cluster.last().unwrap()
    }

    /// Lowest cluster eigenvalue (the reference energy for a flat cluster).
    pub fn e_cluster(&self) -> f64 {
        self.values[self.cluster[0]]
    }

    pub fn to_eigenbasis(&self, b: &CMat) -> CMat {
        let vt = crate::linalg::adjoint(&self.vectors);
        vt.dot(b).dot(&self.vectors)
    }

    pub fn from_eigenbasis(&self, bt: &CMat) -> CMat {
        let vt = crate::linalg::adjoint(&self.vectors);
        self.vectors.dot(bt).dot(&vt)
    }

    /// Spectral projector onto the cluster.
    pub fn projector(&self) -> CMat {
        let n = self.dim();
        let mut p = CMat::zeros((n, n));
        for &i in &self.cluster {
            let v = self.vectors.column(i);
            for r in 0..n {
                for c in 0..n {
                    p[[r, c]] += v[r] * v[c].conj();
                }
            }
        }
        p
    }

    /// Orthonormal frame spanning the cluster (dim × cluster_size).
    pub fn cluster_frame(&self) -> CMat {
        let n = self.dim();
        let q = self.cluster.len();
        let mut f = CMat::zeros((n, q));
        for (k, &i) in self.cluster.iter().enumerate() {
            for r in 0..n {
                f[[r, k]] = self.vectors[[r, i]];
            }
        }
        f
    }

    /// Reduced resolvent R = Σ_{m∉cluster} P_m / (E_m − e). A cluster of
    /// nonzero width needs an explicit reference energy.
    pub fn reduced_resolvent(&self, e_ref: Option<f64>) -> Result<CMat> {
        let scale = self.e_max.abs().max(self.e_min.abs()).max(1.0);
        let e = match e_ref {
            Some(e) => e,
            None => {
                // numerically degenerate clusters carry roundoff-scale width
                if self.width > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "cluster of width {:.3e} needs an explicit reference energy",
                        self.width
                    )));
                }
                self.e_cluster()
            }
        };
        let n = self.dim();
        let mut rt = CMat::zeros((n, n));
        for m in 0..n {
            if self.in_cluster(m) {
                continue;
            }
            let denom = self.values[m] - e;
            if denom.abs() < 1e-14 * scale {
                return Err(Error::InvalidArgument(format!(
                    "reference energy {e} collides with eigenvalue {}",
                    self.values[m]
                )));
            }
            rt[[m, m]] = C64::new(1.0 / denom, 0.0);
        }
        Ok(self.from_eigenbasis(&rt))
    }

    /// Derivative of the cluster projector along Ḣ: cross-block first-order
    /// perturbation weights 1/(E_cluster − E_other).
    pub fn projector_derivative(&self, hdot: &CMat) -> CMat {
        let bt = self.to_eigenbasis(hdot);
        let n = self.dim();
        let mut out = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let (ci, cj) = (self.in_cluster(i), self.in_cluster(j));
                if ci && !cj {
                    out[[i, j]] = bt[[i, j]] / (self.values[i] - self.values[j]);
                } else if !ci && cj {
                    out[[i, j]] = bt[[i, j]] / (self.values[j] - self.values[i]);
                }
            }
        }
        self.from_eigenbasis(&out)
    }
}

/// ℒ_H(A) = −i[H, A].
pub fn liouvillian(h: &CMat, a: &CMat) -> CMat {
    crate::linalg::commutator(h, a).mapv(|z| z * C64::new(0.0, -1.0))
}

/// How the Liouvillian is inverted on the off-diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseMode {
    /// Weight 1 exactly when one index is in the cluster and one outside.
    ExactBlockwise,
    /// Smooth frequency filter: weight rises 0 → 1 on [δ̃, gap] as a quintic
    /// smoothstep and is 1 beyond the gap. Requires width ≤ δ̃ < gap.
    Filter { delta_tilde: f64 },
}

/// Quintic smoothstep filter value at frequency |ω|: 0 below δ̃, 1 above g.
pub fn gap_filter(omega_abs: f64, delta_tilde: f64, gap: f64) -> f64 {
    let s = (omega_abs - delta_tilde) / (gap - delta_tilde);
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (6.0 * s * s - 15.0 * s + 10.0)
    }
}

/// Inverse Liouvillian: in the eigenbasis each entry is scaled by
/// −i c(|ω|)/ω with ω the frequency difference and c the mode's weight.
pub fn inverse_liouvillian(data: &SpectralData, b: &CMat, mode: &InverseMode) -> Result<CMat> {
    if let InverseMode::Filter { delta_tilde } = mode {
        if !(*delta_tilde >= data.width && *delta_tilde < data.gap) {
            return Err(Error::InvalidArgument(format!(
                "filter threshold {delta_tilde:.3e} must lie in [width {:.3e}, gap {:.3e})",
                data.width, data.gap
            )));
        }
    }
    let bt = data.to_eigenbasis(b);
    let n = data.dim();
    let mut out = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let omega = data.values[j] - data.values[i];
            let c = match mode {
                InverseMode::ExactBlockwise => {
                    if data.in_cluster(i) != data.in_cluster(j) {
                        1.0
                    } else {
                        0.0
                    }
                }
                InverseMode::Filter { delta_tilde } => {
                    gap_filter(omega.abs(), *delta_tilde, data.gap)
                }
            };
            if c != 0.0 {
                debug_assert!(omega != 0.0, "nonzero weight at zero frequency");
                out[[i, j]] = bt[[i, j]] * C64::new(0.0, -c / omega);
            }
        }
    }
    Ok(data.from_eigenbasis(&out))
}

/// The map B ↦ Σ c(ω) P_i B P_j the inverse Liouvillian actually inverts:
/// blockwise this is the off-diagonal part, filtered it is the band-pass.
pub fn weighted_offdiagonal(data: &SpectralData, b: &CMat, mode: &InverseMode) -> Result<CMat> {
    let bt = data.to_eigenbasis(b);
    let n = data.dim();
    let mut out = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let c = match mode {
                InverseMode::ExactBlockwise => {
                    if data.in_cluster(i) != data.in_cluster(j) {
                        1.0
                    } else {
                        0.0
                    }
                }
                InverseMode::Filter { delta_tilde } => {
                    gap_filter((data.values[j] - data.values[i]).abs(), *delta_tilde, data.gap)
                }
            };
            out[[i, j]] = bt[[i, j]] * c;
        }
    }
    Ok(data.from_eigenbasis(&out))
}

/// The block-off-diagonal part P B P⊥ + P⊥ B P.
pub fn offdiagonal_part(data: &SpectralData, b: &CMat) -> CMat {
    let p = data.projector();
    let q = identity(data.dim()) - &p;
    p.dot(b).dot(&q) + q.dot(b).dot(&p)
}
