//! Run configuration: the TOML schema, defaults, and validation. Every
//! validation failure names the offending field with its full TOML path so
//! a bad file can be fixed without reading source code.

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub observables: Vec<ObservableSection>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    AdiabaticError,
    SuperadiabaticDefect,
    CurrentResponse,
    HallConductivity,
    Conductance,
    LrCheck,
    NormCheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::AdiabaticError => "adiabatic_error",
            Kind::SuperadiabaticDefect => "superadiabatic_defect",
            Kind::CurrentResponse => "current_response",
            Kind::HallConductivity => "hall_conductivity",
            Kind::Conductance => "conductance",
            Kind::LrCheck => "lr_check",
            Kind::NormCheck => "norm_check",
        }
    }

    /// Kinds whose records are parameterized by the drive rate ε.
    pub fn uses_eps(self) -> bool {
        matches!(
            self,
            Kind::AdiabaticError | Kind::SuperadiabaticDefect | Kind::CurrentResponse
        )
    }

    /// Kinds that need the time-dependent family H(t) = H₀ + f(t)·H₁.
    pub fn uses_drive(self) -> bool {
        matches!(
            self,
            Kind::AdiabaticError
                | Kind::SuperadiabaticDefect
                | Kind::CurrentResponse
                | Kind::Conductance
        )
    }

    /// Kinds that evaluate on the time grid from [sweep].
    pub fn uses_time_grid(self) -> bool {
        !matches!(self, Kind::HallConductivity | Kind::NormCheck)
    }

    /// Kinds that assemble matrices on a particle-number sector; the others
    /// work at the level of interaction terms and need no particle count.
    pub fn uses_sector(self) -> bool {
        !matches!(self, Kind::LrCheck | Kind::NormCheck)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Kind,
    /// Lattice direction of the probed current (current_response, conductance).
    #[serde(default)]
    pub direction: usize,
    /// Ramp time at which the driven evolution is read off (current_response);
    /// defaults to the midpoint of the sweep window.
    pub t_eval: Option<f64>,
    /// Flux-grid resolution for the curvature sum (hall_conductivity).
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    /// Optional second resolution; the two results must agree.
    pub n_grid_check: Option<usize>,
    /// Twist-grid resolution of the gap scan (hall_conductivity).
    #[serde(default = "default_gap_scan")]
    pub gap_scan: usize,
    /// Half-width of the twisted/current-carrying slab around the cut
    /// (hall_conductivity, conductance).
    #[serde(default)]
    pub cut_radius: i64,
    /// Exponential decay rate of the locality weight (lr_check, norm_check).
    #[serde(default = "default_zeta_rate")]
    pub zeta_rate: f64,
    /// Site-anchor pairs for the commutator checks (lr_check).
    #[serde(default)]
    pub pairs: Vec<(Vec<i64>, Vec<i64>)>,
    /// Constrained lattice directions of the localization plane (norm_check);
    /// omitted means unconstrained.
    pub localized: Option<Vec<bool>>,
    /// Anchor of the localization plane (norm_check); defaults to the origin.
    pub anchor: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Lattice dimension.
    pub d: usize,
    /// Side lengths to sweep; one job per entry.
    pub m: Vec<i64>,
    /// Internal states per site; only 1 is wired up.
    #[serde(default = "default_l_int")]
    pub l_int: usize,
    /// Particle number; mutually exclusive with `filling`.
    pub n: Option<usize>,
    /// Filling fraction; particle number is the nearest integer to
    /// filling · (number of modes).
    pub filling: Option<f64>,
    /// Chemical potential, subtracted from every on-site coefficient.
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub hops: Vec<HopSection>,
    #[serde(default)]
    pub potential: PotentialTable,
    #[serde(default)]
    pub pairs: Vec<PairSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSection {
    /// Bond vector; each source site x couples to x + offset (wrapped).
    pub offset: Vec<i64>,
    /// Amplitude re + i·im on the oriented bond; the reverse orientation
    /// carries the conjugate.
    #[serde(default = "default_one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    /// Extra site-dependent phase landau·x₀ (radians per unit of the first
    /// coordinate); uniform flux needs landau·M ∈ 2πZ.
    #[serde(default)]
    pub landau: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTable {
    #[serde(default)]
    pub uniform: f64,
    /// Coefficient of the checkerboard sign (−1)^(x₁+…+x_d).
    #[serde(default)]
    pub staggered: f64,
    #[serde(default)]
    pub sites: Vec<SiteValue>,
}

impl PotentialTable {
    pub fn is_zero(&self) -> bool {
        self.uniform == 0.0 && self.staggered == 0.0 && self.sites.is_empty()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteValue {
    pub at: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    /// Bond vector of the density-density coupling.
    pub offset: Vec<i64>,
    pub w: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// Switch profile: "flat_exp" (C∞) or "smoothstep" (C²).
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// Driven on-site potential; H(t) = H₀ + f(t)·H₁ with H₁ built from
    /// this table.
    pub potential: PotentialTable,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Drive rates; each must lie in (0, 1].
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_one")]
    pub t_end: f64,
    /// Nodes of the uniform time grid, endpoints included.
    #[serde(default = "default_t_points")]
    pub t_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { eps: Vec::new(), t_start: 0.0, t_end: 1.0, t_points: default_t_points() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    pub name: String,
    pub kind: ObsKind,
    /// Site anchors: two for a hop, one for a number operator.
    pub sites: Vec<Vec<i64>>,
    #[serde(default = "default_one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKind {
    Hop,
    Number,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Global accuracy target of the propagator steps.
    #[serde(default = "default_tol_ode")]
    pub tol_ode: f64,
    /// Near-degeneracy threshold for growing the spectral cluster.
    pub eta_cluster: Option<f64>,
    /// Smallest admissible spectral gap; a gap below this aborts the job.
    #[serde(default = "default_g_min")]
    pub g_min: f64,
    /// Finite-difference step for time derivatives of the expansion
    /// coefficients.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Allowed disagreement between independent response formulas.
    #[serde(default = "default_route_tol")]
    pub route_tol: f64,
    /// Allowed distance of the curvature sum from the nearest integer.
    #[serde(default = "default_integrality_tol")]
    pub integrality_tol: f64,
    /// Roundoff slack granted to the commutator-bound margins.
    #[serde(default = "default_lr_slack")]
    pub lr_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_ode: default_tol_ode(),
            eta_cluster: None,
            g_min: default_g_min(),
            fd_step: default_fd_step(),
            route_tol: default_route_tol(),
            integrality_tol: default_integrality_tol(),
            lr_slack: default_lr_slack(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Record file; stdout when omitted and no --output flag is given.
    pub csv: Option<String>,
    /// Optional run summary (row counts and per-metric ranges).
    pub json: Option<String>,
}

fn default_one() -> f64 {
    1.0
}
fn default_l_int() -> usize {
    1
}
fn default_t_points() -> usize {
    11
}
fn default_n_grid() -> usize {
    24
}
fn default_gap_scan() -> usize {
    6
}
fn default_zeta_rate() -> f64 {
    1.0
}
fn default_schedule() -> String {
    "flat_exp".into()
}
fn default_tol_ode() -> f64 {
    1e-8
}
fn default_g_min() -> f64 {
    1e-6
}
fn default_fd_step() -> f64 {
    1e-3
}
fn default_route_tol() -> f64 {
    1e-9
}
fn default_integrality_tol() -> f64 {
    1e-6
}
fn default_lr_slack() -> f64 {
    1e-9
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config parse error: {e}")))?;
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    /// Structural checks beyond what deserialization can express. The error
    /// string starts with the TOML path of the offending field.
    pub fn validate(&self) -> Result<(), String> {
        let kind = self.experiment.kind;
        let d = self.model.d;

        if !(1..=3).contains(&d) {
            return Err(format!("model.d: lattice dimension must be 1, 2, or 3, got {d}"));
        }
        if self.model.m.is_empty() {
            return Err("model.m: at least one lattice size is required".into());
        }
        for &m in &self.model.m {
            if m < 2 {
                return Err(format!("model.m: sizes must be at least 2, got {m}"));
            }
        }
        if self.model.l_int != 1 {
            return Err(format!(
                "model.l_int: only one internal state per site is wired up, got {}",
                self.model.l_int
            ));
        }
        match (self.model.n, self.model.filling) {
            (Some(_), Some(_)) => {
                return Err("model.n: give either a particle number or a filling, not both".into())
            }
            (None, None) if kind.uses_sector() => {
                return Err(format!(
                    "model.n: a particle number (or model.filling) is required for kind {}",
                    kind.name()
                ))
            }
            (Some(0), _) => return Err("model.n: at least one particle is required".into()),
            (_, Some(f)) if !(0.0..=1.0).contains(&f) || !f.is_finite() => {
                return Err(format!("model.filling: must lie in [0, 1], got {f}"))
            }
            _ => {}
        }
        for (i, hop) in self.model.hops.iter().enumerate() {
            check_offset(&format!("model.hops[{i}].offset"), &hop.offset, d)?;
            for (name, v) in [("re", hop.re), ("im", hop.im), ("landau", hop.landau)] {
                if !v.is_finite() {
                    return Err(format!("model.hops[{i}].{name}: must be finite, got {v}"));
                }
            }
        }
        for (i, pair) in self.model.pairs.iter().enumerate() {
            check_offset(&format!("model.pairs[{i}].offset"), &pair.offset, d)?;
            if !pair.w.is_finite() {
                return Err(format!("model.pairs[{i}].w: must be finite, got {}", pair.w));
            }
        }
        check_potential("model.potential", &self.model.potential, d)?;

        if let Some(drive) = &self.drive {
            if !matches!(drive.schedule.as_str(), "flat_exp" | "smoothstep") {
                return Err(format!(
                    "drive.schedule: expected \"flat_exp\" or \"smoothstep\", got \"{}\"",
                    drive.schedule
                ));
            }
            check_potential("drive.potential", &drive.potential, d)?;
        } else if kind.uses_drive() {
            return Err(format!(
                "drive: a [drive] section is required for kind {}",
                kind.name()
            ));
        }

        if kind.uses_eps() {
            if self.sweep.eps.is_empty() {
                return Err(format!(
                    "sweep.eps: at least one drive rate is required for kind {}",
                    kind.name()
                ));
            }
            for &e in &self.sweep.eps {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(format!("sweep.eps: drive rates must lie in (0, 1], got {e}"));
                }
            }
        }
        if kind.uses_time_grid() {
            if self.sweep.t_points < 2 {
                return Err(format!(
                    "sweep.t_points: the time grid needs at least 2 nodes, got {}",
                    self.sweep.t_points
                ));
            }
            if !(self.sweep.t_end > self.sweep.t_start) {
                return Err(format!(
                    "sweep.t_end: must exceed sweep.t_start, got [{}, {}]",
                    self.sweep.t_start, self.sweep.t_end
                ));
            }
        }

        match kind {
            Kind::AdiabaticError => {
                if self.observables.is_empty() {
                    return Err(
                        "observables: adiabatic_error needs at least one observable".into()
                    );
                }
            }
            Kind::CurrentResponse | Kind::Conductance => {
                if self.experiment.direction >= d {
                    return Err(format!(
                        "experiment.direction: must be below the lattice dimension {d}, got {}",
                        self.experiment.direction
                    ));
                }
                if let Some(t) = self.experiment.t_eval {
                    if !(t > self.sweep.t_start && t <= self.sweep.t_end) {
                        return Err(format!(
                            "experiment.t_eval: must lie in ({}, {}], got {t}",
                            self.sweep.t_start, self.sweep.t_end
                        ));
                    }
                }
            }
            Kind::HallConductivity => {
                if d != 2 {
                    return Err(format!(
                        "model.d: hall_conductivity needs a 2-dimensional lattice, got {d}"
                    ));
                }
                if self.experiment.n_grid < 2 {
                    return Err(format!(
                        "experiment.n_grid: the flux grid needs at least 2 nodes per direction, got {}",
                        self.experiment.n_grid
                    ));
                }
                if let Some(n) = self.experiment.n_grid_check {
                    if n < 2 {
                        return Err(format!(
                            "experiment.n_grid_check: needs at least 2 nodes per direction, got {n}"
                        ));
                    }
                }
                if self.experiment.gap_scan < 2 {
                    return Err(format!(
                        "experiment.gap_scan: the gap scan needs at least 2 nodes per direction, got {}",
                        self.experiment.gap_scan
                    ));
                }
            }
            Kind::LrCheck => {
                if self.experiment.pairs.is_empty() {
                    return Err("experiment.pairs: lr_check needs at least one site pair".into());
                }
                for (i, (a, b)) in self.experiment.pairs.iter().enumerate() {
                    for (side, x) in [("0", a), ("1", b)] {
                        if x.len() != d {
                            return Err(format!(
                                "experiment.pairs[{i}][{side}]: anchor must have {d} coordinates, got {}",
                                x.len()
                            ));
                        }
                    }
                    if a == b {
                        return Err(format!(
                            "experiment.pairs[{i}]: the two anchors must differ"
                        ));
                    }
                }
                if self.sweep.t_start < 0.0 {
                    return Err(format!(
                        "sweep.t_start: commutator samples need non-negative times, got {}",
                        self.sweep.t_start
                    ));
                }
            }
            Kind::NormCheck => {
                if let Some(ell) = &self.experiment.localized {
                    if ell.len() != d {
                        return Err(format!(
                            "experiment.localized: needs {d} entries, got {}",
                            ell.len()
                        ));
                    }
                }
                if let Some(anchor) = &self.experiment.anchor {
                    if anchor.len() != d {
                        return Err(format!(
                            "experiment.anchor: needs {d} coordinates, got {}",
                            anchor.len()
                        ));
                    }
                }
            }
            Kind::SuperadiabaticDefect => {}
        }
        if matches!(kind, Kind::LrCheck | Kind::NormCheck) && !(self.experiment.zeta_rate > 0.0) {
            return Err(format!(
                "experiment.zeta_rate: decay rate must be positive, got {}",
                self.experiment.zeta_rate
            ));
        }

        let mut seen = std::collections::BTreeSet::new();
        for (i, obs) in self.observables.iter().enumerate() {
            if obs.name.is_empty() {
                return Err(format!("observables[{i}].name: must not be empty"));
            }
            if !seen.insert(obs.name.clone()) {
                return Err(format!("observables[{i}].name: duplicate name \"{}\"", obs.name));
            }
            let want = match obs.kind {
                ObsKind::Hop => 2,
                ObsKind::Number => 1,
            };
            if obs.sites.len() != want {
                return Err(format!(
                    "observables[{i}].sites: {} needs exactly {want} site(s), got {}",
                    match obs.kind {
                        ObsKind::Hop => "a hop",
                        ObsKind::Number => "a number operator",
                    },
                    obs.sites.len()
                ));
            }
            for (j, x) in obs.sites.iter().enumerate() {
                if x.len() != d {
                    return Err(format!(
                        "observables[{i}].sites[{j}]: site must have {d} coordinates, got {}",
                        x.len()
                    ));
                }
            }
            if obs.kind == ObsKind::Number && obs.im != 0.0 {
                return Err(format!(
                    "observables[{i}].im: a number operator must have a real coefficient"
                ));
            }
        }

        let tol = &self.tolerances;
        for (name, v) in [
            ("tol_ode", tol.tol_ode),
            ("fd_step", tol.fd_step),
            ("route_tol", tol.route_tol),
            ("integrality_tol", tol.integrality_tol),
        ] {
            if !(v > 0.0) {
                return Err(format!("tolerances.{name}: must be positive, got {v}"));
            }
        }
        if !(tol.g_min >= 0.0) {
            return Err(format!("tolerances.g_min: must be non-negative, got {}", tol.g_min));
        }
        if !(tol.lr_slack >= 0.0) {
            return Err(format!(
                "tolerances.lr_slack: must be non-negative, got {}",
                tol.lr_slack
            ));
        }
        if let Some(eta) = tol.eta_cluster {
            if !(eta > 0.0) {
                return Err(format!("tolerances.eta_cluster: must be positive, got {eta}"));
            }
        }
        Ok(())
    }

    /// Ramp time the driven evolution is read off at.
    pub fn t_eval(&self) -> f64 {
        self.experiment
            .t_eval
            .unwrap_or_else(|| 0.5 * (self.sweep.t_start + self.sweep.t_end))
    }
}

fn check_offset(path: &str, offset: &[i64], d: usize) -> Result<(), String> {
    if offset.len() != d {
        return Err(format!("{path}: bond vector must have {d} coordinates, got {}", offset.len()));
    }
    if offset.iter().all(|&v| v == 0) {
        return Err(format!("{path}: bond vector must not be zero"));
    }
    Ok(())
}

fn check_potential(path: &str, pot: &PotentialTable, d: usize) -> Result<(), String> {
    for (name, v) in [("uniform", pot.uniform), ("staggered", pot.staggered)] {
        if !v.is_finite() {
            return Err(format!("{path}.{name}: must be finite, got {v}"));
        }
    }
    for (i, site) in pot.sites.iter().enumerate() {
        if site.at.len() != d {
            return Err(format!(
                "{path}.sites[{i}].at: site must have {d} coordinates, got {}",
                site.at.len()
            ));
        }
        if !site.value.is_finite() {
            return Err(format!("{path}.sites[{i}].value: must be finite, got {}", site.value));
        }
    }
    Ok(())
}
