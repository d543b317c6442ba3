//! The experiment drivers: each run kind maps a configuration to a flat
//! list of measured records. One job covers one lattice size (the norm
//! check, which compares sizes against each other, runs as a single job).

use adiflow::adiabatic::{first_order, k2_parallel, superadiabatic_defect};
use adiflow::bounds::{lr_check, norm_volume_check};
use adiflow::lattice::{DecayFunction, LocalizationPlane};
use adiflow::linalg::{adjoint, op_norm};
use adiflow::propagate::{evolve, evolve_times, StepControl};
use adiflow::response::{
    chern_from_family, current_expectation, driven_response, parallel_state, projector_gradient,
    response_curvature, response_eigensum, response_resolvent,
};
use adiflow::spectral::{ClusterSelector, InverseMode, SpectralData};
use adiflow::{C64, CMat};

use crate::config::{Config, Kind};
use crate::model::{LatticeModel, SectorModel};
use crate::records::Row;
use crate::CliError;

#[derive(Debug, Clone)]
pub enum Job {
    PerSize(i64),
    AllSizes,
}

impl Job {
    pub fn label(&self) -> String {
        match self {
            Job::PerSize(m) => format!("M = {m}"),
            Job::AllSizes => "all sizes".into(),
        }
    }
}

pub fn plan(cfg: &Config) -> Vec<Job> {
    match cfg.experiment.kind {
        Kind::NormCheck => vec![Job::AllSizes],
        _ => cfg.model.m.iter().map(|&m| Job::PerSize(m)).collect(),
    }
}

/// Rows produced before the failure (if any) are kept, so a partial job
/// still contributes its finished records to the output.
pub struct JobOutput {
    pub rows: Vec<Row>,
    pub error: Option<CliError>,
}

pub fn run_job(cfg: &Config, job: &Job) -> JobOutput {
    let mut rows = Vec::new();
    let result = match (cfg.experiment.kind, job) {
        (Kind::AdiabaticError, Job::PerSize(m)) => adiabatic_error(cfg, *m, &mut rows),
        (Kind::SuperadiabaticDefect, Job::PerSize(m)) => defect_scan(cfg, *m, &mut rows),
        (Kind::CurrentResponse, Job::PerSize(m)) => current_response(cfg, *m, &mut rows),
        (Kind::HallConductivity, Job::PerSize(m)) => hall_conductivity(cfg, *m, &mut rows),
        (Kind::Conductance, Job::PerSize(m)) => conductance(cfg, *m, &mut rows),
        (Kind::LrCheck, Job::PerSize(m)) => lr_margins(cfg, *m, &mut rows),
        (Kind::NormCheck, _) => norm_table(cfg, &mut rows),
        (_, Job::AllSizes) => unreachable!("only the norm check plans a joint job"),
    };
    JobOutput { rows, error: result.err() }
}

fn t_grid(cfg: &Config) -> Vec<f64> {
    let n = cfg.sweep.t_points;
    let (a, b) = (cfg.sweep.t_start, cfg.sweep.t_end);
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn ode_ctrl(cfg: &Config) -> StepControl {
    StepControl { tol: cfg.tolerances.tol_ode, ..StepControl::default() }
}

fn heisenberg(u: &CMat, b: &CMat) -> CMat {
    adjoint(u).dot(b).dot(u)
}

fn numerical(m: i64, t: Option<f64>, eps: Option<f64>) -> impl Fn(adiflow::Error) -> CliError {
    move |e| {
        let mut ctx = format!("M = {m}");
        if let Some(eps) = eps {
            ctx.push_str(&format!(", eps = {eps}"));
        }
        if let Some(t) = t {
            ctx.push_str(&format!(", t = {t}"));
        }
        CliError::Numerical(format!("{ctx}: {e}"))
    }
}

/// Spectral data at one ramp time, with the configured gap floor enforced.
fn spectral_at(
    cfg: &Config,
    model: &SectorModel,
    t: f64,
) -> Result<SpectralData, CliError> {
    let m = model.base.m;
    let data = SpectralData::new(
        &model.h(t).map_err(numerical(m, Some(t), None))?,
        &ClusterSelector::Ground,
        cfg.tolerances.eta_cluster,
    )
    .map_err(numerical(m, Some(t), None))?;
    if data.gap < cfg.tolerances.g_min {
        return Err(CliError::Numerical(format!(
            "M = {m}, t = {t}: spectral gap {:.6e} below the floor g_min = {:.6e}",
            data.gap, cfg.tolerances.g_min
        )));
    }
    Ok(data)
}

fn coords_label(x: &[i64]) -> String {
    let inner: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", inner.join(","))
}

/// Heisenberg evolution of each observable under the driven dynamics,
/// compared at every grid node against the adiabatic expansion: order 0 is
/// plain parallel transport, order 1 adds the first dressing correction.
/// Errors are measured inside the initial spectral cluster.
fn adiabatic_error(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = SectorModel::build(cfg, m)?;
    let grid = t_grid(cfg);
    let ctrl = ode_ctrl(cfg);
    let sel = ClusterSelector::Ground;
    let mode = InverseMode::ExactBlockwise;
    let eta = cfg.tolerances.eta_cluster;
    let hf = |t: f64| model.h(t);
    let hdf = |t: f64| model.hdot(t);

    // static pieces at the grid nodes; the gap floor is enforced here
    let mut pdots = Vec::with_capacity(grid.len());
    let mut resolvents = Vec::with_capacity(grid.len());
    let mut p0 = None;
    for &t in &grid {
        let data = spectral_at(cfg, &model, t)?;
        let pdot = data.projector_derivative(&hdf(t).map_err(numerical(m, Some(t), None))?);
        let r = data.reduced_resolvent(None).map_err(numerical(m, Some(t), None))?;
        if p0.is_none() {
            p0 = Some(data.projector());
        }
        pdots.push(pdot);
        resolvents.push(r);
    }
    let p0 = p0.expect("grid is non-empty");

    let u_par = evolve_times(
        &|t| Ok(first_order(&hf(t)?, &hdf(t)?, &sel, eta, &mode)?.k_parallel),
        1.0,
        &grid,
        &ctrl,
    )
    .map_err(numerical(m, None, None))?;

    let observables: Vec<(String, CMat)> = cfg
        .observables
        .iter()
        .map(|obs| Ok((obs.name.clone(), model.observable(obs)?)))
        .collect::<Result<_, CliError>>()?;

    for (name, b) in &observables {
        // B·RṖ − ṖR·B at each node feeds the order-1 comparison
        let cross: Vec<CMat> = grid
            .iter()
            .enumerate()
            .map(|(k, _)| {
                b.dot(&resolvents[k]).dot(&pdots[k]) - pdots[k].dot(&resolvents[k]).dot(b)
            })
            .collect();
        let b_par: Vec<CMat> = u_par.iter().map(|u| heisenberg(u, b)).collect();

        for &eps in &cfg.sweep.eps {
            let u = evolve_times(&hf, eps, &grid, &ctrl).map_err(numerical(m, None, Some(eps)))?;
            let u_par1 = evolve_times(
                &|t| {
                    let fo = first_order(&hf(t)?, &hdf(t)?, &sel, eta, &mode)?;
                    let k2 = k2_parallel(&fo.data, &fo.pdot, None)?;
                    Ok(&fo.k_parallel + &k2.mapv(|z| z * eps))
                },
                1.0,
                &grid,
                &ctrl,
            )
            .map_err(numerical(m, None, Some(eps)))?;

            let (mut sup0, mut sup1) = (0.0f64, 0.0f64);
            for (k, &t) in grid.iter().enumerate() {
                let driven = heisenberg(&u[k], b);
                let err0 = op_norm(&p0.dot(&(&driven - &b_par[k])).dot(&p0));
                let order1 = heisenberg(&u_par1[k], b)
                    + heisenberg(&u_par[k], &cross[k]).mapv(|z| z * C64::new(0.0, eps));
                let err1 = op_norm(&p0.dot(&(&driven - &order1)).dot(&p0));
                sup0 = sup0.max(err0);
                sup1 = sup1.max(err1);
                rows.push(Row::new(kind, "err0", err0).m(m).eps(eps).t(t).detail(name.clone()));
                rows.push(Row::new(kind, "err1", err1).m(m).eps(eps).t(t).detail(name.clone()));
            }
            rows.push(Row::new(kind, "err0_sup", sup0).m(m).eps(eps).detail(name.clone()));
            rows.push(Row::new(kind, "err1_sup", sup1).m(m).eps(eps).detail(name.clone()));
        }
    }
    Ok(())
}

/// Norm of the order-2 dressed defect (iε∂ₜ − ad_H applied to the dressed
/// projector) across the time grid, for each drive rate.
fn defect_scan(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = SectorModel::build(cfg, m)?;
    let grid = t_grid(cfg);
    let sel = ClusterSelector::Ground;
    let mode = InverseMode::ExactBlockwise;
    let eta = cfg.tolerances.eta_cluster;
    let fd = cfg.tolerances.fd_step;
    let hf = |t: f64| model.h(t);
    let hdf = |t: f64| model.hdot(t);

    for &t in &grid {
        spectral_at(cfg, &model, t)?;
    }
    for &eps in &cfg.sweep.eps {
        let mut worst = 0.0f64;
        for &t in &grid {
            let d = superadiabatic_defect(&hf, &hdf, t, eps, &sel, eta, &mode, fd)
                .map_err(numerical(m, Some(t), Some(eps)))?;
            worst = worst.max(d);
            rows.push(Row::new(kind, "defect", d).m(m).eps(eps).t(t));
        }
        rows.push(Row::new(kind, "defect_max", worst).m(m).eps(eps));
    }
    Ok(())
}

/// Linear response coefficient of the current along the drive, through three
/// independent static formulas at every grid node, plus the actual driven
/// evolution at the evaluation time. The driven current is compared as the
/// excess over the instantaneous ground-state current, which removes any
/// persistent current the model carries at equilibrium.
fn current_response(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = SectorModel::build(cfg, m)?;
    let grid = t_grid(cfg);
    let ctrl = ode_ctrl(cfg);
    let eta = cfg.tolerances.eta_cluster;
    let route_tol = cfg.tolerances.route_tol;
    let direction = cfg.experiment.direction;
    let volume = model.volume;
    let usage = |e: adiflow::Error| CliError::Usage(format!("M = {m}: {e}"));

    // the drive is potential-only, so the current operator is static
    let j = model
        .base
        .phi0
        .current(direction)
        .map_err(usage)?
        .assemble(&model.sector)
        .map_err(usage)?
        .matrix;
    let h1 = model.h1.clone().expect("validated: driven kinds carry a drive");

    let response_at = |t: f64| -> Result<f64, CliError> {
        let data = spectral_at(cfg, &model, t)?;
        let pdot =
            data.projector_derivative(&model.hdot(t).map_err(numerical(m, Some(t), None))?);
        response_resolvent(&data, &j, &pdot, volume, None).map_err(numerical(m, Some(t), None))
    };

    for &t in &grid {
        let data = spectral_at(cfg, &model, t)?;
        let err = numerical(m, Some(t), None);
        let hdot = model.hdot(t).map_err(&err)?;
        let pdot = data.projector_derivative(&hdot);
        let f1 = response_resolvent(&data, &j, &pdot, volume, None).map_err(&err)?;

        // curvature route: differentiate the projector along a gauge twist
        // of the current's direction at frozen ramp time
        let (f_t, _) = model.base.ramp(t);
        let twisted = |alpha: f64| -> adiflow::Result<CMat> {
            let mut twist = vec![0.0; cfg.model.d];
            twist[direction] = alpha;
            let h_alpha =
                model.base.phi0.twist(&twist)?.assemble(&model.sector)?.matrix;
            Ok(&h_alpha + &h1.mapv(|z| z * f_t))
        };
        let dp_dalpha = projector_gradient(&twisted, &ClusterSelector::Ground, eta, None)
            .map_err(&err)?;
        let f2 = response_curvature(&data, &pdot, &dp_dalpha, volume).map_err(&err)?;
        let fe = response_eigensum(&data, &j, &hdot, volume).map_err(&err)?;

        rows.push(Row::new(kind, "f1", f1).m(m).t(t));
        rows.push(Row::new(kind, "f2", f2).m(m).t(t));
        rows.push(Row::new(kind, "f_eigensum", fe).m(m).t(t));
        let d12 = (f1 - f2).abs();
        let d1e = (f1 - fe).abs();
        rows.push(
            Row::new(kind, "route_gap_curvature", d12).m(m).t(t).check(route_tol, d12 <= route_tol),
        );
        rows.push(
            Row::new(kind, "route_gap_eigensum", d1e).m(m).t(t).check(route_tol, d1e <= route_tol),
        );
    }

    // driven evolution, read off at the evaluation time
    let t_eval = cfg.t_eval();
    let f1_star = response_at(t_eval)?;
    let data_star = spectral_at(cfg, &model, t_eval)?;
    let stationary = current_expectation(&parallel_state(&data_star), &j, volume);
    rows.push(Row::new(kind, "j_stationary", stationary).m(m).t(t_eval));
    let data0 = spectral_at(cfg, &model, cfg.sweep.t_start)?;
    let rho0 = parallel_state(&data0);
    let hf = |t: f64| model.h(t);
    for &eps in &cfg.sweep.eps {
        let u = evolve(&hf, eps, cfg.sweep.t_start, t_eval, &ctrl)
            .map_err(numerical(m, None, Some(eps)))?;
        let raw = driven_response(&u, &rho0, &j, eps, volume);
        let excess = raw - stationary / eps;
        rows.push(Row::new(kind, "j_driven", raw).m(m).eps(eps).t(t_eval));
        rows.push(Row::new(kind, "j_excess", excess).m(m).eps(eps).t(t_eval));
        rows.push(Row::new(kind, "j_offset", (excess - f1_star).abs()).m(m).eps(eps).t(t_eval));
    }
    Ok(())
}

/// Curvature sum of the ground-state family over the flux torus: gap scan
/// first, then the integer-valued invariant at one or two grid resolutions.
/// The associated transverse conductivity is the invariant over 2π.
fn hall_conductivity(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = SectorModel::build(cfg, m)?;
    let radius = cfg.experiment.cut_radius;
    let eta = cfg.tolerances.eta_cluster;
    let phi = &model.base.phi0;
    let sector = &model.sector;
    let h = |b1: f64, b2: f64| -> adiflow::Result<CMat> {
        Ok(phi.twist_cut(0, b1, radius)?.twist_cut(1, b2, radius)?.assemble(sector)?.matrix)
    };

    let n_scan = cfg.experiment.gap_scan;
    let tau = std::f64::consts::TAU;
    let mut min_gap = f64::INFINITY;
    for i in 0..n_scan {
        for jj in 0..n_scan {
            let b1 = tau * i as f64 / n_scan as f64;
            let b2 = tau * jj as f64 / n_scan as f64;
            let data = SpectralData::new(
                &h(b1, b2).map_err(numerical(m, None, None))?,
                &ClusterSelector::Ground,
                eta,
            )
            .map_err(numerical(m, None, None))?;
            min_gap = min_gap.min(data.gap);
        }
    }
    let g_min = cfg.tolerances.g_min;
    let gapped = min_gap >= g_min;
    rows.push(Row::new(kind, "twist_min_gap", min_gap).m(m).check(g_min, gapped));
    if !gapped {
        return Err(CliError::Numerical(format!(
            "M = {m}: twist family is nearly gapless (min gap {min_gap:.6e} below g_min = \
             {g_min:.6e}); the curvature sum is not defined"
        )));
    }

    let tol = cfg.tolerances.integrality_tol;
    let n1 = cfg.experiment.n_grid;
    let c1 = chern_from_family(&h, &ClusterSelector::Ground, eta, n1)
        .map_err(numerical(m, None, None))?;
    let integral = (c1 - c1.round()).abs() <= tol;
    rows.push(Row::new(kind, "chern", c1).m(m).detail(format!("grid={n1}")).check(tol, integral));
    rows.push(Row::new(kind, "hall_sigma", c1 / tau).m(m).detail(format!("grid={n1}")));
    if let Some(n2) = cfg.experiment.n_grid_check {
        let c2 = chern_from_family(&h, &ClusterSelector::Ground, eta, n2)
            .map_err(numerical(m, None, None))?;
        rows.push(
            Row::new(kind, "chern", c2)
                .m(m)
                .detail(format!("grid={n2}"))
                .check(tol, (c2 - c2.round()).abs() <= tol),
        );
        let drift = (c2 - c1).abs();
        rows.push(
            Row::new(kind, "chern_drift", drift)
                .m(m)
                .detail(format!("grid={n1}->{n2}"))
                .check(tol, drift <= tol),
        );
    }
    Ok(())
}

/// Response coefficient of the current through a fixed cut to the potential
/// ramp, across the time grid. Unlike the bulk response this is not volume
/// normalized: the record is the raw cut-current coefficient.
fn conductance(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = SectorModel::build(cfg, m)?;
    let grid = t_grid(cfg);
    let direction = cfg.experiment.direction;
    let usage = |e: adiflow::Error| CliError::Usage(format!("M = {m}: {e}"));

    let j_cut = model
        .base
        .phi0
        .current_through_cut(direction, cfg.experiment.cut_radius)
        .map_err(usage)?
        .assemble(&model.sector)
        .map_err(usage)?
        .matrix;

    for &t in &grid {
        let data = spectral_at(cfg, &model, t)?;
        let err = numerical(m, Some(t), None);
        let pdot = data.projector_derivative(&model.hdot(t).map_err(&err)?);
        let g = response_resolvent(&data, &j_cut, &pdot, 1.0, None).map_err(&err)?;
        rows.push(Row::new(kind, "conductance", g).m(m).t(t));
    }
    Ok(())
}

/// Commutator bound for density observables at the configured anchor pairs:
/// the Heisenberg commutator norm is measured at every grid time against
/// both forms of the locality bound, and the margins must stay non-negative.
fn lr_margins(cfg: &Config, m: i64, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let model = LatticeModel::build(cfg, m)?;
    let times = t_grid(cfg);
    let zeta = DecayFunction::exponential(cfg.experiment.zeta_rate)
        .map_err(|e| CliError::Usage(format!("experiment.zeta_rate: {e}")))?;
    let slack = cfg.tolerances.lr_slack;

    let mut velocity_logged = false;
    for (xa, xb) in &cfg.experiment.pairs {
        let a = model.density(xa)?;
        let b = model.density(xb)?;
        let label = format!("a={} b={}", coords_label(xa), coords_label(xb));
        let report = lr_check(&model.phi0, &a, &b, &times, &zeta).map_err(|e| {
            CliError::Numerical(format!("M = {m}, pair {label}: {e}"))
        })?;
        if !velocity_logged {
            if let Some(v) = report.velocity {
                rows.push(Row::new(kind, "lr_velocity", v).m(m));
            }
            velocity_logged = true;
        }
        for s in &report.samples {
            rows.push(
                Row::new(kind, "lr_margin", s.margin)
                    .m(m)
                    .t(s.t)
                    .detail(label.clone())
                    .check(slack, s.margin >= -slack),
            );
            rows.push(
                Row::new(kind, "lr_margin_sharp", s.margin_sharp)
                    .m(m)
                    .t(s.t)
                    .detail(label.clone())
                    .check(slack, s.margin_sharp >= -slack),
            );
        }
        rows.push(
            Row::new(kind, "lr_min_margin", report.min_margin)
                .m(m)
                .detail(label)
                .check(slack, report.min_margin >= -slack),
        );
    }
    Ok(())
}

/// Operator norm of the assembled interaction against the term-norm times
/// the volume of the unconstrained directions, across all configured sizes.
/// A bounded ratio is the claim; the table records it size by size.
fn norm_table(cfg: &Config, rows: &mut Vec<Row>) -> Result<(), CliError> {
    let kind = cfg.experiment.kind.name();
    let d = cfg.model.d;
    let plane = match (&cfg.experiment.localized, &cfg.experiment.anchor) {
        (None, None) => LocalizationPlane::trivial(d),
        (ell, anchor) => LocalizationPlane::new(
            ell.clone().unwrap_or_else(|| vec![false; d]),
            anchor.clone().unwrap_or_else(|| vec![0; d]),
        )
        .map_err(|e| CliError::Usage(format!("experiment.localized: {e}")))?,
    };
    let zeta = DecayFunction::exponential(cfg.experiment.zeta_rate)
        .map_err(|e| CliError::Usage(format!("experiment.zeta_rate: {e}")))?;

    let mut items = Vec::with_capacity(cfg.model.m.len());
    for &m in &cfg.model.m {
        let model = LatticeModel::build(cfg, m)?;
        items.push((model.phi0, plane.clone()));
    }
    let report = norm_volume_check(&items, &zeta)
        .map_err(|e| CliError::Numerical(format!("norm table: {e}")))?;
    for row in &report.rows {
        rows.push(Row::new(kind, "operator_norm", row.operator_norm).m(row.m));
        rows.push(Row::new(kind, "interaction_norm", row.phi_norm).m(row.m));
        rows.push(Row::new(kind, "volume_factor", row.volume_factor).m(row.m));
        rows.push(Row::new(kind, "norm_ratio", row.ratio).m(row.m));
    }
    rows.push(Row::new(kind, "max_ratio", report.max_ratio));
    Ok(())
}
