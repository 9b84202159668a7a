//! Run orchestration behind the CLI verbs: offline training, online
//! evaluation from persisted artifacts, reproduction studies and artifact
//! verification.

use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::{Col, Mat};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ProblemConfig, RunConfig};
use crate::estimators::{
    calibrate, four_by_four_study_case, log_spaced, perturbation_study, EstimatorError,
};
use crate::greedy::{
    evaluate_error_curves, greedy_build, sweep_eta_k, ErrorCurvePoint, GreedyError, GreedyOutput,
};
use crate::hifi::{
    assemble_affine_family, assemble_parametric, build_mesh, flatten_coefficients,
    sample_synthetic_minicore, sample_synthetic_minicore_disjoint, sample_toycore,
    sample_toycore_disjoint, AffineCoefficients, AffineOperatorFamily, GramNorm, HfSolver,
    ModelError, ParameterPoint, SubdomainGrid,
};
use crate::linalg::{factorization_count, LinalgError, PowerIterationSettings};
use crate::persist::{
    load_artifacts, load_family, read_parameters, save_artifacts, write_parameters, write_table,
    ArtifactManifest, CalibrationConstants, PersistError,
};
use crate::residual::{ResidualError, ResidualFactorization, ResidualSide};
use crate::rom::{solve_reduced_pencil, ProjectedFamily, ReducedBasis, RomError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown study '{0}' (available: perturbation4x4, toycore_convergence, estimator_efficiency)")]
    UnknownStudy(String),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl DriverError {
    /// CLI exit code: 0 success, 1 input error, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) | DriverError::UnknownStudy(_) | DriverError::Persist(_) => 1,
            DriverError::Numerical(_) => 2,
        }
    }
}

macro_rules! numerical_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for DriverError {
            fn from(e: $ty) -> Self {
                DriverError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical_from!(ModelError, RomError, GreedyError, EstimatorError, ResidualError, LinalgError);

impl From<std::io::Error> for DriverError {
    fn from(e: std::io::Error) -> Self {
        DriverError::Persist(PersistError::Io(e))
    }
}

pub struct ProblemSetup {
    pub family: AffineOperatorFamily,
    pub gram: GramNorm,
    pub train: Vec<ParameterPoint>,
    pub test: Vec<ParameterPoint>,
    pub pref: Vec<ParameterPoint>,
}

/// Builds the affine family and the pairwise-disjoint parameter sets of a
/// run configuration.
pub fn build_problem(config: &RunConfig) -> Result<ProblemSetup, DriverError> {
    config.validate().map_err(DriverError::Config)?;
    let s = &config.sampling;
    let (family, train, test, pref) = match &config.problem {
        ProblemConfig::Toycore {
            length,
            cells_per_side,
            subdomains_per_side,
            bc,
        } => {
            let mesh = build_mesh(
                *length,
                *cells_per_side,
                SubdomainGrid {
                    per_side: *subdomains_per_side,
                },
                *bc,
            )?;
            let family = assemble_affine_family(&mesh, config.norm.fission)?;
            let k = family.n_subdomains();
            let train = sample_toycore(s.n_train, k, s.seed_train);
            let test = sample_toycore_disjoint(s.n_test, k, s.seed_test, &[&train]);
            let pref = sample_toycore_disjoint(s.n_pref, k, s.seed_pref, &[&train, &test]);
            (family, train, test, pref)
        }
        ProblemConfig::SyntheticMinicore { cells_per_side, bc } => {
            let mesh = build_mesh(107.52, *cells_per_side, SubdomainGrid { per_side: 5 }, *bc)?;
            let family = assemble_affine_family(&mesh, config.norm.fission)?;
            let train = sample_synthetic_minicore(s.n_train, s.seed_train);
            let test = sample_synthetic_minicore_disjoint(s.n_test, s.seed_test, &[&train]);
            let pref =
                sample_synthetic_minicore_disjoint(s.n_pref, s.seed_pref, &[&train, &test]);
            (family, train, test, pref)
        }
        ProblemConfig::External { dir } => {
            let dir = PathBuf::from(dir);
            let family = load_family(&dir)?;
            let read_or_empty = |name: &str| -> Result<Vec<ParameterPoint>, DriverError> {
                let p = dir.join(name);
                if p.exists() {
                    Ok(read_parameters(&p)?)
                } else {
                    Ok(Vec::new())
                }
            };
            let train = read_or_empty("train.csv")?;
            if train.is_empty() {
                return Err(DriverError::Config(format!(
                    "external problem {} needs a non-empty train.csv",
                    dir.display()
                )));
            }
            (family, train, read_or_empty("test.csv")?, read_or_empty("pref.csv")?)
        }
    };
    let gram = family
        .gram(config.norm.gram)
        .map_err(|e| ResidualError::GramFactorizationFailed(e.to_string()))?;
    Ok(ProblemSetup {
        family,
        gram,
        train,
        test,
        pref,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedupReport {
    pub t_hf_median_s: f64,
    pub t_rb_median_s: f64,
    pub speedup: f64,
    /// Parameter count beyond which the offline investment pays off.
    pub break_even_runs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub c_bar_k: f64,
    pub c_bar_u: f64,
    pub c_bar_ustar: f64,
    pub covered: usize,
    pub total: usize,
    pub coverage_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct OfflineSummary {
    pub basis_dim: usize,
    pub full_dim: usize,
    pub iterations: usize,
    pub stop: String,
    pub hf_solves: u64,
    pub final_max_estimator: f64,
    pub offline_wall_s: f64,
    pub speedup: Option<SpeedupReport>,
    pub coverage: Option<CoverageReport>,
    #[serde(skip)]
    pub curves: Vec<ErrorCurvePoint>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

pub fn run_offline(
    config: &RunConfig,
    out_override: Option<&Path>,
) -> Result<OfflineSummary, DriverError> {
    let out = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), config.to_toml())?;

    let setup = build_problem(config)?;
    write_parameters(&out.join("params_train.csv"), &setup.train)?;
    if !setup.test.is_empty() {
        write_parameters(&out.join("params_test.csv"), &setup.test)?;
    }
    if !setup.pref.is_empty() {
        write_parameters(&out.join("params_pref.csv"), &setup.pref)?;
    }

    let settings = config.solver.settings();
    let hf = HfSolver::new(&setup.family, settings);
    let greedy_cfg = config.greedy.greedy_config();
    let t_offline0 = Instant::now();
    let output = match greedy_build(
        &setup.family,
        &hf,
        &setup.train,
        &greedy_cfg,
        &settings,
        &setup.gram,
        (!setup.pref.is_empty()).then_some(&setup.pref[..]),
    ) {
        Ok(o) => o,
        Err(GreedyError::StalledSelection {
            iteration,
            parameter_index,
            previous_delta,
            current_delta,
            output,
        }) => {
            persist_trace(&out, &output)?;
            return Err(DriverError::Numerical(format!(
                "greedy selection stalled at iteration {iteration} on parameter \
                 {parameter_index} (estimator {current_delta:e}, previously {previous_delta:e}); \
                 trace persisted to {}",
                out.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let offline_wall_s = t_offline0.elapsed().as_secs_f64();

    persist_trace(&out, &output)?;

    // Final-basis calibration and coverage over the test set.
    let mut coverage = None;
    let mut manifest_calibration = None;
    if !setup.pref.is_empty() {
        let cal = calibrate(
            &setup.family,
            &hf,
            &output.basis,
            &output.proj,
            &output.fact,
            &settings,
            &setup.gram,
            &setup.pref,
        )?;
        write_table(
            &out.join("calibration.csv"),
            "pref_id,k_hf,k_rb,e_k,eta_k,eff_k,e_u,norm_r,eff_u,e_ustar,norm_r_star,eff_ustar",
            cal.rows.iter().map(|r| {
                vec![
                    r.index.to_string(),
                    format!("{:e}", r.k_hf),
                    format!("{:e}", r.k_rb),
                    format!("{:e}", r.e_k),
                    format!("{:e}", r.eta_k),
                    format!("{:e}", r.eff_k),
                    format!("{:e}", r.e_u),
                    format!("{:e}", r.norm_r),
                    format!("{:e}", r.eff_u),
                    format!("{:e}", r.e_ustar),
                    format!("{:e}", r.norm_r_star),
                    format!("{:e}", r.eff_ustar),
                ]
            }),
        )?;
        manifest_calibration = Some(CalibrationConstants {
            c_bar_k: cal.c_bar_k,
            c_bar_u: cal.c_bar_u,
            c_bar_ustar: cal.c_bar_ustar,
        });

        if !setup.test.is_empty() {
            let n = output.basis.dim();
            let etas = sweep_eta_k(&setup.family, &output, &setup.test, n, &settings)?;
            let mut covered = 0usize;
            let mut rows = Vec::new();
            for (j, entry) in etas.iter().enumerate() {
                let (k_rb, eta) = entry.ok_or_else(|| {
                    DriverError::Numerical(format!("reduced solve failed on test parameter {j}"))
                })?;
                let hf_sol = hf.solve(&setup.test[j])?;
                let e_k = (hf_sol.k - k_rb).abs();
                let delta = cal.delta_k(eta);
                let is_covered = e_k <= delta;
                covered += is_covered as usize;
                rows.push(vec![
                    j.to_string(),
                    format!("{:e}", hf_sol.k),
                    format!("{:e}", k_rb),
                    format!("{:e}", e_k),
                    format!("{:e}", eta),
                    format!("{:e}", delta),
                    (is_covered as u8).to_string(),
                ]);
            }
            write_table(
                &out.join("efficiency.csv"),
                "test_id,k_hf,k_rb,e_k,eta_k,delta_k,covered",
                rows,
            )?;
            coverage = Some(CoverageReport {
                c_bar_k: cal.c_bar_k,
                c_bar_u: cal.c_bar_u,
                c_bar_ustar: cal.c_bar_ustar,
                covered,
                total: setup.test.len(),
                coverage_fraction: covered as f64 / setup.test.len() as f64,
            });
        }
    } else if let Some(cal) = &output.calibration {
        manifest_calibration = Some(CalibrationConstants {
            c_bar_k: cal.c_bar_k,
            c_bar_u: cal.c_bar_u,
            c_bar_ustar: cal.c_bar_ustar,
        });
    }

    save_artifacts(
        &out.join("artifacts"),
        &setup.family,
        config,
        config.norm.gram,
        &output.basis,
        &output.proj,
        &output.fact,
        manifest_calibration,
    )?;

    // Error curves over the test set.
    let mut curves = Vec::new();
    if !setup.test.is_empty() {
        let n0 = output.trace.iterations.first().map_or(2, |r| r.basis_dim);
        let mut dims: Vec<usize> = (n0..output.basis.dim()).step_by(2).collect();
        if dims.last() != Some(&output.basis.dim()) {
            dims.push(output.basis.dim());
        }
        curves = evaluate_error_curves(
            &setup.family,
            &hf,
            &output,
            &setup.test,
            &dims,
            &settings,
            &setup.gram,
        )?;
        write_table(
            &out.join("curves.csv"),
            "n,mean_e_k,mean_e_k_rel,max_e_k_rel,mean_e_u,mean_e_u_rel,mean_e_ustar,mean_eta_k,mean_norm_r,mean_norm_r_star,n_failed",
            curves.iter().map(|p| {
                vec![
                    p.n.to_string(),
                    format!("{:e}", p.mean_e_k),
                    format!("{:e}", p.mean_e_k_rel),
                    format!("{:e}", p.max_e_k_rel),
                    format!("{:e}", p.mean_e_u),
                    format!("{:e}", p.mean_e_u_rel),
                    format!("{:e}", p.mean_e_ustar),
                    format!("{:e}", p.mean_eta_k),
                    format!("{:e}", p.mean_norm_r),
                    format!("{:e}", p.mean_norm_r_star),
                    p.n_failed.to_string(),
                ]
            }),
        )?;
    }

    // Timing block: median HF solve vs median reduced solve at final N.
    let speedup = if !setup.test.is_empty() {
        let mu = &setup.test[0];
        let coeffs = setup.family.coefficients(mu)?;
        let mut t_hf = Vec::new();
        for _ in 0..5 {
            let t = Instant::now();
            hf.solve(mu)?;
            t_hf.push(t.elapsed().as_secs_f64());
        }
        let n = output.basis.dim();
        let mut t_rb = Vec::new();
        for _ in 0..5 {
            let t = Instant::now();
            let (a_n, b_n) = output.proj.assemble(&coeffs, n);
            solve_reduced_pencil(&a_n, &b_n, &settings)?;
            t_rb.push(t.elapsed().as_secs_f64());
        }
        let (hf_med, rb_med) = (median(t_hf), median(t_rb));
        Some(SpeedupReport {
            t_hf_median_s: hf_med,
            t_rb_median_s: rb_med,
            speedup: hf_med / rb_med,
            break_even_runs: offline_wall_s / (hf_med - rb_med).max(1e-12),
        })
    } else {
        None
    };

    let last = output.trace.iterations.last().unwrap();
    let summary = OfflineSummary {
        basis_dim: output.basis.dim(),
        full_dim: output.basis.full_dim(),
        iterations: output.trace.iterations.len(),
        stop: format!("{:?}", output.trace.stop),
        hf_solves: output.trace.hf_solves,
        final_max_estimator: last.max_estimator,
        offline_wall_s,
        speedup,
        coverage,
        curves,
    };
    std::fs::write(
        out.join("summary.toml"),
        toml::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

fn persist_trace(out: &Path, output: &GreedyOutput) -> Result<(), PersistError> {
    write_table(
        &out.join("trace.csv"),
        "iteration,basis_dim,max_estimator,selected",
        output.trace.iterations.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.basis_dim.to_string(),
                format!("{:e}", r.max_estimator),
                r.selected.map_or(String::new(), |s| s.to_string()),
            ]
        }),
    )?;
    write_table(
        &out.join("timings.csv"),
        "iteration,wall_s",
        output
            .trace
            .wall_times_s
            .iter()
            .enumerate()
            .map(|(i, t)| vec![i.to_string(), format!("{t:e}")]),
    )?;
    Ok(())
}

/// Reduced model loaded from artifacts; the online path never touches
/// full-dimension objects.
pub struct OnlineModel {
    pub manifest: ArtifactManifest,
    pub proj: ProjectedFamily,
    pub fact: ResidualFactorization,
    pub basis: Mat<f64>,
}

#[derive(Clone, Debug)]
pub struct OnlineSolve {
    pub k_n: f64,
    pub lambda_n: f64,
    pub eta_k: f64,
    pub norm_r: f64,
    pub norm_r_star: f64,
    pub delta_k: Option<f64>,
    pub iterations: (usize, usize),
    pub t_solve_s: f64,
    pub t_estimator_s: f64,
    pub c: Col<f64>,
    pub c_star: Col<f64>,
}

impl OnlineModel {
    pub fn load(dir: &Path) -> Result<Self, DriverError> {
        let loaded = load_artifacts(dir)?;
        Ok(Self {
            manifest: loaded.manifest,
            proj: loaded.proj,
            fact: loaded.fact,
            basis: loaded.basis,
        })
    }

    pub fn basis_dim(&self) -> usize {
        self.manifest.basis_dim
    }

    pub fn solve(
        &self,
        mu: &ParameterPoint,
        settings: &PowerIterationSettings,
    ) -> Result<OnlineSolve, DriverError> {
        mu.validate()?;
        let coeffs =
            flatten_coefficients(mu, self.manifest.k_subdomains, self.manifest.fission)?;
        self.solve_coeffs(&coeffs, settings)
    }

    pub fn solve_coeffs(
        &self,
        coeffs: &AffineCoefficients,
        settings: &PowerIterationSettings,
    ) -> Result<OnlineSolve, DriverError> {
        let n = self.manifest.basis_dim;
        let t0 = Instant::now();
        let (a_n, b_n) = self.proj.assemble(coeffs, n);
        let sol = solve_reduced_pencil(&a_n, &b_n, settings)?;
        let t_solve_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let norm_r = self
            .fact
            .online_norm(coeffs, &sol.c, sol.k_n, ResidualSide::Direct)?;
        let norm_r_star =
            self.fact
                .online_norm(coeffs, &sol.c_star, sol.k_n, ResidualSide::Adjoint)?;
        let a_c = &a_n * &sol.c;
        let pairing: f64 = sol.c_star.transpose() * &a_c;
        let eta_k = norm_r * norm_r_star / pairing.abs().max(1e-300);
        let delta_k = self
            .manifest
            .calibration
            .as_ref()
            .map(|c| c.c_bar_k * eta_k);
        let t_estimator_s = t1.elapsed().as_secs_f64();

        Ok(OnlineSolve {
            k_n: sol.k_n,
            lambda_n: sol.lambda_n,
            eta_k,
            norm_r,
            norm_r_star,
            delta_k,
            iterations: sol.iterations,
            t_solve_s,
            t_estimator_s,
            c: sol.c,
            c_star: sol.c_star,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct OnlineSummary {
    pub solved: usize,
    pub basis_dim: usize,
    pub t_solve_median_s: f64,
    pub t_estimator_median_s: f64,
    pub hf_factorizations: u64,
    pub verified: bool,
}

pub fn run_online(
    artifacts: &Path,
    params_path: &Path,
    out_dir: &Path,
    verify_mode: bool,
    lift_flux: bool,
) -> Result<OnlineSummary, DriverError> {
    std::fs::create_dir_all(out_dir)?;
    let model = OnlineModel::load(artifacts)?;
    let params = read_parameters(params_path)?;
    if params.is_empty() {
        return Err(DriverError::Config(format!(
            "no parameters in {}",
            params_path.display()
        )));
    }
    let settings = model.manifest.config.solver.settings();
    let fact_before = factorization_count();

    let mut rows = Vec::with_capacity(params.len());
    let mut t_solve = Vec::new();
    let mut t_est = Vec::new();
    for (id, mu) in params.iter().enumerate() {
        let sol = model.solve(mu, &settings)?;
        if verify_mode {
            let again = model.solve(mu, &settings)?;
            if again.k_n.to_bits() != sol.k_n.to_bits() {
                return Err(DriverError::Numerical(format!(
                    "online verification failed at parameter {id}: k_N not reproducible"
                )));
            }
        }
        if lift_flux {
            let flux = Mat::from_fn(model.basis.nrows(), 2, |i, j| {
                let c = if j == 0 { &sol.c } else { &sol.c_star };
                let mut acc = 0.0;
                for (l, cl) in c.iter().enumerate() {
                    acc += model.basis[(i, l)] * cl;
                }
                acc
            });
            crate::persist::write_dense_csv(&out_dir.join(format!("flux_{id:04}.csv")), &flux)?;
        }
        t_solve.push(sol.t_solve_s);
        t_est.push(sol.t_estimator_s);
        rows.push(vec![
            id.to_string(),
            format!("{:e}", sol.k_n),
            format!("{:e}", sol.lambda_n),
            format!("{:e}", sol.eta_k),
            format!("{:e}", sol.norm_r),
            format!("{:e}", sol.norm_r_star),
            sol.delta_k.map_or(String::new(), |d| format!("{d:e}")),
            sol.iterations.0.to_string(),
            sol.iterations.1.to_string(),
            format!("{:e}", sol.t_solve_s),
            format!("{:e}", sol.t_estimator_s),
        ]);
    }
    write_table(
        &out_dir.join("online.csv"),
        "mu_id,k_n,lambda_n,eta_k,norm_r,norm_r_star,delta_k,iters_direct,iters_adjoint,t_solve_s,t_estimator_s",
        rows,
    )?;

    let hf_factorizations = factorization_count() - fact_before;
    let summary = OnlineSummary {
        solved: params.len(),
        basis_dim: model.basis_dim(),
        t_solve_median_s: median(t_solve),
        t_estimator_median_s: median(t_est),
        hf_factorizations,
        verified: verify_mode,
    };
    std::fs::write(
        out_dir.join("online_summary.toml"),
        toml::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    if hf_factorizations > 0 {
        return Err(DriverError::Numerical(format!(
            "online purity violated: {hf_factorizations} sparse factorizations during the online run"
        )));
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub parameters_checked: usize,
    pub max_projection_defect: f64,
    pub max_residual_mismatch: f64,
    pub basis_orthonormality_defect: f64,
}

/// Re-derives the model from the embedded configuration and checks the
/// persisted reduced quantities against fresh full-dimension computations.
pub fn run_verify(artifacts: &Path, count: usize) -> Result<VerifySummary, DriverError> {
    let model = OnlineModel::load(artifacts)?;
    let config = model.manifest.config.clone();
    let setup = build_problem(&config)?;
    let settings = config.solver.settings();

    let basis = ReducedBasis {
        v: model.basis.cloned(),
        provenance: Vec::new(),
    };

    // basis orthonormality in the configured inner product
    let mut ortho_defect = 0.0f64;
    for i in 0..basis.dim() {
        for j in i..basis.dim() {
            let d: f64 = setup.gram.inner(&basis.column(i), &basis.column(j))
                - if i == j { 1.0 } else { 0.0 };
            ortho_defect = ortho_defect.max(d.abs());
        }
    }
    if ortho_defect > 1e-8 {
        return Err(DriverError::Numerical(format!(
            "basis orthonormality defect {ortho_defect:e}"
        )));
    }

    let params = if setup.test.is_empty() {
        setup.train.clone()
    } else {
        setup.test.clone()
    };
    let count = count.max(1).min(params.len());
    let mut max_proj = 0.0f64;
    let mut max_res = 0.0f64;
    for mu in params.iter().take(count) {
        let coeffs = setup.family.coefficients(mu)?;
        let sol = model.solve_coeffs(&coeffs, &settings)?;
        // same code path determinism
        let again = model.solve_coeffs(&coeffs, &settings)?;
        if again.k_n.to_bits() != sol.k_n.to_bits() {
            return Err(DriverError::Numerical(
                "online k_N is not bitwise reproducible".into(),
            ));
        }

        // reprojection consistency of the reduced pencil
        let (a_mu, b_mu) = assemble_parametric(&setup.family, mu)?;
        let (a_n, b_n) = model.proj.assemble(&coeffs, model.basis_dim());
        let a_fresh = basis.v.transpose() * &a_mu.matmul(&basis.v);
        let b_fresh = basis.v.transpose() * &b_mu.matmul(&basis.v);
        let defect = crate::linalg::spectral_norm(&(&a_fresh - &a_n))
            / crate::linalg::spectral_norm(&a_n).max(1e-300)
            + crate::linalg::spectral_norm(&(&b_fresh - &b_n))
                / crate::linalg::spectral_norm(&b_n).max(1e-300);
        max_proj = max_proj.max(defect);

        // online residual norms vs the direct full-dimension residual
        let u = basis.lift(&sol.c);
        let us = basis.lift(&sol.c_star);
        let r = &b_mu.matvec(&u) - &(sol.k_n * &a_mu.matvec(&u));
        let rs = &b_mu.matvec_transpose(&us) - &(sol.k_n * &a_mu.matvec_transpose(&us));
        let rel_r = (setup.gram.dual_norm(&r) - sol.norm_r).abs() / sol.norm_r.max(1e-300);
        let rel_rs =
            (setup.gram.dual_norm(&rs) - sol.norm_r_star).abs() / sol.norm_r_star.max(1e-300);
        max_res = max_res.max(rel_r).max(rel_rs);
    }
    if max_proj > 1e-10 {
        return Err(DriverError::Numerical(format!(
            "projected pencil mismatch {max_proj:e}"
        )));
    }
    if max_res > 1e-8 {
        return Err(DriverError::Numerical(format!(
            "online residual mismatch {max_res:e}"
        )));
    }
    Ok(VerifySummary {
        parameters_checked: count,
        max_projection_defect: max_proj,
        max_residual_mismatch: max_res,
        basis_orthonormality_defect: ortho_defect,
    })
}

#[derive(Debug, Serialize)]
pub struct StudySummary {
    pub study: String,
    pub slope: Option<f64>,
    pub c_k_sym: Option<f64>,
    pub mean_e_k_rel_low_n: Option<f64>,
    pub mean_e_k_rel_final: Option<f64>,
    pub improvement_orders: Option<f64>,
    pub coverage_fraction: Option<f64>,
}

pub fn run_study(
    name: &str,
    out_dir: &Path,
    config_override: Option<&RunConfig>,
) -> Result<StudySummary, DriverError> {
    std::fs::create_dir_all(out_dir)?;
    match name {
        "perturbation4x4" => {
            let (s, t, k_n) = four_by_four_study_case();
            let eps = log_spaced(1e-6, 1e-2, 12);
            let study =
                perturbation_study(&s, &t, &eps, k_n).map_err(DriverError::from)?;
            write_table(
                &out_dir.join("perturbation4x4.csv"),
                "epsilon,c_k_eps,c_k_sym,abs_diff,lambda_eps,lambda_drift_ratio,eigvec_first_order_ratio",
                study.rows.iter().map(|r| {
                    vec![
                        format!("{:e}", r.epsilon),
                        format!("{:e}", r.c_k_eps),
                        format!("{:e}", study.c_k_sym),
                        format!("{:e}", r.diff),
                        format!("{:e}", r.lambda_eps),
                        format!("{:e}", r.lambda_drift_ratio),
                        format!("{:e}", r.eigvec_first_order_ratio),
                    ]
                }),
            )?;
            let summary = StudySummary {
                study: name.into(),
                slope: study.slope(),
                c_k_sym: Some(study.c_k_sym),
                mean_e_k_rel_low_n: None,
                mean_e_k_rel_final: None,
                improvement_orders: None,
                coverage_fraction: None,
            };
            std::fs::write(
                out_dir.join("summary.toml"),
                toml::to_string_pretty(&summary).expect("summary serializes"),
            )?;
            Ok(summary)
        }
        "toycore_convergence" | "estimator_efficiency" => {
            let mut config = config_override
                .cloned()
                .unwrap_or_else(RunConfig::toycore_default);
            if name == "estimator_efficiency" && config.sampling.n_pref == 0 {
                config.sampling.n_pref = 10;
            }
            config.output.dir = out_dir.to_string_lossy().into_owned();
            let offline = run_offline(&config, Some(out_dir))?;
            let low = offline
                .curves
                .iter()
                .filter(|p| p.n <= 10)
                .next_back()
                .or(offline.curves.first());
            let high = offline.curves.last();
            let (low_e, high_e) = (
                low.map(|p| p.mean_e_k_rel),
                high.map(|p| p.mean_e_k_rel),
            );
            let summary = StudySummary {
                study: name.into(),
                slope: None,
                c_k_sym: None,
                mean_e_k_rel_low_n: low_e,
                mean_e_k_rel_final: high_e,
                improvement_orders: match (low_e, high_e) {
                    (Some(a), Some(b)) if b > 0.0 => Some((a / b).log10()),
                    _ => None,
                },
                coverage_fraction: offline.coverage.as_ref().map(|c| c.coverage_fraction),
            };
            std::fs::write(
                out_dir.join("study_summary.toml"),
                toml::to_string_pretty(&summary).expect("summary serializes"),
            )?;
            Ok(summary)
        }
        other => Err(DriverError::UnknownStudy(other.into())),
    }
}
