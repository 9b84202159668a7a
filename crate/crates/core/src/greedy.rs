//! Offline greedy training loop: POD initialization, estimator-driven
//! snapshot selection, enrichment with direct and adjoint eigenvectors and
//! tolerance-based stopping. The estimator sweep uses only reduced solves and
//! affine residual norms; the high-fidelity solver runs on argmax winners and
//! the POD/calibration sets only.

use std::time::Instant;

use faer::{Col, Mat};
use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{calibrate, CalibrationSet, EstimatorError};
use crate::hifi::{
    AffineCoefficients, AffineOperatorFamily, EigenSolution, GramNorm, HfSolver, ModelError,
    ParameterPoint,
};
use crate::linalg::PowerIterationSettings;
use crate::residual::{ResidualError, ResidualFactorization, ResidualSide};
use crate::rom::{
    orthonormalize, pod_compress, solve_reduced_projected, ProjectedFamily, ReducedBasis,
    RomError, SnapshotSide, SnapshotTag,
};

#[derive(Debug, Error)]
pub enum GreedyError {
    #[error("invalid greedy configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "greedy selection stalled at iteration {iteration}: parameter {parameter_index} \
         reselected with estimator {current_delta:e} (was {previous_delta:e} at selection)"
    )]
    StalledSelection {
        iteration: usize,
        parameter_index: usize,
        previous_delta: f64,
        current_delta: f64,
        output: Box<GreedyOutput>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorSelector {
    /// `Delta = eta_N^k`.
    EtaK,
    /// `Delta = ||R_N|| + ||R*_N||`.
    ResidualSum,
    /// `Delta = C-bar_k * eta_N^k` with constants calibrated once per run.
    CalibratedK,
    /// Ideal greedy on the eigenvalue error (needs an HF sweep of the
    /// training set).
    ExactErrorK,
    /// Ideal greedy on `e^u + e^{u*}`.
    ExactErrorU,
}

impl EstimatorSelector {
    pub fn needs_hf_sweep(self) -> bool {
        matches!(self, Self::ExactErrorK | Self::ExactErrorU)
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PodInit {
    pub n_direct: usize,
    pub n_adjoint: usize,
    pub target_dim: usize,
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct GreedyConfig {
    pub tolerance: f64,
    pub selector: EstimatorSelector,
    pub max_dim: usize,
    pub pod: PodInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    DimensionCap,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct GreedyIterationRecord {
    pub iteration: usize,
    pub basis_dim: usize,
    /// `max_mu Delta_N(mu)` over the training set.
    pub max_estimator: f64,
    /// Training index of the enriched parameter; `None` on the final row.
    pub selected: Option<usize>,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct GreedyTrace {
    pub iterations: Vec<GreedyIterationRecord>,
    /// Wall time per iteration, kept apart from the deterministic columns.
    pub wall_times_s: Vec<f64>,
    pub hf_solves: u64,
    pub stop: StopReason,
}

#[derive(Debug)]
pub struct GreedyOutput {
    pub basis: ReducedBasis,
    pub proj: ProjectedFamily,
    pub fact: ResidualFactorization,
    pub trace: GreedyTrace,
    pub calibration: Option<CalibrationSet>,
}

struct SweepRecord {
    c: Col<f64>,
    c_star: Col<f64>,
    k_n: f64,
    pairing: f64,
    ok: bool,
}

/// Reduced solves + pairings over a parameter list at dimension `n`.
fn reduced_sweep(
    proj: &ProjectedFamily,
    coeffs: &[AffineCoefficients],
    n: usize,
    settings: &PowerIterationSettings,
) -> Vec<SweepRecord> {
    coeffs
        .par_iter()
        .map(|cf| match solve_reduced_projected(proj, cf, n, settings) {
            Ok(sol) => {
                let (a_n, _) = proj.assemble(cf, n);
                let a_c = &a_n * &sol.c;
                let pairing: f64 = sol.c_star.transpose() * &a_c;
                SweepRecord {
                    c: sol.c,
                    c_star: sol.c_star,
                    k_n: sol.k_n,
                    pairing,
                    ok: true,
                }
            }
            Err(_) => SweepRecord {
                c: Col::zeros(n),
                c_star: Col::zeros(n),
                k_n: 0.0,
                pairing: 1.0,
                ok: false,
            },
        })
        .collect()
}

/// Residual norms for a sweep, batched per side.
fn sweep_norms(
    fact: &ResidualFactorization,
    coeffs: &[AffineCoefficients],
    records: &[SweepRecord],
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), ResidualError> {
    let p = records.len();
    let cs = Mat::from_fn(n, p, |i, j| records[j].c[i]);
    let cs_star = Mat::from_fn(n, p, |i, j| records[j].c_star[i]);
    let items: Vec<(&AffineCoefficients, f64)> = coeffs
        .iter()
        .zip(records.iter().map(|r| r.k_n))
        .collect();
    let skip: Vec<bool> = records.iter().map(|r| !r.ok).collect();
    let direct = fact.online_norms_batch(&items, &cs, ResidualSide::Direct, &skip)?;
    let adjoint = fact.online_norms_batch(&items, &cs_star, ResidualSide::Adjoint, &skip)?;
    Ok((direct, adjoint))
}

fn estimator_values(
    selector: EstimatorSelector,
    records: &[SweepRecord],
    norms: &(Vec<f64>, Vec<f64>),
    calibration: Option<&CalibrationSet>,
    hf_cache: Option<&[EigenSolution]>,
    basis: &ReducedBasis,
    gram: &GramNorm,
) -> Vec<f64> {
    let p = records.len();
    let mut delta = vec![f64::INFINITY; p];
    for j in 0..p {
        if !records[j].ok {
            continue; // failed reduced solve: immediate snapshot candidate
        }
        let (r, rs) = (norms.0[j], norms.1[j]);
        delta[j] = match selector {
            EstimatorSelector::EtaK => r * rs / records[j].pairing.abs().max(1e-300),
            EstimatorSelector::ResidualSum => r + rs,
            EstimatorSelector::CalibratedK => {
                let eta = r * rs / records[j].pairing.abs().max(1e-300);
                calibration.map_or(eta, |c| c.delta_k(eta))
            }
            EstimatorSelector::ExactErrorK => {
                let hf = &hf_cache.expect("HF sweep cached for ideal greedy")[j];
                (hf.k - records[j].k_n).abs()
            }
            EstimatorSelector::ExactErrorU => {
                let hf = &hf_cache.expect("HF sweep cached for ideal greedy")[j];
                let mut sol = crate::rom::ReducedSolution {
                    c: records[j].c.cloned(),
                    c_star: records[j].c_star.cloned(),
                    lambda_n: 1.0 / records[j].k_n,
                    k_n: records[j].k_n,
                    iterations: (0, 0),
                    u_n: None,
                    u_star_n: None,
                };
                sol.lift(basis, gram);
                let e_u = (sol.u_n.as_ref().unwrap() - &hf.u).norm_l2();
                let e_us = (sol.u_star_n.as_ref().unwrap() - &hf.u_star).norm_l2();
                e_u + e_us
            }
        };
    }
    delta
}

fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            idx = j;
        }
    }
    (idx, best)
}

/// Builds the reduced basis per the greedy algorithm: POD initialization,
/// then per iteration an estimator sweep over the training set, enrichment
/// with both eigenvectors at the argmax parameter (lowest index on ties) and
/// re-orthonormalization of the full snapshot list.
pub fn greedy_build(
    family: &AffineOperatorFamily,
    hf: &HfSolver,
    train: &[ParameterPoint],
    config: &GreedyConfig,
    settings: &PowerIterationSettings,
    gram: &GramNorm,
    p_pref: Option<&[ParameterPoint]>,
) -> Result<GreedyOutput, GreedyError> {
    if train.is_empty() {
        return Err(GreedyError::InvalidConfig("empty training set".into()));
    }
    if config.tolerance <= 0.0 {
        return Err(GreedyError::InvalidConfig("tolerance must be positive".into()));
    }
    let pod_n = config.pod.n_direct.max(config.pod.n_adjoint);
    if pod_n == 0 || config.pod.target_dim == 0 {
        return Err(GreedyError::InvalidConfig(
            "POD init needs at least one snapshot and a positive target dimension".into(),
        ));
    }
    if pod_n > train.len() {
        return Err(GreedyError::InvalidConfig(
            "POD init requests more snapshots than training parameters".into(),
        ));
    }
    if config.selector == EstimatorSelector::CalibratedK
        && p_pref.map_or(true, |p| p.is_empty())
    {
        return Err(GreedyError::InvalidConfig(
            "calibrated selector requires a non-empty estimation set".into(),
        ));
    }

    let coeffs: Vec<AffineCoefficients> = train
        .iter()
        .map(|mu| family.coefficients(mu))
        .collect::<Result<_, _>>()?;

    // POD initialization from leading training parameters.
    let mut snapshots: Vec<(Col<f64>, SnapshotTag)> = Vec::new();
    {
        let mut pod_snaps: Vec<(Col<f64>, SnapshotTag)> = Vec::new();
        for idx in 0..pod_n {
            let sol = hf.solve(&train[idx])?;
            if idx < config.pod.n_direct {
                pod_snaps.push((
                    sol.u.clone(),
                    SnapshotTag {
                        parameter_index: Some(idx),
                        side: SnapshotSide::Direct,
                        pod_mode: false,
                    },
                ));
            }
            if idx < config.pod.n_adjoint {
                pod_snaps.push((
                    sol.u_star.clone(),
                    SnapshotTag {
                        parameter_index: Some(idx),
                        side: SnapshotSide::Adjoint,
                        pod_mode: false,
                    },
                ));
            }
        }
        let pod_basis = pod_compress(&pod_snaps, gram, config.pod.target_dim.min(pod_snaps.len()))?;
        for j in 0..pod_basis.dim() {
            snapshots.push((pod_basis.column(j), pod_basis.provenance[j].clone()));
        }
    }

    let mut basis = orthonormalize(&snapshots, gram)?;
    let mut proj = ProjectedFamily::project(family, &basis);
    let mut fact = ResidualFactorization::precompute(family, &basis, gram)?;

    let calibration = if config.selector == EstimatorSelector::CalibratedK {
        Some(calibrate(
            family,
            hf,
            &basis,
            &proj,
            &fact,
            settings,
            gram,
            p_pref.unwrap(),
        )?)
    } else {
        None
    };

    let hf_cache: Option<Vec<EigenSolution>> = if config.selector.needs_hf_sweep() {
        Some(
            train
                .iter()
                .map(|mu| hf.solve(mu))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    let mut trace = GreedyTrace {
        iterations: Vec::new(),
        wall_times_s: Vec::new(),
        hf_solves: 0,
        stop: StopReason::Tolerance,
    };
    let mut delta_at_selection: Vec<Option<f64>> = vec![None; train.len()];

    for iteration in 0.. {
        let t0 = Instant::now();
        let n = basis.dim();
        let records = reduced_sweep(&proj, &coeffs, n, settings);
        let norms = sweep_norms(&fact, &coeffs, &records, n)?;
        let delta = estimator_values(
            config.selector,
            &records,
            &norms,
            calibration.as_ref(),
            hf_cache.as_deref(),
            &basis,
            gram,
        );
        let (winner, tau) = argmax_first(&delta);

        if tau <= config.tolerance {
            trace.iterations.push(GreedyIterationRecord {
                iteration,
                basis_dim: n,
                max_estimator: tau,
                selected: None,
            });
            trace.wall_times_s.push(t0.elapsed().as_secs_f64());
            trace.stop = StopReason::Tolerance;
            break;
        }

        trace.iterations.push(GreedyIterationRecord {
            iteration,
            basis_dim: n,
            max_estimator: tau,
            selected: Some(winner),
        });

        if let Some(prev) = delta_at_selection[winner] {
            if tau >= prev {
                trace.wall_times_s.push(t0.elapsed().as_secs_f64());
                trace.hf_solves = hf.solve_count();
                return Err(GreedyError::StalledSelection {
                    iteration,
                    parameter_index: winner,
                    previous_delta: prev,
                    current_delta: tau,
                    output: Box::new(GreedyOutput {
                        basis,
                        proj,
                        fact,
                        trace,
                        calibration,
                    }),
                });
            }
        }
        delta_at_selection[winner] = Some(tau);

        let sol = hf.solve(&train[winner])?;
        snapshots.push((
            sol.u.clone(),
            SnapshotTag {
                parameter_index: Some(winner),
                side: SnapshotSide::Direct,
                pod_mode: false,
            },
        ));
        snapshots.push((
            sol.u_star.clone(),
            SnapshotTag {
                parameter_index: Some(winner),
                side: SnapshotSide::Adjoint,
                pod_mode: false,
            },
        ));
        let new_basis = orthonormalize(&snapshots, gram)?;
        if new_basis.dim() == basis.dim() {
            trace.wall_times_s.push(t0.elapsed().as_secs_f64());
            trace.hf_solves = hf.solve_count();
            return Err(GreedyError::StalledSelection {
                iteration,
                parameter_index: winner,
                previous_delta: delta_at_selection[winner].unwrap_or(f64::INFINITY),
                current_delta: tau,
                output: Box::new(GreedyOutput {
                    basis,
                    proj,
                    fact,
                    trace,
                    calibration,
                }),
            });
        }
        basis = new_basis;
        proj.extend(family, &basis);
        fact.extend(family, &basis, gram)?;
        trace.wall_times_s.push(t0.elapsed().as_secs_f64());

        if basis.dim() >= config.max_dim {
            trace.stop = StopReason::DimensionCap;
            break;
        }
    }

    trace.hf_solves = hf.solve_count();
    Ok(GreedyOutput {
        basis,
        proj,
        fact,
        trace,
        calibration,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ErrorCurvePoint {
    pub n: usize,
    pub mean_e_k: f64,
    pub mean_e_k_rel: f64,
    pub max_e_k_rel: f64,
    pub mean_e_u: f64,
    pub mean_e_u_rel: f64,
    pub mean_e_ustar: f64,
    pub mean_eta_k: f64,
    pub mean_norm_r: f64,
    pub mean_norm_r_star: f64,
    pub n_failed: usize,
}

/// Test-set error curves over a grid of basis dimensions. High-fidelity
/// solutions are computed once per test parameter; every reduced quantity
/// reuses the truncated projected family of the final basis.
pub fn evaluate_error_curves(
    family: &AffineOperatorFamily,
    hf: &HfSolver,
    output: &GreedyOutput,
    test: &[ParameterPoint],
    dims: &[usize],
    settings: &PowerIterationSettings,
    gram: &GramNorm,
) -> Result<Vec<ErrorCurvePoint>, GreedyError> {
    let coeffs: Vec<AffineCoefficients> = test
        .iter()
        .map(|mu| family.coefficients(mu))
        .collect::<Result<_, _>>()?;
    let hf_solutions: Vec<EigenSolution> = test
        .iter()
        .map(|mu| hf.solve(mu))
        .collect::<Result<_, _>>()?;

    let mut curves = Vec::with_capacity(dims.len());
    for &n in dims {
        if n > output.basis.dim() {
            continue;
        }
        let records = reduced_sweep(&output.proj, &coeffs, n, settings);
        let norms = sweep_norms(&output.fact, &coeffs, &records, n)?;
        let mut point = ErrorCurvePoint {
            n,
            mean_e_k: 0.0,
            mean_e_k_rel: 0.0,
            max_e_k_rel: 0.0,
            mean_e_u: 0.0,
            mean_e_u_rel: 0.0,
            mean_e_ustar: 0.0,
            mean_eta_k: 0.0,
            mean_norm_r: 0.0,
            mean_norm_r_star: 0.0,
            n_failed: 0,
        };
        let mut count = 0usize;
        for (j, rec) in records.iter().enumerate() {
            if !rec.ok {
                point.n_failed += 1;
                continue;
            }
            let hf_sol = &hf_solutions[j];
            let mut sol = crate::rom::ReducedSolution {
                c: rec.c.cloned(),
                c_star: rec.c_star.cloned(),
                lambda_n: 1.0 / rec.k_n,
                k_n: rec.k_n,
                iterations: (0, 0),
                u_n: None,
                u_star_n: None,
            };
            sol.lift(&output.basis, gram);
            let e_k = (rec.k_n - hf_sol.k).abs();
            let e_u = (sol.u_n.as_ref().unwrap() - &hf_sol.u).norm_l2();
            let e_us = (sol.u_star_n.as_ref().unwrap() - &hf_sol.u_star).norm_l2();
            let u_norm = hf_sol.u.norm_l2();
            let eta = norms.0[j] * norms.1[j] / rec.pairing.abs().max(1e-300);

            point.mean_e_k += e_k;
            let rel = e_k / hf_sol.k.abs();
            point.mean_e_k_rel += rel;
            point.max_e_k_rel = point.max_e_k_rel.max(rel);
            point.mean_e_u += e_u;
            point.mean_e_u_rel += e_u / u_norm;
            point.mean_e_ustar += e_us;
            point.mean_eta_k += eta;
            point.mean_norm_r += norms.0[j];
            point.mean_norm_r_star += norms.1[j];
            count += 1;
        }
        if count > 0 {
            let c = count as f64;
            point.mean_e_k /= c;
            point.mean_e_k_rel /= c;
            point.mean_e_u /= c;
            point.mean_e_u_rel /= c;
            point.mean_e_ustar /= c;
            point.mean_eta_k /= c;
            point.mean_norm_r /= c;
            point.mean_norm_r_star /= c;
        }
        curves.push(point);
    }
    Ok(curves)
}

/// Estimator values over an arbitrary parameter set at dimension `n`;
/// exposed for calibration-coverage reports.
pub fn sweep_eta_k(
    family: &AffineOperatorFamily,
    output: &GreedyOutput,
    params: &[ParameterPoint],
    n: usize,
    settings: &PowerIterationSettings,
) -> Result<Vec<Option<(f64, f64)>>, GreedyError> {
    let coeffs: Vec<AffineCoefficients> = params
        .iter()
        .map(|mu| family.coefficients(mu))
        .collect::<Result<_, _>>()?;
    let records = reduced_sweep(&output.proj, &coeffs, n, settings);
    let norms = sweep_norms(&output.fact, &coeffs, &records, n)?;
    Ok(records
        .iter()
        .enumerate()
        .map(|(j, rec)| {
            rec.ok.then(|| {
                let eta = norms.0[j] * norms.1[j] / rec.pairing.abs().max(1e-300);
                (rec.k_n, eta)
            })
        })
        .collect())
}
