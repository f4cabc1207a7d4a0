//! Deterministic parallel execution of an experiment.
//!
//! Trial `t` of a run draws all of its randomness from
//! `trial_seed(master, kind, t)`; workers only decide *when* a trial runs,
//! never *what* it computes, and rows are collected in trial order.

use std::time::Instant;

use lowedge_core::field::{conditional_continuity_probe, mixing_pairs, ContinuityProbe};
use lowedge_core::lattice::Cube;
use lowedge_core::msa::{singularity_trial, MsaParams};
use lowedge_core::observables::{
    combes_thomas_ratio, decay_trial, dynamical_moment, large_deviation_scale, lifshitz_threshold, lifshitz_trial,
    log_time_grid, truncated_average,
};
use lowedge_core::seed;
use lowedge_core::spectral::lowest_eigenvalue;
use lowedge_core::HamiltonianSpec;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::records::*;

/// Bump when a CSV or JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated fraction of failed trials.
pub const FAILURE_BUDGET: f64 = 0.10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Core(#[from] lowedge_core::Error),
    #[error("{failed} of {total} trials failed (budget {:.0}%)", FAILURE_BUDGET * 100.0)]
    Budget { failed: usize, total: usize },
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub workers: usize,
    pub elapsed_seconds: f64,
    pub failed_trials: usize,
    pub total_trials: usize,
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// Seed installed in the field for this run.
    pub stream_seed: u64,
    pub records: Records,
    pub aggregates: Aggregates,
    pub continuity: Option<ContinuityProbe>,
    pub stats: RunStats,
}

impl EnsembleReport {
    pub fn within_budget(&self) -> bool {
        let RunStats { failed_trials, total_trials, .. } = self.stats;
        failed_trials as f64 <= FAILURE_BUDGET * total_trials as f64
    }
}

fn per_trial<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

/// Runs `config` on its own worker pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EnsembleReport, RunError> {
    config.check()?;
    let workers = config.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let start = Instant::now();
    let stream = seed::stream_seed(config.seed, config.kind.name());
    let mut spec = config.model.clone();
    spec.field = spec.field.with_seed(stream);
    let (records, continuity) = pool.install(|| execute(config, &spec))?;
    let (failed_trials, total_trials) = records.failures();
    Ok(EnsembleReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        stream_seed: stream,
        aggregates: records.aggregate(),
        records,
        continuity,
        stats: RunStats { workers, elapsed_seconds: start.elapsed().as_secs_f64(), failed_trials, total_trials },
    })
}

fn execute(config: &ExperimentConfig, spec: &HamiltonianSpec) -> Result<(Records, Option<ContinuityProbe>), RunError> {
    let kind = config.kind;
    let trials = config.trials;
    let tseed = |t: u64| seed::trial_seed(config.seed, kind.name(), t);
    let err = |e: lowedge_core::Error| Some(e.to_string());
    let solver = &config.solver;
    let records = match kind {
        ExperimentKind::FieldCertify => {
            let p = config.field_certify.as_ref().expect("checked");
            let mut rows = Vec::new();
            for &distance in &p.distances {
                for (t, (a, b)) in mixing_pairs(&spec.field, distance, trials).into_iter().enumerate() {
                    let t = t as u64;
                    rows.push(MixingRow {
                        distance,
                        trial: t,
                        seed: tseed(t),
                        v_origin: Some(a),
                        v_far: Some(b),
                        error: None,
                    });
                }
            }
            let probe = match p.continuity_eps {
                Some(eps) => Some(conditional_continuity_probe(&spec.field, eps, trials)?),
                None => None,
            };
            return Ok((Records::FieldCertify(rows), probe));
        }
        ExperimentKind::LargeDeviation => {
            let p = config.large_deviation.as_ref().expect("checked");
            let l = large_deviation_scale(p.energy, p.beta)?;
            let volume = (2 * l as usize + 1).pow(spec.d as u32);
            Records::LargeDeviation(per_trial(trials, |t| {
                let r = truncated_average(&spec.field, p.energy, p.beta, p.c, t);
                DeviationRow {
                    l,
                    volume,
                    trial: t,
                    seed: tseed(t),
                    average: r.as_ref().ok().copied(),
                    hit: r.as_ref().ok().map(|a| *a < p.energy / 2.0),
                    error: r.err().and_then(err),
                }
            }))
        }
        ExperimentKind::Lifshitz => {
            let p = config.lifshitz.as_ref().expect("checked");
            let mut rows = Vec::new();
            for &l in &p.sizes {
                rows.extend(per_trial(trials, |t| {
                    let r = lifshitz_trial(spec, p.n, l, p.c, t, solver);
                    TailRow {
                        n: p.n,
                        l,
                        trial: t,
                        seed: tseed(t),
                        threshold: lifshitz_threshold(l, p.c),
                        e0: r.as_ref().ok().map(|x| x.e0),
                        hit: r.as_ref().ok().map(|x| x.hit),
                        error: r.err().and_then(err),
                    }
                }));
            }
            Records::Lifshitz(rows)
        }
        ExperimentKind::CtCheck => {
            let p = config.ct_check.as_ref().expect("checked");
            let model = spec.with_particles(p.n);
            let mut rows = Vec::new();
            for &l in &p.sizes {
                let cube = Cube::centered(p.n, spec.d, l)?;
                rows.extend(per_trial(trials, |t| {
                    let eta = p.eta_min + (1.0 - p.eta_min) * seed::uniform(seed::mix(tseed(t), seed::tag("eta")));
                    let r = model.assemble_trial(&cube, t).and_then(|op| {
                        let e = lowest_eigenvalue(&op, solver)? - eta;
                        Ok((e, combes_thomas_ratio(&op, e)?))
                    });
                    CtRow {
                        n: p.n,
                        l,
                        trial: t,
                        seed: tseed(t),
                        eta,
                        energy: r.as_ref().ok().map(|x| x.0),
                        ratio: r.as_ref().ok().map(|x| x.1),
                        error: r.err().and_then(err),
                    }
                }));
            }
            Records::CtCheck(rows)
        }
        ExperimentKind::MsaInitial => {
            let p = config.msa.as_ref().expect("checked");
            let n = p.particles();
            let mut rows = Vec::new();
            for &l0 in &p.scales {
                let mut params = MsaParams::initial(p.n_max, spec.d, l0, p.p, p.alpha)?;
                if let Some(e) = p.estar_override {
                    params = params.with_estar(e);
                }
                let target = params.target(n);
                rows.extend(per_trial(trials, |t| {
                    let r = singularity_trial(spec, &params, n, t, solver);
                    let ok = r.as_ref().ok();
                    MsaRow {
                        n,
                        l: l0,
                        trial: t,
                        seed: tseed(t),
                        target,
                        e0: ok.map(|x| x.e0),
                        shortcut: ok.map(|x| x.shortcut),
                        singular: ok.map(|x| x.singular),
                        first_singular_energy: ok.and_then(|x| x.first_singular_energy),
                        singular_resolvent: ok.map(|x| x.singular_resolvent),
                        chain_certified: ok.map(|x| x.chain_certified),
                        error: r.err().and_then(err),
                    }
                }));
            }
            Records::MsaInitial(rows)
        }
        ExperimentKind::EigenDecay => {
            let p = config.eigen_decay.as_ref().expect("checked");
            let per = per_trial(trials, |t| match decay_trial(spec, p.n, p.size, p.width, t) {
                Ok(fits) => fits
                    .into_iter()
                    .enumerate()
                    .map(|(index, f)| DecayRow {
                        n: p.n,
                        l: p.size,
                        trial: t,
                        seed: tseed(t),
                        index,
                        eigenvalue: Some(f.eigenvalue),
                        center: Some(join(f.center.coords())),
                        fitted_rate: f.fitted_rate,
                        r_lo: f.r_range.map(|r| r.0),
                        r_hi: f.r_range.map(|r| r.1),
                        degenerate: Some(f.degenerate),
                        shell_max: Some(join(&f.shell_max)),
                        error: None,
                    })
                    .collect(),
                Err(e) => vec![DecayRow {
                    n: p.n,
                    l: p.size,
                    trial: t,
                    seed: tseed(t),
                    index: 0,
                    eigenvalue: None,
                    center: None,
                    fitted_rate: None,
                    r_lo: None,
                    r_hi: None,
                    degenerate: None,
                    shell_max: None,
                    error: Some(e.to_string()),
                }],
            });
            Records::EigenDecay(per.into_iter().flatten().collect())
        }
        ExperimentKind::Dynloc => {
            let p = config.dynloc.as_ref().expect("checked");
            let model = spec.with_particles(p.n);
            let cube = Cube::centered(p.n, spec.d, p.size)?;
            let k = Cube::centered(p.n, spec.d, p.k_radius)?;
            let times = p.times.clone().unwrap_or_else(log_time_grid);
            let per = per_trial(trials, |t| {
                let r = model
                    .assemble_trial(&cube, t)
                    .and_then(|op| dynamical_moment(&op, p.window[0], p.window[1], p.s, &k, &times));
                let row = |index: usize, moment: Option<f64>, bound: Option<f64>, error: Option<String>| DynlocRow {
                    n: p.n,
                    l: p.size,
                    trial: t,
                    seed: tseed(t),
                    index,
                    time: times[index],
                    moment,
                    bound,
                    error,
                };
                match r {
                    Ok(m) => {
                        (0..times.len()).map(|i| row(i, Some(m.values[i]), Some(m.bound), None)).collect::<Vec<_>>()
                    }
                    Err(e) => vec![row(0, None, None, Some(e.to_string()))],
                }
            });
            Records::Dynloc(per.into_iter().flatten().collect())
        }
        ExperimentKind::SpectralEdge => {
            let p = config.spectral_edge.as_ref().expect("checked");
            let model = spec.with_particles(p.n);
            let mut rows = Vec::new();
            for &l in &p.sizes {
                let cube = Cube::centered(p.n, spec.d, l)?;
                rows.extend(per_trial(trials, |t| {
                    let r = model.assemble_trial(&cube, t).and_then(|op| lowest_eigenvalue(&op, solver));
                    EdgeRow {
                        n: p.n,
                        l,
                        trial: t,
                        seed: tseed(t),
                        e0: r.as_ref().ok().copied(),
                        error: r.err().and_then(err),
                    }
                }));
            }
            Records::SpectralEdge(rows)
        }
    };
    Ok((records, None))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}
