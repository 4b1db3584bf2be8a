//! Mode dispatch and the sweep loops.
//!
//! Work runs on the current rayon pool. Monte Carlo trials draw from
//! `trial_rng(seed, point << 40 | trial)`, and per-trial error counts are
//! summed as integers, so tables do not depend on the thread count.

use rayon::prelude::*;

use super::config::{Axis, ExperimentSpec, Mode, Series};
use super::table::{Cell, ResultTable, NOT_CONVERGED, NO_DATA, UNACHIEVABLE};
use crate::equalize::{equalize_fd, equalize_pd, symbol_errors};
use crate::error::{Error, Result};
use crate::info::{
    awgn_ser, min_beta_inverse, mutual_information, n0_from_snr_db, rate_point, snr_loss, Search,
};
use crate::model::{draw_channel, split_clusters, trial_rng, Constellation};
use crate::se::decoupled_variance;
use crate::Architecture;

const TRIAL_BITS: u32 = 40;

pub fn version_string() -> String {
    format!("decenteq {}", env!("CARGO_PKG_VERSION"))
}

/// Runs `spec` and returns its table.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = match spec.mode {
        Mode::SerMc => run_ser_mc(spec)?,
        Mode::RateCurve => run_rate_curve(spec)?,
        Mode::SeSweep => run_se_sweep(spec)?,
        Mode::MinBeta => run_min_beta(spec)?,
        Mode::SnrLoss => run_snr_loss(spec)?,
    };
    let mut meta = ResultTable::default();
    meta.meta("name", &spec.name);
    meta.meta("mode", spec.mode.name());
    meta.meta("spec_sha256", &spec.source_hash);
    meta.meta("seed", spec.seed);
    meta.meta("version", version_string());
    meta.meta("constellation", &spec.system.constellation);
    meta.meta("system", format!("{}x{}", spec.system.antennas, spec.system.users));
    meta.meta("cluster_weights", format!("{:?}", spec.weights()?));
    meta.metadata.append(&mut table.metadata);
    table.metadata = meta.metadata;
    Ok(table)
}

fn sentinel_for(e: &Error) -> Option<Cell> {
    match e {
        Error::NotConverged { .. } => Some(Cell::Sentinel(NOT_CONVERGED)),
        Error::Cluster { source, .. } => sentinel_for(source),
        _ => None,
    }
}

/// Turns solver non-convergence into a sentinel and passes other errors on.
fn cell(r: Result<f64>) -> Result<Cell> {
    match r {
        Ok(x) => Ok(Cell::num(x)),
        Err(e) => sentinel_for(&e).ok_or(e),
    }
}

fn search_cell(r: Result<Search>) -> Result<Cell> {
    match r {
        Ok(Search::Found(x)) => Ok(Cell::num(x)),
        Ok(Search::Unachievable) => Ok(Cell::Sentinel(UNACHIEVABLE)),
        Err(e) => sentinel_for(&e).ok_or(e),
    }
}

/// Evaluates `f` on every (point, series) pair in parallel and lays the
/// results out as one row per point.
fn grid_table<F>(spec: &ExperimentSpec, suffix: &str, f: F) -> Result<ResultTable>
where
    F: Fn(f64, &Series) -> Result<Cell> + Sync,
{
    let mut columns = vec![spec.sweep.axis.name().to_string()];
    columns.extend(spec.series.iter().map(|s| format!("{s}_{suffix}")));
    let jobs: Vec<(usize, usize)> = (0..spec.sweep.values.len())
        .flat_map(|p| (0..spec.series.len()).map(move |s| (p, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(p, s)| f(spec.sweep.values[p], &spec.series[s]))
        .collect::<Result<Vec<Cell>>>()?;
    let mut table = ResultTable::new(columns);
    for (p, chunk) in cells.chunks(spec.series.len()).enumerate() {
        let mut row = vec![Cell::Num(spec.sweep.values[p])];
        row.extend_from_slice(chunk);
        table.push_row(row);
    }
    Ok(table)
}

/// Rates from the SE fixed points, plus the AWGN reference.
///
/// The AWGN curve uses the noise variance N0 that the base array size maps
/// each SNR to.
pub fn run_rate_curve(spec: &ExperimentSpec) -> Result<ResultTable> {
    let con = spec.constellation()?;
    grid_table(spec, "rate", |snr, s| match s.kind {
        None => {
            let n0 = n0_from_snr_db(snr, spec.beta(s), con.es());
            cell(mutual_information(&con, n0))
        }
        Some(k) => {
            let weights = spec.series_weights(s)?;
            cell(rate_point(Some(k), s.architecture, spec.beta(s), snr, &con, &weights).map(|p| p.rate))
        }
    })
}

/// Decoupled variances over an SNR or β sweep.
pub fn run_se_sweep(spec: &ExperimentSpec) -> Result<ResultTable> {
    let con = spec.constellation()?;
    let fixed_snr = match spec.sweep.axis {
        Axis::SnrDb => None,
        _ => Some(spec.target_snr()?),
    };
    grid_table(spec, "sigma2", |x, s| {
        let (beta, snr) = match spec.sweep.axis {
            Axis::Beta => (x, fixed_snr.expect("validated")),
            Axis::BetaInv => (1.0 / x, fixed_snr.expect("validated")),
            _ => (spec.beta(s), x),
        };
        let n0 = n0_from_snr_db(snr, beta, con.es());
        match s.kind {
            None => Ok(Cell::num(n0)),
            Some(k) => cell(decoupled_variance(k, s.architecture, beta, n0, &spec.series_weights(s)?, &con)),
        }
    })
}

/// Minimum β⁻¹ over a loss-budget or target-rate sweep.
pub fn run_min_beta(spec: &ExperimentSpec) -> Result<ResultTable> {
    let con = spec.constellation()?;
    let weights = spec.weights()?;
    let (rate, loss) = match spec.sweep.axis {
        Axis::LossDb => (Some(spec.target_rate(&con)?), None),
        _ => (None, Some(spec.target_loss()?)),
    };
    let mut table = grid_table(spec, "beta_inv", |x, s| {
        let kind = s.kind.expect("validated: no awgn series");
        let (r, l) = (rate.unwrap_or(x), loss.unwrap_or(x));
        search_cell(min_beta_inverse(kind, s.architecture, r, l, &con, &weights))
    })?;
    if let Some(r) = rate {
        table.meta("target_rate", r);
    }
    if let Some(l) = loss {
        table.meta("target_loss_db", l);
    }
    Ok(table)
}

/// SNR loss against the AWGN channel over a β sweep.
pub fn run_snr_loss(spec: &ExperimentSpec) -> Result<ResultTable> {
    let con = spec.constellation()?;
    let weights = spec.weights()?;
    let rate = spec.target_rate(&con)?;
    let mut table = grid_table(spec, "loss_db", |x, s| {
        let kind = s.kind.expect("validated: no awgn series");
        let beta = if spec.sweep.axis == Axis::BetaInv { 1.0 / x } else { x };
        search_cell(snr_loss(kind, s.architecture, beta, rate, &con, &weights))
    })?;
    table.meta("target_rate", rate);
    Ok(table)
}

/// Per-series outcome of one Monte Carlo point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    errors: u64,
    failed: u64,
}

/// Simulated SER with its standard error and the SE-predicted SER.
///
/// Series sharing an array size see the same channel, symbols and noise in
/// every trial. A trial where an equalizer errors out is counted as failed
/// for that series and left out of its estimate.
pub fn run_ser_mc(spec: &ExperimentSpec) -> Result<ResultTable> {
    let con = spec.constellation()?;
    let points = spec.sweep.values.len();
    if spec.trials as u64 >= 1 << TRIAL_BITS || points as u64 >= 1 << (64 - TRIAL_BITS) {
        return Err(Error::InvalidConfig("too many trials or sweep points".into()));
    }

    let mut groups: Vec<((usize, usize), Vec<usize>)> = Vec::new();
    for (i, s) in spec.series.iter().enumerate() {
        let dims = spec.dims(s);
        match groups.iter_mut().find(|(d, _)| *d == dims) {
            Some((_, members)) => members.push(i),
            None => groups.push((dims, vec![i])),
        }
    }

    let mut columns = vec![spec.sweep.axis.name().to_string()];
    for s in &spec.series {
        columns.push(format!("{s}_ser"));
        columns.push(format!("{s}_se"));
        columns.push(format!("{s}_pred"));
    }
    let mut table = ResultTable::new(columns);
    let mut failed_total = vec![0u64; spec.series.len()];

    for (p, &snr) in spec.sweep.values.iter().enumerate() {
        let mut row = vec![Cell::Num(snr); 1 + 3 * spec.series.len()];
        for ((b, u), members) in &groups {
            let probe = &spec.series[members[0]];
            let beta = spec.beta(probe);
            let n0 = n0_from_snr_db(snr, beta, con.es());
            let cfg = spec.system_config(probe, n0)?;
            let tallies = (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(spec.seed, ((p as u64) << TRIAL_BITS) | t);
                    let real = draw_channel(&cfg, &mut rng);
                    let views = split_clusters(&real, &cfg);
                    members
                        .iter()
                        .map(|&i| {
                            let s = &spec.series[i];
                            let kind = s.kind.expect("validated: no awgn series");
                            let out = views.as_ref().map_err(Clone::clone).and_then(|v| match s.architecture {
                                Architecture::Fd => equalize_fd(v, &cfg, kind, spec.lama_iterations),
                                _ => equalize_pd(v, &cfg, kind, spec.lama_iterations),
                            });
                            match out {
                                Ok(o) => Tally {
                                    errors: symbol_errors(&o.hard, &real.s0_index) as u64,
                                    failed: 0,
                                },
                                Err(e) => {
                                    log::debug!("{s} at {snr} dB, trial {t}: {e}");
                                    Tally { errors: 0, failed: 1 }
                                }
                            }
                        })
                        .collect::<Vec<_>>()
                })
                .reduce(
                    || vec![Tally::default(); members.len()],
                    |a, b| {
                        a.iter()
                            .zip(&b)
                            .map(|(x, y)| Tally {
                                errors: x.errors + y.errors,
                                failed: x.failed + y.failed,
                            })
                            .collect()
                    },
                );
            for (&i, tally) in members.iter().zip(&tallies) {
                let s = &spec.series[i];
                failed_total[i] += tally.failed;
                let symbols = (spec.trials as u64 - tally.failed) * *u as u64;
                let (ser, se) = if symbols == 0 {
                    (Cell::Sentinel(NO_DATA), Cell::Sentinel(NO_DATA))
                } else {
                    let p_hat = tally.errors as f64 / symbols as f64;
                    (Cell::Num(p_hat), Cell::Num(standard_error(p_hat, symbols)))
                };
                let pred = predicted_ser(s, beta, n0, cfg.weights(), &con)?;
                row[1 + 3 * i] = ser;
                row[2 + 3 * i] = se;
                row[3 + 3 * i] = pred;
                log::info!("{s} ({b}x{u}) at {snr} dB: {:?} over {symbols} symbols", row[1 + 3 * i].value());
            }
        }
        table.push_row(row);
    }
    table.meta("trials", spec.trials);
    table.meta("lama_iterations", spec.lama_iterations);
    for (s, f) in spec.series.iter().zip(&failed_total) {
        table.meta(format!("failed_trials.{s}"), f);
    }
    Ok(table)
}

/// Binomial standard error √(p(1-p)/n) of an error rate estimated from `n`
/// symbol decisions.
pub fn standard_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// SER of the decoupled AWGN channel the SE predicts for `series`.
pub fn predicted_ser(series: &Series, beta: f64, n0: f64, weights: &[f64], con: &Constellation) -> Result<Cell> {
    let kind = series.kind.expect("validated: no awgn series");
    match decoupled_variance(kind, series.architecture, beta, n0, weights, con) {
        Ok(s2) => cell(awgn_ser(con, s2)),
        Err(e) => sentinel_for(&e).ok_or(e),
    }
}
