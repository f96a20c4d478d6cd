use std::fmt;

use serde::{Deserialize, Serialize};

use super::optimize::{optimize_logits, OptimizerConfig};
use super::phantom::{make_phantom, PhantomSpec};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossReport};
use crate::metrics::{ClassMetrics, Connectivity};
use crate::par;
use crate::volume::TUMOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Finite, but the total loss ended above its start or rose during the
    /// last tenth of the iterations.
    NotConverged,
    Diverged,
}

impl RunStatus {
    fn label(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NotConverged => "not_converged",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// Trace check applied to every finite run.
pub fn trace_converged(trace: &[LossReport]) -> bool {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return false;
    };
    let tail = &trace[trace.len() - trace.len() / 10..];
    last.total < first.total && tail.windows(2).all(|w| w[1].total <= w[0].total)
}

/// One `(alpha, seed)` run, scored on the tumor class against the clean labels.
/// `components` counts 26-connected tumor components of the prediction, the
/// proxy used here for outlier predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub alpha: f64,
    pub seed: u64,
    pub dsc_tumor: Option<f64>,
    pub hd_mm: Option<f64>,
    pub avd_mm: Option<f64>,
    pub components: Option<usize>,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

/// What the study needs per phantom: which labels to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Targets {
    #[default]
    Corrupted,
    Clean,
}

/// Fits the phantom of `spec` (its seed included) once per alpha and scores
/// each prediction.
pub fn run_outlier_study(
    spec: &PhantomSpec,
    alphas: &[f64],
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
) -> Result<StudyReport> {
    run_study(spec, alphas, &[spec.rng_seed], loss_cfg, opt_cfg, Targets::Corrupted)
}

/// Runs every `(seed, alpha)` pair; rows come out seed-major in input order.
/// Runs are independent and execute in parallel when enabled.
pub fn run_study(
    spec: &PhantomSpec,
    alphas: &[f64],
    seeds: &[u64],
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
    targets: Targets,
) -> Result<StudyReport> {
    if !alphas.contains(&0.0) {
        return Err(Error::InvalidArgument("alphas must include the 0.0 baseline".into()));
    }
    loss_cfg.validate()?;
    opt_cfg.validate()?;
    let jobs: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| alphas.iter().map(move |&a| (s, a)))
        .collect();
    let rows = par::map_indices(jobs.len(), |j| {
        let (seed, alpha) = jobs[j];
        run_one(spec, seed, alpha, loss_cfg, opt_cfg, targets)
    });
    Ok(StudyReport {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

fn run_one(
    spec: &PhantomSpec,
    seed: u64,
    alpha: f64,
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
    targets: Targets,
) -> Result<StudyRow> {
    let phantom = make_phantom(&spec.with_seed(seed))?;
    let fit_to = match targets {
        Targets::Corrupted => &phantom.corrupted,
        Targets::Clean => &phantom.clean,
    };
    let cfg = loss_cfg.with_alpha(alpha);
    let opt = OptimizerConfig {
        rng_seed: seed,
        ..*opt_cfg
    };
    match optimize_logits(fit_to, &cfg, &opt) {
        Ok((logits, trace)) => {
            let pred = logits.argmax_labels()?.with_num_classes(phantom.clean.num_classes())?;
            let m = ClassMetrics::evaluate(&pred, &phantom.clean, TUMOR, Connectivity::TwentySix)?;
            Ok(StudyRow {
                alpha,
                seed,
                dsc_tumor: Some(m.dsc),
                hd_mm: m.hd_mm,
                avd_mm: m.avd_mm,
                components: Some(m.components),
                status: if trace_converged(&trace) {
                    RunStatus::Ok
                } else {
                    RunStatus::NotConverged
                },
            })
        }
        Err(e) if e.is_numeric() => Ok(StudyRow {
            alpha,
            seed,
            dsc_tumor: None,
            hd_mm: None,
            avd_mm: None,
            components: None,
            status: RunStatus::Diverged,
        }),
        Err(e) => Err(e),
    }
}

/// Aggregate of all seeds for one alpha.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub runs: usize,
    pub median_components: Option<f64>,
    pub mean_dsc_tumor: Option<f64>,
    /// Seeds whose component count is strictly below that seed's baseline.
    pub fewer_than_baseline: usize,
    /// Seeds whose tumor DSC is at most 0.05 below that seed's baseline.
    pub dsc_within_tolerance: usize,
}

/// DSC drop, relative to the baseline run, still counted as preserved.
pub const DSC_TOLERANCE: f64 = 0.05;

impl StudyReport {
    pub fn alphas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.alpha) {
                out.push(r.alpha);
            }
        }
        out
    }

    pub fn baseline(&self, seed: u64) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.seed == seed && r.alpha == 0.0)
    }

    pub fn summarize(&self) -> Vec<AlphaSummary> {
        self.alphas()
            .into_iter()
            .map(|alpha| {
                let rows: Vec<&StudyRow> = self.rows.iter().filter(|r| r.alpha == alpha).collect();
                let mut comps: Vec<usize> = rows.iter().filter_map(|r| r.components).collect();
                comps.sort_unstable();
                let median_components = (!comps.is_empty()).then(|| {
                    let m = comps.len() / 2;
                    if comps.len() % 2 == 1 {
                        comps[m] as f64
                    } else {
                        (comps[m - 1] + comps[m]) as f64 / 2.0
                    }
                });
                let dscs: Vec<f64> = rows.iter().filter_map(|r| r.dsc_tumor).collect();
                let mean_dsc_tumor = (!dscs.is_empty()).then(|| dscs.iter().sum::<f64>() / dscs.len() as f64);
                let mut fewer_than_baseline = 0;
                let mut dsc_within_tolerance = 0;
                for r in &rows {
                    let Some(base) = self.baseline(r.seed) else { continue };
                    if let (Some(c), Some(b)) = (r.components, base.components) {
                        if c < b {
                            fewer_than_baseline += 1;
                        }
                    }
                    if let (Some(d), Some(b)) = (r.dsc_tumor, base.dsc_tumor) {
                        if d >= b - DSC_TOLERANCE {
                            dsc_within_tolerance += 1;
                        }
                    }
                }
                AlphaSummary {
                    alpha,
                    runs: rows.len(),
                    median_components,
                    mean_dsc_tumor,
                    fewer_than_baseline,
                    dsc_within_tolerance,
                }
            })
            .collect()
    }

    /// Seeds for which this alpha removes components without losing more
    /// than [`DSC_TOLERANCE`] of tumor DSC relative to the baseline.
    pub fn seeds_improved(&self, alpha: f64) -> usize {
        self.rows
            .iter()
            .filter(|r| r.alpha == alpha)
            .filter(|r| {
                let Some(base) = self.baseline(r.seed) else { return false };
                matches!(
                    (r.components, base.components, r.dsc_tumor, base.dsc_tumor),
                    (Some(c), Some(bc), Some(d), Some(bd)) if c < bc && d >= bd - DSC_TOLERANCE
                )
            })
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

impl fmt::Display for StudyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>7} {:>6} {:>10} {:>9} {:>9} {:>11} {:>9}",
            "alpha", "seed", "DSC_tumor", "HD(mm)", "AVD(mm)", "components", "status"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>7} {:>6} {:>10} {:>9} {:>9} {:>11} {:>9}",
                r.alpha,
                r.seed,
                opt(r.dsc_tumor, 4),
                opt(r.hd_mm, 2),
                opt(r.avd_mm, 3),
                r.components.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
                r.status.label()
            )?;
        }
        writeln!(f)?;
        writeln!(f, "components = 26-connected tumor components (outlier proxy)")?;
        writeln!(
            f,
            "{:>7} {:>5} {:>12} {:>10} {:>9} {:>9}  ",
            "alpha", "runs", "median_comp", "mean_DSC", "fewer", "improved"
        )?;
        for s in self.summarize() {
            let improved = self.seeds_improved(s.alpha);
            let mark = if s.alpha != 0.0 && s.fewer_than_baseline > 0 { " *" } else { "" };
            writeln!(
                f,
                "{:>7} {:>5} {:>12} {:>10} {:>9} {:>9}{mark}",
                s.alpha,
                s.runs,
                opt(s.median_components, 1),
                opt(s.mean_dsc_tumor, 4),
                s.fewer_than_baseline,
                improved
            )?;
        }
        Ok(())
    }
}
