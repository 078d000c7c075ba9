//! Full-detection and partial-detection comparisons.

use std::sync::Arc;

use rayon::prelude::*;

use super::report::{mean_std, spearman};
use super::{run_episode, ControllerSpec, EpisodeStats};
use crate::error::Result;
use crate::rng::{streams, RngStream};
use crate::sim::{build_scenario, sample_demand, DemandConfig, Intersection, ScenarioTag};

/// Penetration-rate buckets `[k/10, (k+1)/10)`, the last one closed.
pub const BUCKETS: usize = 10;

/// Seeded demand list shared by every controller of a comparison.
pub fn evaluation_demands(intersection: &Intersection, seed: u64, episodes: usize) -> Vec<DemandConfig> {
    let mut rng = RngStream::with_stream(seed, streams::EVALUATION);
    (0..episodes).map(|_| sample_demand(intersection, &mut rng)).collect()
}

/// Demand list with `per_bucket` episodes in every penetration bucket
/// (p_cv drawn uniformly inside the bucket).
pub fn pd_demands(intersection: &Intersection, seed: u64, per_bucket: usize) -> Vec<DemandConfig> {
    let mut rng = RngStream::with_stream(seed, streams::EVALUATION);
    let mut out = Vec::with_capacity(BUCKETS * per_bucket);
    for k in 0..BUCKETS {
        for _ in 0..per_bucket {
            let d = sample_demand(intersection, &mut rng);
            let p = (k as f64 + rng.uniform()) / BUCKETS as f64;
            out.push(d.with_p_cv(p));
        }
    }
    out
}

pub fn bucket_of(p_cv: f64) -> usize {
    ((p_cv * BUCKETS as f64).floor() as usize).min(BUCKETS - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdSummaryRow {
    pub scenario: ScenarioTag,
    pub controller: String,
    pub episodes: usize,
    pub mean_emtd: f64,
    pub std_emtd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub summary: Vec<FdSummaryRow>,
    /// Per-episode stats, grouped by scenario then controller, in seed order.
    pub episodes: Vec<EpisodeStats>,
}

impl FdReport {
    pub fn mean(&self, scenario: ScenarioTag, controller: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.scenario == scenario && r.controller == controller)
            .map(|r| r.mean_emtd)
    }
}

/// Runs every controller over the same `episodes` seeded demands with full
/// detection (`p_cv = 1`). `controllers` maps a scenario to its controllers.
pub fn compare_fd<F>(
    scenarios: &[ScenarioTag],
    episodes: usize,
    seed: u64,
    max_green: Option<f64>,
    controllers: F,
) -> Result<FdReport>
where
    F: Fn(ScenarioTag) -> Result<Vec<ControllerSpec>>,
{
    let mut report = FdReport {
        summary: Vec::new(),
        episodes: Vec::new(),
    };
    for &tag in scenarios {
        let x = Arc::new(build_scenario(tag));
        let demands: Vec<DemandConfig> = evaluation_demands(&x, seed, episodes)
            .into_iter()
            .map(|d| d.with_p_cv(1.0))
            .collect();
        for spec in controllers(tag)? {
            let stats = run_all(&x, &spec, &demands, max_green)?;
            let emtd: Vec<f64> = stats.iter().map(|s| s.emtd).collect();
            let (mean, std) = mean_std(&emtd);
            report.summary.push(FdSummaryRow {
                scenario: tag,
                controller: spec.label(),
                episodes: stats.len(),
                mean_emtd: mean,
                std_emtd: std,
            });
            report.episodes.extend(stats);
        }
    }
    Ok(report)
}

/// Runs `spec` on every demand, in parallel, keeping the input order.
pub fn run_all(
    x: &Arc<Intersection>,
    spec: &ControllerSpec,
    demands: &[DemandConfig],
    max_green: Option<f64>,
) -> Result<Vec<EpisodeStats>> {
    let label = spec.label();
    demands
        .par_iter()
        .map(|d| {
            let mut c = spec.build(d.seed, x.speed_limit);
            let mut s = run_episode(x, c.as_mut(), d, max_green)?;
            s.controller = label.clone();
            Ok(s)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdEpisode {
    pub seed: u64,
    pub p_cv: f64,
    pub bucket: usize,
    pub emtd_pd: f64,
    pub emtd_fd: f64,
    /// `100 · (EMTD_PD - EMTD_FD) / EMTD_FD`.
    pub loss_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdBucket {
    pub lo: f64,
    pub hi: f64,
    pub episodes: usize,
    pub mean_pd: f64,
    pub mean_fd: f64,
    /// Loss of the bucket means, `100 · (mean_pd - mean_fd) / mean_fd`.
    pub loss_pct: f64,
    /// Mean of the per-episode losses.
    pub mean_episode_loss_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdReport {
    pub scenario: ScenarioTag,
    pub episodes: Vec<PdEpisode>,
    pub buckets: Vec<PdBucket>,
    /// Episodes replayed at `p_cv = 1` for the PD policy (loss must be 0).
    pub full_detection: Vec<PdEpisode>,
    /// Spearman correlation between bucket lower bound and bucket loss.
    pub spearman: f64,
}

#[derive(Clone, Debug)]
pub struct PdOptions {
    pub per_bucket: usize,
    /// Extra episodes run at exactly `p_cv = 1`.
    pub full_detection_episodes: usize,
    pub seed: u64,
    pub max_green: Option<f64>,
}

fn loss_pct(pd: f64, fd: f64) -> f64 {
    if fd > 0.0 {
        100.0 * (pd - fd) / fd
    } else {
        0.0
    }
}

/// Runs the PD policy at each episode's penetration rate and the FD
/// reference at `p_cv = 1` on the same demand.
pub fn compare_pd(
    scenario: ScenarioTag,
    pd_policy: &ControllerSpec,
    fd_reference: &ControllerSpec,
    options: &PdOptions,
) -> Result<PdReport> {
    let x = Arc::new(build_scenario(scenario));
    let demands = pd_demands(&x, options.seed, options.per_bucket);
    let mut full: Vec<DemandConfig> = evaluation_demands(&x, options.seed ^ 0x5eed, options.full_detection_episodes);
    for d in &mut full {
        d.p_cv = 1.0;
    }
    let fd_demands: Vec<DemandConfig> = demands.iter().chain(&full).map(|d| d.clone().with_p_cv(1.0)).collect();
    let pd_demands: Vec<DemandConfig> = demands.iter().chain(&full).cloned().collect();
    let pd = run_all(&x, pd_policy, &pd_demands, options.max_green)?;
    let fd = run_all(&x, fd_reference, &fd_demands, options.max_green)?;

    let pairs: Vec<PdEpisode> = pd
        .iter()
        .zip(&fd)
        .zip(&pd_demands)
        .map(|((p, f), d)| PdEpisode {
            seed: d.seed,
            p_cv: d.p_cv,
            bucket: bucket_of(d.p_cv),
            emtd_pd: p.emtd,
            emtd_fd: f.emtd,
            loss_pct: loss_pct(p.emtd, f.emtd),
        })
        .collect();
    let (episodes, full_detection) = pairs.split_at(demands.len());

    let buckets: Vec<PdBucket> = (0..BUCKETS)
        .map(|k| {
            let in_bucket: Vec<&PdEpisode> = episodes.iter().filter(|e| e.bucket == k).collect();
            let n = in_bucket.len();
            let mean = |f: fn(&PdEpisode) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    in_bucket.iter().map(|e| f(e)).sum::<f64>() / n as f64
                }
            };
            let (mean_pd, mean_fd) = (mean(|e| e.emtd_pd), mean(|e| e.emtd_fd));
            PdBucket {
                lo: k as f64 / BUCKETS as f64,
                hi: (k + 1) as f64 / BUCKETS as f64,
                episodes: n,
                mean_pd,
                mean_fd,
                loss_pct: if n == 0 { f64::NAN } else { loss_pct(mean_pd, mean_fd) },
                mean_episode_loss_pct: mean(|e| e.loss_pct),
            }
        })
        .collect();
    let (lo, loss): (Vec<f64>, Vec<f64>) = buckets
        .iter()
        .filter(|b| b.episodes > 0)
        .map(|b| (b.lo, b.loss_pct))
        .unzip();
    Ok(PdReport {
        scenario,
        spearman: spearman(&lo, &loss),
        episodes: episodes.to_vec(),
        full_detection: full_detection.to_vec(),
        buckets,
    })
}
