//! Summary statistics, threshold scan and CSV writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::compare::{FdReport, PdReport};
use super::EpisodeStats;
use crate::error::Result;
use crate::sim::ScenarioTag;

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks on ties). NaN when undefined.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

/// Equal-width histogram over `[lo, hi]`; returns counts per bin.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        let b = if width > 0.0 { ((x - lo) / width).floor() as isize } else { 0 };
        counts[b.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    pub acceptable_ceiling: f64,
    pub optimal_ceiling: f64,
    /// Smallest bucket lower bound from which every bucket's loss is under the ceiling.
    pub acceptable_at: Option<f64>,
    pub optimal_at: Option<f64>,
}

impl Thresholds {
    pub fn render(&self) -> String {
        let show = |v: Option<f64>| v.map_or("not reached".to_string(), |p| format!("p_cv >= {p:.1}"));
        format!(
            "acceptability (loss < {}%): {}\noptimality (loss < {}%): {}\n",
            self.acceptable_ceiling,
            show(self.acceptable_at),
            self.optimal_ceiling,
            show(self.optimal_at)
        )
    }
}

fn suffix_start(buckets: &[(f64, f64)], ceiling: f64) -> Option<f64> {
    let mut start = None;
    for &(lo, loss) in buckets.iter().rev() {
        if loss.is_nan() {
            continue;
        }
        if loss < ceiling {
            start = Some(lo);
        } else {
            break;
        }
    }
    start
}

/// Scans `(bucket lower bound, loss %)` pairs, ascending in `p_cv`. Empty
/// buckets (NaN loss) are skipped.
pub fn threshold_report(buckets: &[(f64, f64)], acceptable_ceiling: f64, optimal_ceiling: f64) -> Thresholds {
    Thresholds {
        acceptable_ceiling,
        optimal_ceiling,
        acceptable_at: suffix_start(buckets, acceptable_ceiling),
        optimal_at: suffix_start(buckets, optimal_ceiling),
    }
}

pub fn write_episodes_csv(path: &Path, stats: &[EpisodeStats]) -> Result<()> {
    let mut s = String::from("scenario,controller,seed,p_cv,emtd,throughput,inserted,mean_queue,steps,arrival_digest\n");
    for e in stats {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:016x}",
            e.scenario, e.controller, e.seed, e.p_cv, e.emtd, e.throughput, e.inserted, e.mean_queue, e.steps,
            e.arrival_digest
        )
        .expect("write to string");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_fd_summary_csv(path: &Path, report: &FdReport) -> Result<()> {
    let mut s = String::from("scenario,controller,episodes,mean_emtd,std_emtd\n");
    for r in &report.summary {
        writeln!(s, "{},{},{},{},{}", r.scenario, r.controller, r.episodes, r.mean_emtd, r.std_emtd)
            .expect("write to string");
    }
    fs::write(path, s)?;
    Ok(())
}

/// One histogram per scenario: `bin_lo,bin_hi,<controller counts...>`.
pub fn write_fd_hist_csv(dir: &Path, report: &FdReport, bins: usize) -> Result<()> {
    let mut scenarios: Vec<ScenarioTag> = report.summary.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    for tag in scenarios {
        let controllers: Vec<&str> = report
            .summary
            .iter()
            .filter(|r| r.scenario == tag)
            .map(|r| r.controller.as_str())
            .collect();
        let values: Vec<f64> = report.episodes.iter().filter(|e| e.scenario == tag).map(|e| e.emtd).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let counts: Vec<Vec<usize>> = controllers
            .iter()
            .map(|c| {
                let xs: Vec<f64> = report
                    .episodes
                    .iter()
                    .filter(|e| e.scenario == tag && e.controller == *c)
                    .map(|e| e.emtd)
                    .collect();
                histogram(&xs, lo, hi, bins)
            })
            .collect();
        let mut s = format!("bin_lo,bin_hi,{}\n", controllers.join(","));
        let width = (hi - lo) / bins as f64;
        for b in 0..bins {
            let row: Vec<String> = counts.iter().map(|c| c[b].to_string()).collect();
            writeln!(s, "{},{},{}", lo + b as f64 * width, lo + (b + 1) as f64 * width, row.join(","))
                .expect("write to string");
        }
        fs::write(dir.join(format!("fd_hist_{tag}.csv")), s)?;
    }
    Ok(())
}

/// Ten bucket rows per report.
pub fn write_pd_buckets_csv(path: &Path, reports: &[PdReport]) -> Result<()> {
    let mut s = String::from(
        "scenario,bucket_lo,bucket_hi,episodes,mean_emtd_pd,mean_emtd_fd,loss_pct,mean_episode_loss_pct\n",
    );
    for r in reports {
        for b in &r.buckets {
            writeln!(
                s,
                "{},{:.1},{:.1},{},{},{},{},{}",
                r.scenario, b.lo, b.hi, b.episodes, b.mean_pd, b.mean_fd, b.loss_pct, b.mean_episode_loss_pct
            )
            .expect("write to string");
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Bucketed episodes first, then the `p_cv = 1` episodes, per report.
pub fn write_pd_episodes_csv(path: &Path, reports: &[PdReport]) -> Result<()> {
    let mut s = String::from("scenario,seed,p_cv,bucket,emtd_pd,emtd_fd,loss_pct\n");
    for r in reports {
        for e in r.episodes.iter().chain(&r.full_detection) {
            writeln!(s, "{},{},{},{},{},{},{}", r.scenario, e.seed, e.p_cv, e.bucket, e.emtd_pd, e.emtd_fd, e.loss_pct)
                .expect("write to string");
        }
    }
    fs::write(path, s)?;
    Ok(())
}
