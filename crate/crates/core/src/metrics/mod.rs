//! Benchmark metrics: subtask success, distance and task progress, safety
//! counts and Wilson score intervals.

use crate::env::EventCounts;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no episode results to aggregate")]
    EmptyInput,
}

fn domain(msg: impl Into<String>) -> MetricsError {
    MetricsError::Domain(msg.into())
}

pub fn subtask_success_rate(completed: u32, total: u32) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(domain("subtask total is zero"));
    }
    if completed > total {
        return Err(domain(format!("{completed} completed of {total}")));
    }
    Ok(completed as f64 / total as f64)
}

fn progress(d0: f64, dt: f64, what: &str) -> Result<f64, MetricsError> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(domain(format!("{what} initial distance must be positive, got {d0}")));
    }
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(domain(format!("{what} final distance must be non-negative, got {dt}")));
    }
    Ok(((d0 - dt) / d0).max(0.0))
}

/// Relative reduction of the agent-to-goal distance, floored at zero.
pub fn distance_progress(d0: f64, dt: f64) -> Result<f64, MetricsError> {
    progress(d0, dt, "goal")
}

/// Relative reduction of the robot-to-robot distance, floored at zero.
pub fn task_progress(d0: f64, dt: f64) -> Result<f64, MetricsError> {
    progress(d0, dt, "pair")
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u32, n: u32, confidence: f64) -> Result<(f64, f64), MetricsError> {
    if n == 0 || successes > n {
        return Err(domain(format!("{successes} successes of {n} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Mmnav,
    Mrs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task: u32,
    pub benchmark: Benchmark,
    pub success: bool,
    pub subtasks_total: u32,
    pub subtasks_completed: u32,
    /// Agent-to-goal Manhattan distances at start and end.
    pub d0: f64,
    pub dt: f64,
    pub events: EventCounts,
    /// Robot-to-robot Manhattan distances at start and end.
    pub pair_d0: Option<f64>,
    pub pair_dt: Option<f64>,
    pub met: Option<bool>,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u32,
    pub n: u32,
    pub pct: f64,
    pub ci_low_pct: f64,
    pub ci_high_pct: f64,
}

impl Proportion {
    pub fn new(successes: u32, n: u32) -> Result<Self, MetricsError> {
        let (lo, hi) = wilson_interval(successes, n, 0.95)?;
        Ok(Self {
            successes,
            n,
            pct: 100.0 * successes as f64 / n as f64,
            ci_low_pct: 100.0 * lo,
            ci_high_pct: 100.0 * hi,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub episodes: u32,
    pub sr: Option<Proportion>,
    pub ssr_pct: Option<f64>,
    pub dp_pct: Option<f64>,
    pub mean_static_collisions: f64,
    pub mean_dynamic_collisions: f64,
    pub mean_red_light_violations: f64,
    pub csr: Option<Proportion>,
    pub tp_pct: Option<f64>,
    pub mean_steps: f64,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate_report(label: &str, results: &[EpisodeResult]) -> Result<MetricsReport, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let nav: Vec<&EpisodeResult> = results.iter().filter(|r| r.benchmark == Benchmark::Mmnav).collect();
    let mrs: Vec<&EpisodeResult> = results.iter().filter(|r| r.benchmark == Benchmark::Mrs).collect();
    let n = results.len() as f64;

    let mut ssr = Vec::new();
    let mut dp = Vec::new();
    for r in &nav {
        ssr.push(subtask_success_rate(r.subtasks_completed, r.subtasks_total)?);
        dp.push(distance_progress(r.d0, r.dt)?);
    }
    let mut tp = Vec::new();
    for r in &mrs {
        let (d0, dt) = r
            .pair_d0
            .zip(r.pair_dt)
            .ok_or_else(|| domain(format!("search task {} lacks pair distances", r.task)))?;
        tp.push(task_progress(d0, dt)?);
    }
    let pct = |x: Option<f64>| x.map(|v| 100.0 * v);
    let sr = if nav.is_empty() {
        None
    } else {
        Some(Proportion::new(nav.iter().filter(|r| r.success).count() as u32, nav.len() as u32)?)
    };
    let csr = if mrs.is_empty() {
        None
    } else {
        let met = mrs.iter().filter(|r| r.met.unwrap_or(r.success)).count() as u32;
        Some(Proportion::new(met, mrs.len() as u32)?)
    };
    let sum = |f: fn(&EventCounts) -> u32| results.iter().map(|r| f(&r.events) as f64).sum::<f64>() / n;
    Ok(MetricsReport {
        label: label.to_string(),
        episodes: results.len() as u32,
        sr,
        ssr_pct: pct(mean(&ssr)),
        dp_pct: pct(mean(&dp)),
        mean_static_collisions: sum(|e| e.static_collisions),
        mean_dynamic_collisions: sum(|e| e.dynamic_collisions),
        mean_red_light_violations: sum(|e| e.red_light_violations),
        csr,
        tp_pct: pct(mean(&tp)),
        mean_steps: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
    })
}

impl MetricsReport {
    /// Plain-text table, one metric per row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "report: {} ({} episodes)", self.label, self.episodes);
        let prop = |p: &Proportion| format!("{:6.2}%  [{:.2}, {:.2}]  ({}/{})", p.pct, p.ci_low_pct, p.ci_high_pct, p.successes, p.n);
        if let Some(p) = &self.sr {
            let _ = writeln!(s, "{:<24}{}", "SR", prop(p));
        }
        if let Some(v) = self.ssr_pct {
            let _ = writeln!(s, "{:<24}{:6.2}%", "Subtask SR", v);
        }
        if let Some(v) = self.dp_pct {
            let _ = writeln!(s, "{:<24}{:6.2}%", "Distance Progress", v);
        }
        if let Some(p) = &self.csr {
            let _ = writeln!(s, "{:<24}{}", "CSR", prop(p));
        }
        if let Some(v) = self.tp_pct {
            let _ = writeln!(s, "{:<24}{:6.2}%", "Task Progress", v);
        }
        let _ = writeln!(s, "{:<24}{:.3}", "Static collisions", self.mean_static_collisions);
        let _ = writeln!(s, "{:<24}{:.3}", "Dynamic collisions", self.mean_dynamic_collisions);
        let _ = writeln!(s, "{:<24}{:.3}", "Red-light violations", self.mean_red_light_violations);
        let _ = writeln!(s, "{:<24}{:.1}", "Mean steps", self.mean_steps);
        s
    }
}
