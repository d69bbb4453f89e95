//! Navigation metrics and run comparison: total distance, elapsed time,
//! average personal-space deviation, and mean ± std tables over seeds.

use std::collections::BTreeMap;

use crate::simworld::Trace;
use crate::{Error, Result};

/// Episode-level navigation metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavMetrics {
    pub total_distance: f64,
    pub elapsed_time: f64,
    pub delta_ps_avg: f64,
    pub success: bool,
    pub collision: bool,
}

/// One robot–human proximity episode: a contiguous interval with the robot
/// closer than 3× the human's comfort radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Encounter {
    pub human: usize,
    pub entry_tick: usize,
    pub exit_tick: usize,
    pub min_distance: f64,
    /// Comfort radius at the minimum-distance tick.
    pub comfort_at_min: f64,
}

impl Encounter {
    /// Personal-space deviation of this encounter: how far inside the
    /// comfort radius the robot intruded at its closest approach.
    pub fn deviation(&self) -> f64 {
        (self.comfort_at_min - self.min_distance).max(0.0)
    }
}

/// Multiple of the comfort radius delimiting an encounter.
const ENCOUNTER_RADIUS_FACTOR: f64 = 3.0;

/// Extracts all encounters from a trace, per human.
pub fn encounters(trace: &Trace) -> Vec<Encounter> {
    let mut out = Vec::new();
    let human_ids: Vec<usize> = trace
        .ticks
        .first()
        .map(|t| t.humans.iter().map(|h| h.id).collect())
        .unwrap_or_default();
    for hid in human_ids {
        let mut current: Option<Encounter> = None;
        for tick in &trace.ticks {
            let Some(h) = tick.humans.iter().find(|h| h.id == hid) else {
                continue;
            };
            let d = ((h.x - tick.x).powi(2) + (h.y - tick.y).powi(2)).sqrt();
            let inside = h.comfort > 0.0 && d < ENCOUNTER_RADIUS_FACTOR * h.comfort;
            match (&mut current, inside) {
                (None, true) => {
                    current = Some(Encounter {
                        human: hid,
                        entry_tick: tick.t,
                        exit_tick: tick.t,
                        min_distance: d,
                        comfort_at_min: h.comfort,
                    });
                }
                (Some(e), true) => {
                    e.exit_tick = tick.t;
                    if d < e.min_distance {
                        e.min_distance = d;
                        e.comfort_at_min = h.comfort;
                    }
                }
                (Some(_), false) => {
                    out.push(current.take().unwrap());
                }
                (None, false) => {}
            }
        }
        if let Some(e) = current {
            out.push(e);
        }
    }
    out
}

/// Average personal-space deviation over all encounters in a trace
/// (0 when there are none).
pub fn delta_ps(trace: &Trace) -> f64 {
    let enc = encounters(trace);
    if enc.is_empty() {
        return 0.0;
    }
    enc.iter().map(Encounter::deviation).sum::<f64>() / enc.len() as f64
}

/// Computes the navigation metrics of a trace. Distance sums consecutive
/// robot displacements (the start pose from the metadata anchors the first
/// step); time is ticks × dt.
pub fn nav_metrics(trace: &Trace) -> Result<NavMetrics> {
    if trace.ticks.is_empty() {
        return Err(Error::config("nav_metrics on an empty trace"));
    }
    let mut dist = 0.0;
    let mut prev = (trace.meta.start.x, trace.meta.start.y);
    for tick in &trace.ticks {
        dist += ((tick.x - prev.0).powi(2) + (tick.y - prev.1).powi(2)).sqrt();
        prev = (tick.x, tick.y);
    }
    Ok(NavMetrics {
        total_distance: dist,
        elapsed_time: trace.ticks.len() as f64 * trace.meta.dt,
        delta_ps_avg: delta_ps(trace),
        success: trace.success(),
        collision: trace.collided(),
    })
}

/// One evaluated run for the comparison table.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub method: String,
    pub scenario: String,
    pub seed: u64,
    pub metrics: NavMetrics,
}

/// Aggregated row: mean ± std of every metric over a group of runs.
#[derive(Clone, Debug)]
pub struct GroupRow {
    pub method: String,
    pub scenario: String,
    pub runs: usize,
    pub distance_mean: f64,
    pub distance_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub delta_ps_mean: f64,
    pub delta_ps_std: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
}

/// How [`compare_runs`] groups records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    ByMethod,
    ByMethodAndScenario,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups runs and aggregates their metrics; rows sort by group key.
pub fn compare_runs(runs: &[RunRecord], grouping: Grouping) -> Result<Vec<GroupRow>> {
    if runs.is_empty() {
        return Err(Error::config("compare_runs needs at least one run"));
    }
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        let key = match grouping {
            Grouping::ByMethod => (r.method.clone(), String::new()),
            Grouping::ByMethodAndScenario => (r.method.clone(), r.scenario.clone()),
        };
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((method, scenario), members) in groups {
        let dist: Vec<f64> = members.iter().map(|r| r.metrics.total_distance).collect();
        let time: Vec<f64> = members.iter().map(|r| r.metrics.elapsed_time).collect();
        let dps: Vec<f64> = members.iter().map(|r| r.metrics.delta_ps_avg).collect();
        let (dm, ds) = mean_std(&dist);
        let (tm, ts) = mean_std(&time);
        let (pm, ps) = mean_std(&dps);
        rows.push(GroupRow {
            method,
            scenario,
            runs: members.len(),
            distance_mean: dm,
            distance_std: ds,
            time_mean: tm,
            time_std: ts,
            delta_ps_mean: pm,
            delta_ps_std: ps,
            success_rate: members.iter().filter(|r| r.metrics.success).count() as f64 / members.len() as f64,
            collision_rate: members.iter().filter(|r| r.metrics.collision).count() as f64
                / members.len() as f64,
        });
    }
    Ok(rows)
}

/// Per-run CSV with the stable column set.
pub fn runs_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("method,scenario,seed,distance_m,time_s,delta_ps_m,success,collision\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.scenario,
            r.seed,
            r.metrics.total_distance,
            r.metrics.elapsed_time,
            r.metrics.delta_ps_avg,
            r.metrics.success,
            r.metrics.collision
        ));
    }
    out
}

/// Aggregate CSV (one row per group).
pub fn groups_csv(rows: &[GroupRow]) -> String {
    let mut out = String::from(
        "method,scenario,runs,distance_mean,distance_std,time_mean,time_std,delta_ps_mean,delta_ps_std,success_rate,collision_rate\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.scenario,
            r.runs,
            r.distance_mean,
            r.distance_std,
            r.time_mean,
            r.time_std,
            r.delta_ps_mean,
            r.delta_ps_std,
            r.success_rate,
            r.collision_rate
        ));
    }
    out
}

/// Aligned text table of the aggregate rows.
pub fn groups_table(rows: &[GroupRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<28} {:<16} {:>5} {:>16} {:>14} {:>16} {:>9}\n",
        "method", "scenario", "runs", "distance (m)", "time (s)", "delta_ps (m)", "success"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<28} {:<16} {:>5} {:>8.2}±{:<7.2} {:>7.2}±{:<6.2} {:>8.3}±{:<7.3} {:>8.0}%\n",
            r.method,
            r.scenario,
            r.runs,
            r.distance_mean,
            r.distance_std,
            r.time_mean,
            r.time_std,
            r.delta_ps_mean,
            r.delta_ps_std,
            r.success_rate * 100.0
        ));
    }
    out
}
