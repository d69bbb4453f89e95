use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gaitlab::Emotion;
use crate::{Error, Result};

use super::grid::Pose;

/// Episode-level metadata, written as the first line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub start: Pose,
    pub goal: (f64, f64),
    pub goal_radius: f64,
    pub policy: String,
}

/// Per-human state at one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanTick {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub emotion: Emotion,
    pub comfort: f64,
}

/// One tick: robot pose after the step, the action taken, per-human state,
/// reward components, and any events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceTick {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub action: usize,
    pub humans: Vec<HumanTick>,
    pub r_goal: f64,
    pub r_collision: f64,
    pub r_smooth: f64,
    pub r_emotion: f64,
    pub r_total: f64,
    pub events: Vec<String>,
    pub done: bool,
}

/// A full episode record: metadata plus one record per tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub ticks: Vec<TraceTick>,
}

impl Trace {
    pub fn success(&self) -> bool {
        self.ticks.iter().any(|t| t.events.iter().any(|e| e == "goal_reached"))
    }

    pub fn collided(&self) -> bool {
        self.ticks.iter().any(|t| t.events.iter().any(|e| e == "collision"))
    }

    /// Writes the trace as JSON lines (meta first), atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        serde_json::to_writer(&mut buf, &self.meta)?;
        buf.push(b'\n');
        for tick in &self.ticks {
            serde_json::to_writer(&mut buf, tick)?;
            buf.push(b'\n');
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Trace> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let meta_line = lines
            .next()
            .ok_or_else(|| Error::schema(Some(0), "trace file is empty"))??;
        let meta: TraceMeta = serde_json::from_str(&meta_line)
            .map_err(|e| Error::schema(Some(0), format!("trace meta: {e}")))?;
        let mut ticks = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tick: TraceTick = serde_json::from_str(&line)
                .map_err(|e| Error::schema(Some(i + 1), format!("trace tick: {e}")))?;
            ticks.push(tick);
        }
        Ok(Trace { meta, ticks })
    }
}
