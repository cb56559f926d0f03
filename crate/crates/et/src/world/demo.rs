//! Expert demonstrations: dataset records and replay.
//!
//! Dataset files are JSON-Lines, one demonstration per line. Observations are
//! not stored; they are reconstructed by replaying the actions from the
//! seeded initial world.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{sample_task, Split, WorldConfig};
use super::step::{observe, step, Observation, StepResult};
use super::{ActionType, GridWorld, ObjectClass, Subgoal, TaskSpec, WorldError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Demonstration {
    pub seed: u64,
    pub split: Split,
    pub layout_id: u32,
    pub task: TaskSpec,
    pub subgoals: Vec<Subgoal>,
    pub actions: Vec<ActionType>,
    pub target_classes: Vec<Option<ObjectClass>>,
    pub subgoal_index: Vec<usize>,
    pub natural_tokens: Vec<String>,
    pub synthetic_tokens: Vec<String>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// (t+1)/T per step.
    pub fn overall_progress(&self) -> Vec<f64> {
        let t_total = self.actions.len() as f64;
        (1..=self.actions.len())
            .map(|t| t as f64 / t_total)
            .collect()
    }

    /// Within-subgoal progress per step.
    pub fn subgoal_progress(&self) -> Vec<f64> {
        let mut lens = vec![0usize; self.subgoals.len() + 1];
        for &s in &self.subgoal_index {
            lens[s] += 1;
        }
        let mut seen = vec![0usize; self.subgoals.len() + 1];
        self.subgoal_index
            .iter()
            .map(|&s| {
                seen[s] += 1;
                seen[s] as f64 / lens[s] as f64
            })
            .collect()
    }

    /// First timestep of each subgoal (empty subgoals get `None`).
    pub fn subgoal_starts(&self) -> Vec<Option<usize>> {
        let mut starts = vec![None; self.subgoals.len()];
        for (t, &s) in self.subgoal_index.iter().enumerate() {
            if s < starts.len() && starts[s].is_none() {
                starts[s] = Some(t);
            }
        }
        starts
    }
}

/// Sample a task and plan its expert trajectory; instruction tokens are
/// filled in by the annotation layer.
pub fn generate_demo(
    seed: u64,
    config: &WorldConfig,
    split: Split,
) -> Result<Demonstration, WorldError> {
    let (world, task) = sample_task(seed, config, split)?;
    let plan = super::planner::plan_expert(&world, &task)?;
    Ok(Demonstration {
        seed,
        split,
        layout_id: world.layout_id,
        task,
        subgoals: plan.subgoals,
        actions: plan.actions,
        target_classes: plan.target_classes,
        subgoal_index: plan.subgoal_index,
        natural_tokens: Vec::new(),
        synthetic_tokens: Vec::new(),
    })
}

/// Rebuild the initial world and replay the stored actions, collecting the
/// observation before each step. Errors if the world/task no longer matches
/// or any expert action fails.
pub fn replay(
    demo: &Demonstration,
    config: &WorldConfig,
) -> Result<(GridWorld, Vec<Observation>, GridWorld), WorldError> {
    let (initial, task) = sample_task(demo.seed, config, demo.split)?;
    if task != demo.task {
        return Err(WorldError::Replay(
            "sampled task differs from stored task (config drift?)".into(),
        ));
    }
    let mut sim = initial.clone();
    let mut observations = Vec::with_capacity(demo.actions.len());
    for (t, (&action, &target)) in demo
        .actions
        .iter()
        .zip(demo.target_classes.iter())
        .enumerate()
    {
        observations.push(observe(&sim));
        if step(&mut sim, action, target)? == StepResult::Failed {
            return Err(WorldError::Replay(format!(
                "expert action {} failed at step {t}",
                action.name()
            )));
        }
    }
    Ok((initial, observations, sim))
}

pub fn save_demos(path: &Path, demos: &[Demonstration]) -> Result<(), WorldError> {
    let mut w = BufWriter::new(File::create(path)?);
    for demo in demos {
        let line = serde_json::to_string(demo)
            .map_err(|e| WorldError::Replay(format!("encode: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_demos(path: &Path) -> Result<Vec<Demonstration>, WorldError> {
    let r = BufReader::new(File::open(path)?);
    let mut demos = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        demos.push(
            serde_json::from_str(&line).map_err(|e| WorldError::Decode {
                line: i + 1,
                err: e.to_string(),
            })?,
        );
    }
    Ok(demos)
}
