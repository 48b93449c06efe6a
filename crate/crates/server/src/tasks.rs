use anyhow::{bail, Context, Result};
use std::path::Path;
use streetsim::episode::TaskSpec;
use streetsim::{mmnav, mrs};

/// Loads a task file of either benchmark, dispatching on its schema tag.
pub fn load_task_file(path: &Path) -> Result<Vec<TaskSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or_default();
    Ok(match schema {
        mmnav::TASK_SCHEMA => mmnav::load_tasks(path)?.into_iter().map(TaskSpec::Mmnav).collect(),
        mrs::TASK_SCHEMA => mrs::load_tasks(path)?.into_iter().map(TaskSpec::Mrs).collect(),
        other => bail!("{}: unknown task schema {other:?}", path.display()),
    })
}

pub fn select_task(tasks: Vec<TaskSpec>, index: usize) -> Result<TaskSpec> {
    let n = tasks.len();
    tasks.into_iter().nth(index).with_context(|| format!("task index {index} out of range ({n} tasks)"))
}

pub fn apply_tolerances(task: &mut TaskSpec, position: Option<f64>, heading: Option<f64>) {
    if let TaskSpec::Mmnav(t) = task {
        for s in &mut t.subtasks {
            if let Some(p) = position {
                s.goal.position_tolerance = p;
            }
            if let Some(h) = heading {
                s.goal.heading_tolerance = h;
            }
        }
    }
}
