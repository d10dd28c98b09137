//! Summaries of one or more evaluation outputs.
//!
//! Accepted inputs: `suite.json` reports, per-trajectory score CSVs
//! (`controller,task,trajectory,mse,steps`) and per-step CSVs
//! (`controller,task,trajectory,step,error`). Means are step-weighted.
//! Unreadable inputs are listed and skipped.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::rollout::{fmt_f64, SuiteReport};

/// Per-trajectory entry of the distribution table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub controller: String,
    pub task: Task,
    pub trajectory: String,
    pub mse: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: String,
    pub by_task: BTreeMap<Task, f64>,
    pub overall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher_forced_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub scores: Vec<Score>,
    pub problems: Vec<Problem>,
}

#[derive(Deserialize)]
struct StepRow {
    controller: String,
    task: Task,
    trajectory: String,
    #[allow(dead_code)]
    step: usize,
    error: f64,
}

fn read_input(path: &Path) -> Result<(Vec<Score>, BTreeMap<String, f64>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    if path.extension().is_some_and(|e| e == "json") {
        let suite: SuiteReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let tf = suite.controllers.iter().map(|r| (r.name.clone(), r.teacher_forced_mse)).collect();
        let scores = suite
            .trajectories
            .into_iter()
            .map(|s| Score {
                controller: s.controller,
                task: s.task,
                trajectory: s.trajectory,
                mse: s.mse,
                steps: s.steps,
            })
            .collect();
        return Ok((scores, tf));
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().any(|h| h == "step") {
        // Per-step rows: accumulate per trajectory, keeping first-seen order.
        let mut order: Vec<(String, String)> = Vec::new();
        let mut acc: BTreeMap<(String, String), (Task, f64, usize)> = BTreeMap::new();
        for row in rdr.deserialize::<StepRow>() {
            let r = row.map_err(|e| e.to_string())?;
            let key = (r.controller, r.trajectory);
            let e = acc.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (r.task, 0.0, 0)
            });
            e.1 += r.error;
            e.2 += 1;
        }
        let scores = order
            .into_iter()
            .map(|key| {
                let (task, sum, n) = acc[&key];
                Score {
                    controller: key.0,
                    task,
                    trajectory: key.1,
                    mse: sum / n as f64,
                    steps: n,
                }
            })
            .collect();
        return Ok((scores, BTreeMap::new()));
    }
    let scores = rdr
        .deserialize::<Score>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok((scores, BTreeMap::new()))
}

/// Reads every input and tabulates per-controller, per-task MSE.
pub fn summarize(paths: &[PathBuf]) -> Summary {
    let mut summary = Summary::default();
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    let mut seen: std::collections::HashSet<(String, String)> = Default::default();
    for path in paths {
        match read_input(path) {
            Ok((scores, t)) => {
                for (k, v) in t {
                    tf.entry(k).or_insert(v);
                }
                for s in scores {
                    if seen.insert((s.controller.clone(), s.trajectory.clone())) {
                        summary.scores.push(s);
                    } else {
                        summary.problems.push(Problem {
                            path: path.clone(),
                            message: format!("duplicate score for {} on {}; kept the first", s.controller, s.trajectory),
                        });
                    }
                }
            }
            Err(message) => summary.problems.push(Problem {
                path: path.clone(),
                message,
            }),
        }
    }
    let mut controllers: Vec<String> = Vec::new();
    for s in &summary.scores {
        if !controllers.contains(&s.controller) {
            controllers.push(s.controller.clone());
        }
    }
    for c in controllers {
        let mine: Vec<&Score> = summary.scores.iter().filter(|s| s.controller == c).collect();
        let mean = |it: &mut dyn Iterator<Item = &&Score>| {
            let (sum, n) = it.fold((0.0, 0usize), |(a, n), s| (a + s.mse * s.steps as f64, n + s.steps));
            sum / n as f64
        };
        let mut by_task = BTreeMap::new();
        for task in Task::ALL {
            if mine.iter().any(|s| s.task == task) {
                by_task.insert(task, mean(&mut mine.iter().filter(|s| s.task == task)));
            }
        }
        summary.rows.push(SummaryRow {
            teacher_forced_mse: tf.get(&c).copied(),
            overall: mean(&mut mine.iter()),
            controller: c,
            by_task,
        });
    }
    summary
}

impl Summary {
    /// `controller,<task>...,overall,teacher_forced`; empty cells where a
    /// controller has no trials of a task.
    pub fn write_table_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["controller".to_string()];
        header.extend(Task::ALL.iter().map(|t| t.to_string()));
        header.extend(["overall".into(), "teacher_forced".into()]);
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.controller.clone()];
            rec.extend(Task::ALL.iter().map(|t| r.by_task.get(t).map(|v| fmt_f64(*v)).unwrap_or_default()));
            rec.push(fmt_f64(r.overall));
            rec.push(r.teacher_forced_mse.map(fmt_f64).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// One line per trajectory, for box plots.
    pub fn write_distribution_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.scores {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<14}", "controller");
        for t in Task::ALL {
            s += &format!(" {:>16}", t.as_str());
        }
        s += &format!(" {:>12} {:>14}\n", "overall", "teacher-forced");
        for r in &self.rows {
            s += &format!("{:<14}", r.controller);
            for t in Task::ALL {
                match r.by_task.get(&t) {
                    Some(v) => s += &format!(" {v:>16.6e}"),
                    None => s += &format!(" {:>16}", "-"),
                }
            }
            s += &format!(" {:>12.6e}", r.overall);
            match r.teacher_forced_mse {
                Some(v) => s += &format!(" {v:>14.6e}\n"),
                None => s += &format!(" {:>14}\n", "-"),
            }
        }
        for p in &self.problems {
            s += &format!("skipped {}: {}\n", p.path.display(), p.message);
        }
        s
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_table_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
        self.write_distribution_csv(std::fs::File::create(dir.join("distribution.csv"))?)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
