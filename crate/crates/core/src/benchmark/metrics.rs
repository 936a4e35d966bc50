use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `acc[t][e]`: accuracy (%) on task `e` after training through task `t`.
/// Only `e <= t` is recorded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the evaluations after training one more task. The row must
    /// cover exactly the tasks seen so far.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.rows.len() + 1 {
            return Err(Error::Input(format!(
                "row {} must have {} entries, got {}",
                self.rows.len(),
                self.rows.len() + 1,
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(Error::Input(format!("accuracy {v} outside [0, 100]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn n_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, trained: usize, evaluated: usize) -> Option<f64> {
        self.rows.get(trained).and_then(|r| r.get(evaluated)).copied()
    }

    /// Square view with not-yet-seen tasks shown as 0.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        self.rows
            .iter()
            .map(|r| (0..n).map(|e| r.get(e).copied().unwrap_or(0.0)).collect())
            .collect()
    }

    pub fn final_row(&self) -> &[f64] {
        self.rows.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with header `task_trained,task_eval,accuracy`, tasks numbered from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "task_trained,task_eval,accuracy")?;
        for (t, row) in self.rows.iter().enumerate() {
            for (e, acc) in row.iter().enumerate() {
                writeln!(w, "{},{},{:.4}", t + 1, e + 1, acc)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(s.as_bytes());
        let mut m = Self::new();
        let mut row = Vec::new();
        let mut current = 1usize;
        for rec in rdr.deserialize::<(usize, usize, f64)>() {
            let (t, e, acc) = rec.map_err(|e| Error::Input(format!("accuracy csv: {e}")))?;
            if t != current {
                m.push_row(std::mem::take(&mut row))?;
                current = t;
            }
            if e != row.len() + 1 {
                return Err(Error::Input(format!("accuracy csv: unexpected cell ({t}, {e})")));
            }
            row.push(acc);
        }
        if !row.is_empty() {
            m.push_row(row)?;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_final: f64,
    pub final_per_task: Vec<f64>,
    /// Best accuracy ever reached on a task minus its final accuracy.
    pub forgetting: Vec<f64>,
}

pub fn metrics(m: &AccuracyMatrix) -> Summary {
    let n = m.n_tasks();
    let final_per_task = m.final_row().to_vec();
    let mean_final = if n == 0 { 0.0 } else { final_per_task.iter().sum::<f64>() / n as f64 };
    let forgetting = (0..n)
        .map(|e| {
            let best = (e..n).filter_map(|t| m.get(t, e)).fold(f64::MIN, f64::max);
            best - final_per_task[e]
        })
        .collect();
    Summary { mean_final, final_per_task, forgetting }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
