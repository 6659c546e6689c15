//! One-off knapsack placement from a `value,weight` CSV.

use std::fmt;
use std::io::Read;

use crate::error::{Error, Result};
use crate::spo::{Solver, SpoInstance, SpoSolution};

/// Reads `value,weight` rows. A header row is allowed.
pub fn read_instance<R: Read>(reader: R, capacity: u64) -> Result<SpoInstance<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Instance(format!(
                "row {}: expected value,weight but found {} fields",
                line + 1,
                rec.len()
            )));
        }
        let (v, w) = (rec[0].parse::<f64>(), rec[1].parse::<i64>());
        if line == 0 && v.is_err() && w.is_err() {
            continue;
        }
        let v = v.map_err(|e| Error::Instance(format!("row {}: value: {e}", line + 1)))?;
        let w = w.map_err(|e| Error::Instance(format!("row {}: weight: {e}", line + 1)))?;
        if w <= 0 || w > u32::MAX as i64 {
            return Err(Error::Instance(format!("row {}: weight {w} must be positive", line + 1)));
        }
        values.push(v);
        weights.push(w as u32);
    }
    SpoInstance::new(values, weights, capacity)
}

pub struct SolveReport(pub SpoSolution<f64>);

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.0;
        let idx: Vec<String> = s.selected().iter().map(usize::to_string).collect();
        writeln!(f, "indices: {}", idx.join(" "))?;
        writeln!(f, "value: {}", s.value)?;
        writeln!(f, "weight: {}", s.weight)?;
        writeln!(f, "status: {}", s.status)?;
        writeln!(f, "alpha: {}", s.alpha_guarantee)?;
        write!(f, "beta: {}", s.beta_guarantee)
    }
}

pub fn solve_cmd<R: Read>(reader: R, capacity: u64, solver: Solver) -> Result<SolveReport> {
    Ok(SolveReport(solver.solve(&read_instance(reader, capacity)?)?))
}
