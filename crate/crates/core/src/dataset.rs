//! Labeled samples `(x^i, y^i)` with a truncation level `M ≥ |y^i|`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `n` labeled points in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    /// Bound on the labels; also the truncation level used at evaluation.
    pub m: f64,
}

impl Dataset {
    /// Validates dimensions and the label bound. Duplicate points are allowed
    /// here; constructions that need distinct points check with
    /// [`Dataset::check_distinct`].
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, m: f64) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid(format!("{} inputs but {} labels", xs.len(), ys.len())));
        }
        if xs.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        let d = xs[0].len();
        if d == 0 || xs.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("all inputs must share one positive dimension"));
        }
        if !(m > 0.0) {
            return Err(Error::invalid("label bound M must be positive"));
        }
        if xs.iter().flatten().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        if let Some(y) = ys.iter().find(|y| y.abs() > m) {
            return Err(Error::invalid(format!("label {y} exceeds the bound M = {m}")));
        }
        Ok(Dataset { xs, ys, m })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    /// Fails when two inputs coincide.
    pub fn check_distinct(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.xs[a].iter().zip(&self.xs[b]).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in idx.windows(2) {
            if self.xs[w[0]] == self.xs[w[1]] {
                return Err(Error::invalid(format!("duplicate data points at rows {} and {}", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// `max_i ‖x^i‖_∞`.
    pub fn max_abs_input(&self) -> f64 {
        self.xs.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Reads CSV with a header row: `d` feature columns followed by the label.
    pub fn read_csv<R: Read>(reader: R, m: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 2))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() < 2 {
                return Err(Error::Parse(format!("row {}: need at least one feature and a label", i + 2)));
            }
            ys.push(*vals.last().unwrap());
            xs.push(vals[..vals.len() - 1].to_vec());
        }
        Dataset::new(xs, ys, m)
    }

    /// Writes CSV with header `x1,…,xd,y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(|v| format!("{v:e}")).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![vec![0.5, -1.0], vec![0.1, 2.0]], vec![1.0, -0.25], 2.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), 2.0).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn duplicates_detected() {
        let d = Dataset::new(vec![vec![1.0], vec![2.0], vec![1.0]], vec![0.0; 3], 1.0).unwrap();
        assert!(d.check_distinct().is_err());
    }

    #[test]
    fn label_bound_enforced() {
        assert!(Dataset::new(vec![vec![1.0]], vec![3.0], 2.0).is_err());
    }
}
