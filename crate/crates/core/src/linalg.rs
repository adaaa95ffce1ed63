//! Dense matrices over `Q_p` and valuation-pivoted elimination.

use std::fmt;

use thiserror::Error;

use crate::padic::{PadicContext, PadicScalar};
use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    /// The smallest remaining entry is a zero `O(p^abs)` with `abs` below the
    /// threshold: the pivot cannot be told apart from zero.
    #[error("precision exhausted at elimination step {step}: pivot is O(p^{abs}) but threshold is {threshold}")]
    PrecisionExhausted { step: usize, abs: i64, threshold: i64 },
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    Shape(usize, usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicMatrix {
    ctx: PadicContext,
    rows: usize,
    cols: usize,
    data: Vec<PadicScalar>,
}

impl PadicMatrix {
    pub fn zeros(ctx: PadicContext, rows: usize, cols: usize) -> Self {
        PadicMatrix { ctx, rows, cols, data: vec![ctx.zero(); rows * cols] }
    }

    pub fn identity(ctx: PadicContext, n: usize) -> Self {
        let mut m = PadicMatrix::zeros(ctx, n, n);
        for i in 0..n {
            m.set(i, i, ctx.one());
        }
        m
    }

    pub fn from_rows(ctx: PadicContext, rows: Vec<Vec<PadicScalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        PadicMatrix { ctx, rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_ints(ctx: PadicContext, rows: &[&[i64]]) -> Self {
        PadicMatrix::from_rows(
            ctx,
            rows.iter().map(|r| r.iter().map(|&x| ctx.from_int(x)).collect()).collect(),
        )
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> PadicScalar {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PadicScalar) {
        self.data[i * self.cols + j] = x;
    }

    pub fn mul_vec(&self, v: &[PadicScalar]) -> Result<Vec<PadicScalar>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Shape(self.rows, self.cols, v.len(), 1));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).fold(self.ctx.zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect())
    }

    /// `out[i][j] = self[row_perm[i]][col_perm[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> PadicMatrix {
        let mut out = PadicMatrix::zeros(self.ctx, self.rows, self.cols);
        for (i, &ri) in row_perm.iter().enumerate() {
            for (j, &cj) in col_perm.iter().enumerate() {
                out.set(i, j, self.get(ri, cj));
            }
        }
        out
    }

    /// Valuations of the Smith form diagonal over `Z_p`, sorted ascending.
    ///
    /// Full pivoting on a minimal-valuation entry; an entry counts as zero once
    /// its valuation reaches `threshold`, so the length of the result is the
    /// rank at that threshold.
    pub fn elementary_divisors(&self, threshold: i64) -> Result<Vec<RationalVal>, LinalgError> {
        let mut a = self.clone();
        let n = self.rows.min(self.cols);
        let mut divisors = Vec::new();
        for k in 0..n {
            let mut best: Option<(i64, usize, usize)> = None;
            let mut worst_zero: Option<i64> = None;
            for i in k..a.rows {
                for j in k..a.cols {
                    let x = a.get(i, j);
                    match (x.valuation(), x.abs_precision()) {
                        (Some(v), _) => {
                            if best.is_none_or(|(bv, _, _)| v < bv) {
                                best = Some((v, i, j));
                            }
                        }
                        (None, Some(abs)) => worst_zero = Some(worst_zero.map_or(abs, |w: i64| w.min(abs))),
                        (None, None) => {}
                    }
                }
            }
            let pivot_val = best.map(|b| b.0);
            let floor = match (pivot_val, worst_zero) {
                (Some(v), Some(z)) => v.min(z),
                (Some(v), None) => v,
                (None, Some(z)) => z,
                (None, None) => break,
            };
            if floor >= threshold {
                break;
            }
            let Some((v, pi, pj)) = best.filter(|&(v, _, _)| worst_zero.is_none_or(|z| v <= z)) else {
                return Err(LinalgError::PrecisionExhausted { step: k, abs: floor, threshold });
            };
            a.swap_rows(k, pi);
            a.swap_cols(k, pj);
            let pivot_inv = a.get(k, k).inv().expect("pivot is nonzero");
            for i in k + 1..a.rows {
                let factor = a.get(i, k) * pivot_inv;
                if factor.is_exact_zero() {
                    continue;
                }
                a.set(i, k, self.ctx.zero());
                for j in k + 1..a.cols {
                    let updated = a.get(i, j) - factor * a.get(k, j);
                    a.set(i, j, updated);
                }
            }
            divisors.push(RationalVal::from_int(v));
        }
        divisors.sort();
        Ok(divisors)
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        if r1 != r2 {
            for j in 0..self.cols {
                self.data.swap(r1 * self.cols + j, r2 * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, c1: usize, c2: usize) {
        if c1 != c2 {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + c1, i * self.cols + c2);
            }
        }
    }
}

impl fmt::Display for PadicMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
