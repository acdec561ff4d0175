//! Compressed sparse row storage with a fixed sparsity pattern.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets (sorted and deduplicated here).
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_indices.extend_from_slice(&r);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) out of bounds")));
            }
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(ncols, rows);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| vec![i]).collect();
        let mut m = Self::from_pattern(n, rows);
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        let cols = &self.col_indices[start..self.row_offsets[i + 1]];
        cols.binary_search(&j).ok().map(|p| start + p)
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// Panics if `(i, j)` is not part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                y[i] * cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for &j in self.row(i).0 {
                rows[j].push(i);
            }
        }
        let mut t = Self::from_pattern(self.nrows, rows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.add(j, i, v);
            }
        }
        t
    }

    /// `max |A_ij - A_ji|`, optionally restricted to entries whose row and
    /// column both satisfy `keep`.
    pub fn symmetry_defect_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.nrows {
            if !keep(i) {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(j) {
                    defect = defect.max((v - self.get(j, i)).abs());
                }
            }
        }
        defect
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect_where(|_| true)
    }

    /// Square submatrix on the given sorted index set, renumbered `0..idx.len()`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.ncols];
        for (l, &g) in idx.iter().enumerate() {
            local[g] = l;
        }
        let mut rows = Vec::with_capacity(idx.len());
        for &g in idx {
            let (cols, _) = self.row(g);
            rows.push(cols.iter().filter(|&&j| local[j] != usize::MAX).map(|&j| local[j]).collect());
        }
        let mut sub = Self::from_pattern(idx.len(), rows);
        for (l, &g) in idx.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                if local[j] != usize::MAX {
                    sub.add(l, local[j], v);
                }
            }
        }
        sub
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based indices,
    /// general real).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{e}"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse(format!("bad size line {header:?}")));
        }
        let mut triplets = Vec::with_capacity(dims[2]);
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::Parse(format!("bad entry line {line:?}")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{e}")));
            let v = t[2].parse::<f64>().map_err(|e| Error::Parse(format!("{e}")))?;
            triplets.push((p(t[0])? - 1, p(t[1])? - 1, v));
        }
        Self::from_triplets(dims[0], dims[1], &triplets)
    }
}
