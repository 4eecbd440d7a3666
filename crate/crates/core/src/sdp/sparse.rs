use nalgebra::DMatrix;

use crate::Scalar;

/// Symmetric matrix stored as its upper-triangle nonzeros `(i, j, v)` with `i ≤ j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSparse<T: Scalar> {
    size: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SymSparse<T> {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    pub fn identity(size: usize) -> Self {
        Self {
            size,
            entries: (0..size).map(|i| (i, i, T::one())).collect(),
        }
    }

    /// Upper-triangle nonzeros of a dense symmetric matrix.
    pub fn from_dense(m: &DMatrix<T>) -> Self {
        let mut out = Self::new(m.nrows());
        for j in 0..m.ncols() {
            for i in 0..=j.min(m.nrows().saturating_sub(1)) {
                if m[(i, j)] != T::zero() {
                    out.entries.push((i, j, m[(i, j)]));
                }
            }
        }
        out
    }

    /// Sets entry `(i, j)` and its mirror, adding to any existing value.
    pub fn push(&mut self, i: usize, j: usize, v: T) {
        assert!(
            i < self.size && j < self.size,
            "entry ({i}, {j}) outside a {0}×{0} matrix",
            self.size
        );
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == a && e.1 == b) {
            e.2 += v;
        } else {
            self.entries.push((a, b, v));
        }
    }

    /// `Σ_k c_k F_k` for terms of the same size, dropping exact zeros.
    pub fn combine<'a>(size: usize, terms: impl Iterator<Item = (T, &'a SymSparse<T>)>) -> Self
    where
        T: 'a,
    {
        let mut acc = std::collections::BTreeMap::new();
        for (c, f) in terms {
            if c == T::zero() {
                continue;
            }
            for &(i, j, v) in &f.entries {
                *acc.entry((j, i)).or_insert(T::zero()) += c * v;
            }
        }
        let entries = acc
            .into_iter()
            .filter(|(_, v)| *v != T::zero())
            .map(|((j, i), v)| (i, j, v))
            .collect();
        Self { size, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.2.is_finite())
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.size, self.size);
        self.add_scaled_to(&mut m, T::one());
        m
    }

    pub fn add_scaled_to(&self, m: &mut DMatrix<T>, alpha: T) {
        if alpha == T::zero() {
            return;
        }
        for &(i, j, v) in &self.entries {
            m[(i, j)] += alpha * v;
            if i != j {
                m[(j, i)] += alpha * v;
            }
        }
    }

    /// `tr(F · M)` for symmetric `M`.
    pub fn trace_with(&self, m: &DMatrix<T>) -> T {
        let mut s = T::zero();
        for &(i, j, v) in &self.entries {
            if i == j {
                s += v * m[(i, i)];
            } else {
                s += v * (m[(i, j)] + m[(j, i)]);
            }
        }
        s
    }
}
