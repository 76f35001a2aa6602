use crate::par::{self, Exec};

/// Dense symmetric matrix, stored in full row-major form so rows can be
/// scanned contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Fills entry `(i, j)`, `i < j`, from `f(i, j)`; mirrors it and zeroes
    /// the diagonal.
    pub fn from_upper(n: usize, exec: Exec, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Self {
        let mut data = vec![0.0; n * n];
        par::for_each_row(exec, &mut data, n.max(1), |i, row| {
            for (j, x) in row.iter_mut().enumerate() {
                *x = match i.cmp(&j) {
                    std::cmp::Ordering::Less => f(i, j),
                    std::cmp::Ordering::Greater => f(j, i),
                    std::cmp::Ordering::Equal => 0.0,
                };
            }
        });
        SymMatrix { n, data }
    }

    /// Wraps full row-major storage, which must be exactly symmetric.
    pub fn from_full(n: usize, data: Vec<f64>) -> Option<Self> {
        let m = SymMatrix { n, data };
        (m.data.len() == n * n && m.is_symmetric()).then_some(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Applies `f` to every off-diagonal entry, keeping symmetry.
    pub fn map(&self, exec: Exec, f: impl Fn(f64) -> f64 + Sync + Send) -> SymMatrix {
        SymMatrix::from_upper(self.n, exec, |i, j| f(self.get(i, j)))
    }
}
