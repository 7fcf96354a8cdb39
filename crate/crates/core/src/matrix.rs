use serde::{Deserialize, Serialize};

/// Dense `n x n` table indexed by ordered agent pairs `(head, tail)`.
///
/// Diagonal entries exist for layout only and are never read by the debate
/// logic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix<T> {
    n: usize,
    cells: Vec<T>,
}

impl<T: Clone> PairMatrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self {
            n,
            cells: vec![value; n * n],
        }
    }
}

impl<T> PairMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(n * n);
        for head in 0..n {
            for tail in 0..n {
                cells.push(f(head, tail));
            }
        }
        Self { n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, head: usize, tail: usize) -> &T {
        &self.cells[head * self.n + tail]
    }

    pub fn set(&mut self, head: usize, tail: usize, value: T) {
        self.cells[head * self.n + tail] = value;
    }

    /// Off-diagonal entries pointing into `tail`, in ascending head order.
    pub fn incoming(&self, tail: usize) -> impl Iterator<Item = (usize, &T)> + '_ {
        (0..self.n)
            .filter(move |&head| head != tail)
            .map(move |head| (head, self.get(head, tail)))
    }
}
