//! Finite index sets that the exact summations walk over.

/// All vectors of `parts` nonnegative integers summing to `total`, in
/// lexicographic order with the last coordinate varying fastest.
pub struct Compositions {
    current: Vec<u64>,
    total: u64,
    done: bool,
}

pub fn compositions(total: u64, parts: usize) -> Compositions {
    assert!(parts >= 1, "compositions need at least one part");
    let mut current = vec![0; parts];
    current[parts - 1] = total;
    Compositions { current, total, done: false }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // Find the rightmost non-last position that can be incremented.
        let mut advanced = false;
        let mut j = k.wrapping_sub(1);
        while j > 0 {
            j -= 1;
            let prefix: u64 = self.current[..=j].iter().sum();
            if prefix < self.total {
                self.current[j] += 1;
                for v in &mut self.current[j + 1..] {
                    *v = 0;
                }
                let used: u64 = self.current[..k - 1].iter().sum();
                self.current[k - 1] = self.total - used;
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// Mixed-radix counter over `dims[0] × … × dims[d-1]`, row-major.
#[derive(Debug, Clone)]
pub struct ProductLattice {
    dims: Vec<usize>,
}

impl ProductLattice {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat row-major offset.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for h in (0..self.dims.len()).rev() {
            idx[h] = flat % self.dims[h];
            flat /= self.dims[h];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }
}
