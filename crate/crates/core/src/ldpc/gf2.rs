//! Dense bit matrices over GF(2), packed 64 columns per word.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        BitMatrix { rows, cols, stride, words: vec![0; rows * stride] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.words[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.words[r * self.stride + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.stride {
            self.words.swap(a * self.stride + i, b * self.stride + i);
        }
    }

    /// `row[dst] ^= row[src]`
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let (s, d) = (src * self.stride, dst * self.stride);
        for i in 0..self.stride {
            let v = self.words[s + i];
            self.words[d + i] ^= v;
        }
    }

    /// Reduced row echelon form, scanning pivot columns in the given order.
    ///
    /// Returns `(row, pivot column)` for every pivot found; rows past the
    /// rank end up zero.
    pub fn reduce(&mut self, column_order: impl IntoIterator<Item = usize>) -> Vec<(usize, usize)> {
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for c in column_order {
            if next_row == self.rows {
                break;
            }
            let Some(p) = (next_row..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(p, next_row);
            for r in 0..self.rows {
                if r != next_row && self.get(r, c) {
                    self.xor_row_into(next_row, r);
                }
            }
            pivots.push((next_row, c));
            next_row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce(0..self.cols).len()
    }
}

/// Packs a 0/1 slice into words, bit `i` at word `i / 64`, position `i % 64`.
pub fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, b) in bits.iter().enumerate() {
        if *b != 0 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Parity of the AND of two packed vectors.
pub fn dot(a: &[u64], b: &[u64]) -> u8 {
    let ones: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
    (ones & 1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_identity() {
        let mut m = BitMatrix::zeros(3, 3);
        for i in 0..3 {
            m.set(i, i, true);
        }
        assert_eq!(m.reduce(0..3), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn rank_of_dependent_rows() {
        let mut m = BitMatrix::zeros(3, 70);
        for c in [0, 5, 65] {
            m.set(0, c, true);
        }
        for c in [5, 69] {
            m.set(1, c, true);
        }
        for c in [0, 65, 69] {
            m.set(2, c, true);
        }
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn pack_and_dot() {
        let a = pack(&[1, 0, 1, 1]);
        let b = pack(&[1, 1, 1, 0]);
        assert_eq!(dot(&a, &b), 0);
        assert_eq!(dot(&a, &a), 1);
    }
}
