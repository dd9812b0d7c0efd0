use std::fmt;

/// Dense row-major bit matrix; each row occupies whole `u64` words, column
/// `c` lives in bit `c % 64` of word `c / 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix { rows, cols, words_per_row, words: vec![0; rows * words_per_row] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Build from rows of `'0'`/`'1'` characters; other characters are ignored.
    pub fn from_strs(rows: &[&str]) -> Self {
        let bits: Vec<Vec<bool>> = rows
            .iter()
            .map(|s| s.chars().filter_map(|ch| match ch {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            }).collect())
            .collect();
        let cols = bits.first().map_or(0, Vec::len);
        assert!(bits.iter().all(|r| r.len() == cols), "ragged bit rows");
        Self::from_fn(bits.len(), cols, |r, c| bits[r][c])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.words[r * self.words_per_row + c / 64] >> (c % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.words[r * self.words_per_row + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    /// `len` (≤ 64) bits of row `r` starting at column `c0`, column `c0` in bit 0.
    pub fn get_bits(&self, r: usize, c0: usize, len: usize) -> u64 {
        debug_assert!(len <= 64 && c0 + len <= self.cols);
        if len == 0 {
            return 0;
        }
        let base = r * self.words_per_row;
        let (wi, off) = (c0 / 64, c0 % 64);
        let mut v = self.words[base + wi] >> off;
        if off != 0 && off + len > 64 {
            v |= self.words[base + wi + 1] << (64 - off);
        }
        v & mask(len)
    }

    pub fn set_bits(&mut self, r: usize, c0: usize, len: usize, bits: u64) {
        debug_assert!(len <= 64 && c0 + len <= self.cols);
        if len == 0 {
            return;
        }
        let bits = bits & mask(len);
        let base = r * self.words_per_row;
        let (wi, off) = (c0 / 64, c0 % 64);
        let lo_mask = mask(len) << off;
        let w = &mut self.words[base + wi];
        *w = (*w & !lo_mask) | (bits << off);
        if off != 0 && off + len > 64 {
            let spill = off + len - 64;
            let w = &mut self.words[base + wi + 1];
            *w = (*w & !mask(spill)) | (bits >> (64 - off));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set-bit count inside the `h × w` window at `(r0, c0)`.
    pub fn count_ones_in(&self, r0: usize, c0: usize, h: usize, w: usize) -> usize {
        (r0..r0 + h)
            .map(|r| {
                let mut n = 0;
                let mut c = c0;
                while c < c0 + w {
                    let len = (c0 + w - c).min(64);
                    n += self.get_bits(r, c, len).count_ones() as usize;
                    c += len;
                }
                n
            })
            .sum()
    }

    /// Copy of the `h × w` window at `(r0, c0)`.
    pub fn window(&self, r0: usize, c0: usize, h: usize, w: usize) -> BitMatrix {
        BitMatrix::from_fn(h, w, |r, c| self.get(r0 + r, c0 + c))
    }

    /// Zero-extend to `rows × cols` (both must be at least the current size).
    pub fn padded(&self, rows: usize, cols: usize) -> BitMatrix {
        assert!(rows >= self.rows && cols >= self.cols);
        let mut out = BitMatrix::zeros(rows, cols);
        for r in 0..self.rows {
            let mut c = 0;
            while c < self.cols {
                let len = (self.cols - c).min(64);
                out.set_bits(r, c, len, self.get_bits(r, c, len));
                c += len;
            }
        }
        out
    }

    /// Top-left `rows × cols` sub-matrix.
    pub fn cropped(&self, rows: usize, cols: usize) -> BitMatrix {
        assert!(rows <= self.rows && cols <= self.cols);
        let mut out = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            let mut c = 0;
            while c < cols {
                let len = (cols - c).min(64);
                out.set_bits(r, c, len, self.get_bits(r, c, len));
                c += len;
            }
        }
        out
    }

    /// Set positions in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let row = &self.words[r * self.words_per_row..(r + 1) * self.words_per_row];
            row.iter().enumerate().flat_map(move |(wi, &w)| {
                let mut w = w;
                std::iter::from_fn(move || {
                    if w == 0 {
                        return None;
                    }
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some((r, wi * 64 + b))
                })
            })
        })
    }
}

#[inline]
fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(32) {
            let line: String = (0..self.cols.min(128))
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}
