use super::DensityError;

/// Boolean mask over the cells of a uniform grid with `bins` cells per axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinMask {
    pub dim: usize,
    pub bins: usize,
    pub periodic: bool,
    pub cells: Vec<bool>,
}

impl BinMask {
    pub fn new(dim: usize, bins: usize, periodic: bool) -> Self {
        BinMask {
            dim,
            bins,
            periodic,
            cells: vec![false; bins.pow(dim as u32)],
        }
    }

    pub fn from_cells(dim: usize, bins: usize, periodic: bool, cells: Vec<bool>) -> Result<Self, DensityError> {
        if cells.len() != bins.pow(dim as u32) {
            return Err(DensityError::MaskMismatch(format!(
                "{} cells for a {bins}^{dim} grid",
                cells.len()
            )));
        }
        Ok(BinMask {
            dim,
            bins,
            periodic,
            cells,
        })
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Fraction of all cells that are set.
    pub fn area_fraction(&self) -> f64 {
        self.count() as f64 / self.cells.len() as f64
    }

    fn compatible(&self, other: &BinMask) -> Result<(), DensityError> {
        if self.dim != other.dim || self.bins != other.bins {
            return Err(DensityError::MaskMismatch(format!(
                "{}^{} vs {}^{}",
                self.bins, self.dim, other.bins, other.dim
            )));
        }
        Ok(())
    }

    /// Cells of the 3×3 (or 3-cell) neighborhood of `idx`, itself included.
    pub fn neighbors(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let n = self.bins as i64;
        let step = |c: i64, d: i64| -> Option<i64> {
            let v = c + d;
            if self.periodic {
                Some(v.rem_euclid(n))
            } else if (0..n).contains(&v) {
                Some(v)
            } else {
                None
            }
        };
        if self.dim == 1 {
            for d in -1..=1 {
                if let Some(v) = step(idx as i64, d) {
                    out.push(v as usize);
                }
            }
            return;
        }
        let (i, j) = ((idx / self.bins) as i64, (idx % self.bins) as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                if let (Some(a), Some(b)) = (step(i, di), step(j, dj)) {
                    out.push((a * n + b) as usize);
                }
            }
        }
    }

    /// Grow the mask by `cells` steps of the 8-neighborhood (3-neighborhood in 1D).
    pub fn dilate(&self, cells: usize) -> BinMask {
        let mut cur = self.clone();
        let mut nb = Vec::with_capacity(9);
        for _ in 0..cells {
            let mut next = cur.clone();
            for (idx, &on) in cur.cells.iter().enumerate() {
                if on {
                    cur.neighbors(idx, &mut nb);
                    for &k in &nb {
                        next.cells[k] = true;
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// Fraction of this mask's cells that also lie in `other`.
    pub fn covered_by(&self, other: &BinMask) -> Result<f64, DensityError> {
        self.compatible(other)?;
        let n = self.count();
        if n == 0 {
            return Ok(1.0);
        }
        let hit = self
            .cells
            .iter()
            .zip(&other.cells)
            .filter(|(&a, &b)| a && b)
            .count();
        Ok(hit as f64 / n as f64)
    }

    /// `|A Δ B| / |A ∪ B|`, zero when both are empty.
    pub fn symmetric_difference(&self, other: &BinMask) -> Result<f64, DensityError> {
        self.compatible(other)?;
        let (mut diff, mut union) = (0usize, 0usize);
        for (&a, &b) in self.cells.iter().zip(&other.cells) {
            diff += usize::from(a != b);
            union += usize::from(a || b);
        }
        Ok(if union == 0 { 0.0 } else { diff as f64 / union as f64 })
    }

    /// Mutual coverage after a one-cell dilation of the covering mask:
    /// `(self ⊆ other⁺ fraction, other ⊆ self⁺ fraction)`.
    pub fn mutual_cover(&self, other: &BinMask) -> Result<(f64, f64), DensityError> {
        Ok((
            self.covered_by(&other.dilate(1))?,
            other.covered_by(&self.dilate(1))?,
        ))
    }

    /// Write `i[,j],inside` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), DensityError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| DensityError::Io(e.to_string());
        if self.dim == 1 {
            out.write_record(["i", "inside"]).map_err(io)?;
        } else {
            out.write_record(["i", "j", "inside"]).map_err(io)?;
        }
        for (idx, &on) in self.cells.iter().enumerate() {
            let flag = u8::from(on).to_string();
            if self.dim == 1 {
                out.write_record([idx.to_string(), flag]).map_err(io)?;
            } else {
                out.write_record([(idx / self.bins).to_string(), (idx % self.bins).to_string(), flag])
                    .map_err(io)?;
            }
        }
        out.flush().map_err(|e| DensityError::Io(e.to_string()))
    }
}
