//! Rectangular grids of potential values, the common currency between the
//! analytic families, the barrier analysis, and the quadrature routines.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Potential values on a uniform rectangular grid, row-major.
///
/// Non-periodic grids have `counts[a]` nodes spanning
/// `[origin[a], origin[a] + (counts[a]-1) * spacing[a]]`. Periodic grids
/// identify node `counts[a]` with node 0, so the period along each axis is
/// `counts[a] * spacing[a]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridLandscape {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
    pub periodic: bool,
    /// Amount subtracted during normalization (0 when never normalized).
    pub offset: f64,
}

impl GridLandscape {
    pub fn from_fn(
        origin: Vec<f64>,
        spacing: Vec<f64>,
        counts: Vec<usize>,
        periodic: bool,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = origin.len();
        if spacing.len() != dim || counts.len() != dim || dim == 0 {
            return Err(Error::invalid("grid origin/spacing/counts must agree and be non-empty"));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::invalid("grids need at least 2 nodes per axis"));
        }
        let total: usize = counts.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut coords = vec![0.0; dim];
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for a in 0..dim {
                coords[a] = origin[a] + idx[a] as f64 * spacing[a];
            }
            let v = f(&coords);
            if !v.is_finite() {
                return Err(Error::Landscape(format!(
                    "non-finite potential value at {coords:?}"
                )));
            }
            values.push(v);
            // Row-major increment: last axis fastest.
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(GridLandscape {
            origin,
            spacing,
            counts,
            values,
            periodic,
            offset: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Shift values so the grid minimum is exactly 0, accumulating the offset.
    pub fn normalize(&mut self) {
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        for v in &mut self.values {
            *v -= min;
        }
        self.offset += min;
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (a, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.counts[a]);
            idx = idx * self.counts[a] + i;
        }
        idx
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0usize; self.dim()];
        for a in (0..self.dim()).rev() {
            multi[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        multi
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    /// Axis-neighbors of a node (2 per axis; periodic wrap when applicable).
    /// Appends to `out` so sweep loops can reuse the buffer.
    pub fn neighbors_into(&self, flat: usize, out: &mut Vec<usize>) {
        out.clear();
        let multi = self.multi_index(flat);
        let mut stride = 1usize;
        for a in (0..self.dim()).rev() {
            let n = self.counts[a];
            let i = multi[a];
            if self.periodic {
                // Avoid duplicate neighbors on two-node axes.
                let up = (i + 1) % n;
                let down = (i + n - 1) % n;
                out.push(flat - i * stride + up * stride);
                if down != up {
                    out.push(flat - i * stride + down * stride);
                }
            } else {
                if i + 1 < n {
                    out.push(flat + stride);
                }
                if i > 0 {
                    out.push(flat - stride);
                }
            }
            stride *= n;
        }
    }

    /// Wrap a coordinate onto the fundamental cell of a periodic axis.
    fn wrap_axis(&self, a: usize, x: f64) -> f64 {
        let period = self.counts[a] as f64 * self.spacing[a];
        let rel = (x - self.origin[a]).rem_euclid(period);
        self.origin[a] + rel
    }

    pub fn nearest_node(&self, x: &[f64]) -> usize {
        debug_assert_eq!(x.len(), self.dim());
        let mut multi = vec![0usize; self.dim()];
        for a in 0..self.dim() {
            let xa = if self.periodic { self.wrap_axis(a, x[a]) } else { x[a] };
            let u = (xa - self.origin[a]) / self.spacing[a];
            let i = u.round() as i64;
            multi[a] = if self.periodic {
                (i.rem_euclid(self.counts[a] as i64)) as usize
            } else {
                i.clamp(0, self.counts[a] as i64 - 1) as usize
            };
        }
        self.flat_index(&multi)
    }

    /// Multilinear interpolation (periodic-aware); clamps outside non-periodic
    /// grids.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let dim = self.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for a in 0..dim {
            let xa = if self.periodic { self.wrap_axis(a, x[a]) } else { x[a] };
            let u = (xa - self.origin[a]) / self.spacing[a];
            if self.periodic {
                let f = u.floor();
                base[a] = (f as i64).rem_euclid(self.counts[a] as i64) as usize;
                frac[a] = u - f;
            } else {
                let max = (self.counts[a] - 2) as f64;
                let u = u.clamp(0.0, max + 1.0);
                let f = u.floor().min(max);
                base[a] = f as usize;
                frac[a] = (u - f).clamp(0.0, 1.0);
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut multi = vec![0usize; dim];
            for a in 0..dim {
                if corner & (1 << a) != 0 {
                    weight *= frac[a];
                    multi[a] = if self.periodic {
                        (base[a] + 1) % self.counts[a]
                    } else {
                        base[a] + 1
                    };
                } else {
                    weight *= 1.0 - frac[a];
                    multi[a] = base[a];
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[self.flat_index(&multi)];
            }
        }
        acc
    }

    /// Write `index..., coordinate..., value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.dim();
        let mut header = String::new();
        for a in 0..dim {
            header.push_str(&format!("i{a},"));
        }
        for a in 0..dim {
            header.push_str(&format!("x{a},"));
        }
        header.push_str("value");
        writeln!(w, "{header}")?;
        for flat in 0..self.len() {
            let multi = self.multi_index(flat);
            let coords = self.coords(flat);
            let mut row = String::new();
            for i in &multi {
                row.push_str(&format!("{i},"));
            }
            for c in &coords {
                row.push_str(&format!("{c},"));
            }
            row.push_str(&format!("{}", self.values[flat]));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}
