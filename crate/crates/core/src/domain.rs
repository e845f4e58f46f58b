//! Uniform tensor grids on intervals and rectangles, and grid functions
//! ("fields") living on their interior nodes.
//!
//! Interior nodes on axis `[a, b]` with `n` interior points sit at
//! `a + k·h`, `k = 1..n`, `h = (b−a)/(n+1)`. A [`Field`] stores values only
//! at interior nodes; by the nonlocal Dirichlet convention it represents a
//! function that is identically zero on the whole complement of the domain
//! (not just on the boundary). Node indexing is lexicographic by axis with
//! the last axis fastest, which fixes serialization order.

use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Result, SolverError};

/// One grid axis: interval `[lo, hi]` with `n` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    /// Mesh width `(hi − lo) / (n + 1)`.
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.n + 1) as f64
    }

    /// Coordinate of interior node `k` (0-based).
    pub fn node(&self, k: usize) -> f64 {
        self.lo + (k + 1) as f64 * self.h()
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A 1D interval or 2D rectangle with a uniform tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    axes: Vec<Axis>,
}

impl Domain {
    /// Build a domain from per-axis extents and interior node counts.
    ///
    /// `extents` and `counts` must both have length 1 or 2; at least 3
    /// interior nodes per axis are required so that every node has an
    /// interior-facing stencil.
    pub fn build(extents: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if extents.len() != counts.len() || extents.is_empty() || extents.len() > 2 {
            return Err(SolverError::InvalidDomain(format!(
                "need 1 or 2 axes, got {} extents and {} counts",
                extents.len(),
                counts.len()
            )));
        }
        let mut axes = Vec::with_capacity(extents.len());
        for (&(lo, hi), &n) in extents.iter().zip(counts) {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(SolverError::InvalidDomain(format!(
                    "degenerate interval [{lo}, {hi}]"
                )));
            }
            if n < 3 {
                return Err(SolverError::InvalidDomain(format!(
                    "need at least 3 interior nodes per axis, got {n}"
                )));
            }
            axes.push(Axis { lo, hi, n });
        }
        Ok(Domain { axes })
    }

    /// Convenience constructor for a 1D interval.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::build(&[(lo, hi)], &[n])
    }

    /// Convenience constructor for a 2D rectangle.
    pub fn rectangle(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Self> {
        Self::build(&[(x.0, x.1), (y.0, y.1)], &[x.2, y.2])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Total number of interior nodes.
    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Cell measure ∏h (the lumped-mass weight of one node).
    pub fn cell_measure(&self) -> f64 {
        self.axes.iter().map(|a| a.h()).product()
    }

    /// Measure of the whole domain ∏(bᵢ−aᵢ).
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.length()).product()
    }

    /// Split a flat node index into per-axis indices (second entry 0 in 1D).
    pub fn split_index(&self, i: usize) -> (usize, usize) {
        match self.axes.len() {
            1 => (i, 0),
            _ => {
                let ny = self.axes[1].n;
                (i / ny, i % ny)
            }
        }
    }

    /// Coordinates of node `i`; the second entry is unused (0) in 1D.
    pub fn node_coords(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.split_index(i);
        match self.axes.len() {
            1 => [self.axes[0].node(ix), 0.0],
            _ => [self.axes[0].node(ix), self.axes[1].node(iy)],
        }
    }

    /// The nested refinement with `2n+1` interior nodes per axis: every
    /// coarse node is a fine node and the mesh width halves.
    pub fn refined(&self) -> Domain {
        Domain {
            axes: self
                .axes
                .iter()
                .map(|a| Axis {
                    lo: a.lo,
                    hi: a.hi,
                    n: 2 * a.n + 1,
                })
                .collect(),
        }
    }
}

/// The three norms reported for every field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// Lumped L² norm `sqrt(Σ f_i² · ∏h)`.
    pub l2: f64,
    /// Max-norm over interior nodes.
    pub linf: f64,
    /// Local H¹ seminorm `sqrt(fᵀ A_loc f)` of the zero-extended field,
    /// evaluated by the equivalent edge-difference sum.
    pub h1_semi: f64,
}

/// A grid function on the interior nodes of a [`Domain`], implicitly zero
/// outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    domain: Domain,
    values: DVector<f64>,
}

impl Field {
    pub fn zeros(domain: &Domain) -> Self {
        Field {
            domain: domain.clone(),
            values: DVector::zeros(domain.n_nodes()),
        }
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Field {
            domain: domain.clone(),
            values: DVector::from_element(domain.n_nodes(), c),
        }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(domain: &Domain, mut f: F) -> Self {
        let dim = domain.dim();
        let values = DVector::from_fn(domain.n_nodes(), |i, _| {
            let c = domain.node_coords(i);
            f(&c[..dim])
        });
        Field {
            domain: domain.clone(),
            values,
        }
    }

    /// Wrap an existing coefficient vector.
    pub fn from_vector(domain: &Domain, values: DVector<f64>) -> Result<Self> {
        if values.len() != domain.n_nodes() {
            return Err(SolverError::DomainMismatch(format!(
                "vector length {} vs {} nodes",
                values.len(),
                domain.n_nodes()
            )));
        }
        Ok(Field {
            domain: domain.clone(),
            values,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lumped L² norm.
    pub fn l2(&self) -> f64 {
        (self.domain.cell_measure() * self.values.norm_squared()).sqrt()
    }

    /// Max-norm over interior nodes.
    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Local H¹ seminorm of the zero-extended field.
    ///
    /// Computed as the edge-difference sum that equals the quadratic form
    /// of the assembled local stiffness exactly (boundary edges included
    /// with the zero exterior value).
    pub fn h1_semi(&self) -> f64 {
        h1_semi_of(&self.domain, self.values.as_slice())
    }

    pub fn norms(&self) -> Norms {
        Norms {
            l2: self.l2(),
            linf: self.linf(),
            h1_semi: self.h1_semi(),
        }
    }

    /// Interpolate onto [`Domain::refined`]: coarse nodes are copied, new
    /// nodes take the multilinear average of their coarse neighbors with
    /// the exterior-zero convention at the boundary.
    pub fn prolonged(&self) -> Field {
        let fine = self.domain.refined();
        let dim = self.domain.dim();
        let coarse = &self.values;
        let get = |jx: isize, jy: isize| -> f64 {
            let (nx, ny) = match dim {
                1 => (self.domain.axes()[0].n as isize, 1),
                _ => (
                    self.domain.axes()[0].n as isize,
                    self.domain.axes()[1].n as isize,
                ),
            };
            if jx < 0 || jx >= nx || jy < 0 || jy >= ny {
                0.0
            } else {
                coarse[(jx * ny + jy) as usize]
            }
        };
        // Per-axis interpolation stencil on the fine index: odd fine
        // indices coincide with coarse nodes, even ones are midpoints.
        let stencil = |k: usize| -> [(isize, f64); 2] {
            if k % 2 == 1 {
                [((k as isize - 1) / 2, 1.0), (0, 0.0)]
            } else {
                [(k as isize / 2 - 1, 0.5), (k as isize / 2, 0.5)]
            }
        };
        let values = DVector::from_fn(fine.n_nodes(), |i, _| {
            let (fx, fy) = fine.split_index(i);
            if dim == 1 {
                let sx = stencil(fx);
                sx.iter().map(|&(j, w)| w * get(j, 0)).sum()
            } else {
                let sx = stencil(fx);
                let sy = stencil(fy);
                let mut acc = 0.0;
                for &(jx, wx) in &sx {
                    if wx == 0.0 {
                        continue;
                    }
                    for &(jy, wy) in &sy {
                        if wy == 0.0 {
                            continue;
                        }
                        acc += wx * wy * get(jx, jy);
                    }
                }
                acc
            }
        });
        Field {
            domain: fine,
            values,
        }
    }

    /// Max-norm defect of the field under reversal of every axis index.
    /// Zero for fields symmetric about the domain center.
    pub fn reflection_defect(&self) -> f64 {
        let (nx, ny) = match self.domain.dim() {
            1 => (self.domain.axes()[0].n, 1),
            _ => (self.domain.axes()[0].n, self.domain.axes()[1].n),
        };
        let mut worst: f64 = 0.0;
        for i in 0..self.values.len() {
            let (ix, iy) = (i / ny, i % ny);
            let j = (nx - 1 - ix) * ny + (ny - 1 - iy);
            worst = worst.max((self.values[i] - self.values[j]).abs());
        }
        worst
    }

    /// Write the field as CSV (`x[,y],value`), one row per node in index
    /// order, values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.domain.dim();
        if dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for i in 0..self.values.len() {
            let c = self.domain.node_coords(i);
            if dim == 1 {
                writeln!(w, "{:.16e},{:.16e}", c[0], self.values[i])?;
            } else {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", c[0], c[1], self.values[i])?;
            }
        }
        Ok(())
    }
}

/// Edge-difference evaluation of `sqrt(vᵀ A_loc v)` for a coefficient slice
/// on `domain`, with the exterior-zero convention.
pub(crate) fn h1_semi_of(domain: &Domain, v: &[f64]) -> f64 {
    let axes = domain.axes();
    match axes.len() {
        1 => {
            let n = axes[0].n;
            let h = axes[0].h();
            let mut acc = 0.0;
            for k in 0..=n {
                let a = if k == 0 { 0.0 } else { v[k - 1] };
                let b = if k == n { 0.0 } else { v[k] };
                let d = b - a;
                acc += d * d;
            }
            (acc / h).sqrt()
        }
        _ => {
            let (nx, ny) = (axes[0].n, axes[1].n);
            let (hx, hy) = (axes[0].h(), axes[1].h());
            let at = |ix: isize, iy: isize| -> f64 {
                if ix < 0 || ix >= nx as isize || iy < 0 || iy >= ny as isize {
                    0.0
                } else {
                    v[ix as usize * ny + iy as usize]
                }
            };
            let mut acc_x = 0.0;
            for ix in 0..=nx {
                for iy in 0..ny {
                    let d = at(ix as isize, iy as isize) - at(ix as isize - 1, iy as isize);
                    acc_x += d * d;
                }
            }
            let mut acc_y = 0.0;
            for ix in 0..nx {
                for iy in 0..=ny {
                    let d = at(ix as isize, iy as isize) - at(ix as isize, iy as isize - 1);
                    acc_y += d * d;
                }
            }
            (acc_x * hy / hx + acc_y * hx / hy).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_nodes_match_arithmetic() {
        let d = Domain::interval(-1.0, 1.0, 3).unwrap();
        assert_eq!(d.axes()[0].h(), 0.5);
        let xs: Vec<f64> = (0..3).map(|k| d.node_coords(k)[0]).collect();
        assert_eq!(xs, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn rectangle_counts_and_measure() {
        let d = Domain::rectangle((0.0, 1.0, 4), (0.0, 1.0, 4)).unwrap();
        assert_eq!(d.n_nodes(), 16);
        assert!((d.axes()[0].h() - 0.2).abs() < 1e-15);
        assert!((d.measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(Domain::interval(0.0, 0.0, 3).is_err());
        assert!(Domain::interval(1.0, 0.0, 3).is_err());
        assert!(Domain::interval(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn zero_field_norms() {
        let d = Domain::interval(0.0, 1.0, 9).unwrap();
        let n = Field::zeros(&d).norms();
        assert_eq!((n.l2, n.linf, n.h1_semi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_field_interior_mass() {
        let d = Domain::interval(0.0, 1.0, 99).unwrap();
        let f = Field::constant(&d, 1.0);
        assert!((f.l2() - 0.99f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn prolongation_keeps_coarse_nodes() {
        let d = Domain::interval(-1.0, 1.0, 5).unwrap();
        let f = Field::from_fn(&d, |c| c[0].sin());
        let p = f.prolonged();
        for k in 0..5 {
            // coarse node k sits at fine index 2k+1
            assert!((p.values()[2 * k + 1] - f.values()[k]).abs() < 1e-15);
        }
        // first fine node is the midpoint of (0, first coarse value)
        assert!((p.values()[0] - 0.5 * f.values()[0]).abs() < 1e-15);
    }
}
