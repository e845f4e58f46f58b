//! Assembly of the discrete mixed operator: local stiffness plus fractional
//! stiffness with the exterior-zero Dirichlet condition.
//!
//! Both matrices are dense and symmetric, scaled so that for fields `f`, `g`
//! (extended by zero outside the domain)
//!
//! * `fᵀ a_loc g ≈ ∫ ∇f·∇g`,
//! * `fᵀ a_frac g ≈ ∬ (f(x)−f(y))(g(x)−g(y)) |x−y|^{−n−2s} dx dy` over the
//!   whole product space (kernel prefactor 1, no normalization constant),
//!
//! and the lumped mass is the scalar `∏h` per node. The fractional weights
//! combine a singularity-subtracted Taylor stencil on the near cell,
//! midpoint quadrature over the far cells inside the domain, and closed-form
//! radial tails (exact angular quadrature in 2D) for the strips near the
//! boundary and for the exterior of the domain. The resulting matrix sum has
//! the M-matrix sign pattern (positive diagonal, nonpositive off-diagonal),
//! which is what the comparison arguments of the nonlinear solvers rely on.
//!
//! Since `fᵀ a_frac f` is the full two-sided double integral, the
//! measure-weighted strong operator carries a factor 2 relative to the
//! principal-value integral: `(a_frac·u) / (2·∏h)` approximates
//! `P.V. ∫ (u(x)−u(y)) |x−y|^{−n−2s} dy` at the nodes.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::domain::{Domain, Field};
use crate::error::{Result, SolverError};
use crate::exec::Parallelism;
use crate::quadrature::GaussRule;

/// Hard cap on dense unknowns (two dense `n×n` matrices are stored).
pub const MAX_DENSE_NODES: usize = 4096;

/// The assembled operator pair with its quadrature metadata.
#[derive(Debug, Clone)]
pub struct MixedOperator {
    domain: Domain,
    s: f64,
    parallelism: Parallelism,
    a_loc: DMatrix<f64>,
    a_frac: DMatrix<f64>,
    /// Per-node closed-form tail of the kernel integral over the exterior
    /// of the domain, scaled like `a_frac` (already included in its
    /// diagonal).
    exterior_diag: DVector<f64>,
}

impl MixedOperator {
    /// Assemble with the default execution strategy.
    pub fn assemble(domain: &Domain, s: f64) -> Result<Self> {
        Self::assemble_with(domain, s, Parallelism::default())
    }

    /// Assemble with an explicit execution strategy.
    pub fn assemble_with(domain: &Domain, s: f64, parallelism: Parallelism) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(SolverError::InvalidParameter(format!(
                "fractional order s must lie in (0,1), got {s}"
            )));
        }
        let n = domain.n_nodes();
        if n > MAX_DENSE_NODES {
            return Err(SolverError::SizeGuardExceeded {
                n,
                guard: MAX_DENSE_NODES,
            });
        }
        let (a_loc, mut a_frac, exterior_diag) = match domain.dim() {
            1 => assemble_1d(domain, s, parallelism),
            _ => assemble_2d(domain, s, parallelism),
        };
        symmetrize(&mut a_frac);
        Ok(MixedOperator {
            domain: domain.clone(),
            s,
            parallelism,
            a_loc,
            a_frac,
            exterior_diag,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    pub fn n(&self) -> usize {
        self.domain.n_nodes()
    }

    /// Lumped mass per node, `∏h`.
    pub fn mass(&self) -> f64 {
        self.domain.cell_measure()
    }

    pub fn a_loc(&self) -> &DMatrix<f64> {
        &self.a_loc
    }

    pub fn a_frac(&self) -> &DMatrix<f64> {
        &self.a_frac
    }

    pub fn exterior_diag(&self) -> &DVector<f64> {
        &self.exterior_diag
    }

    /// Dense sum `a_loc + a_frac` (fresh allocation; callers factorize it).
    pub fn system_matrix(&self) -> DMatrix<f64> {
        &self.a_loc + &self.a_frac
    }

    /// A copy of this operator with the fractional part zeroed (classical
    /// Laplacian only); used for local-only eigenvalue bounds and tests.
    pub fn without_fractional(&self) -> MixedOperator {
        MixedOperator {
            domain: self.domain.clone(),
            s: self.s,
            parallelism: self.parallelism,
            a_loc: self.a_loc.clone(),
            a_frac: DMatrix::zeros(self.n(), self.n()),
            exterior_diag: DVector::zeros(self.n()),
        }
    }

    fn check_domain(&self, f: &Field) -> Result<()> {
        if f.domain() != &self.domain {
            return Err(SolverError::DomainMismatch(
                "field does not live on the operator's domain".into(),
            ));
        }
        Ok(())
    }

    /// `(a_loc + a_frac)·f`, the measure-weighted strong residual form.
    pub fn apply_mixed(&self, f: &Field) -> Result<Field> {
        self.check_domain(f)?;
        let v = self.apply_vec(f.values(), true, true);
        Field::from_vector(&self.domain, v)
    }

    /// `a_frac·f` alone.
    pub fn apply_fractional(&self, f: &Field) -> Result<Field> {
        self.check_domain(f)?;
        let v = self.apply_vec(f.values(), false, true);
        Field::from_vector(&self.domain, v)
    }

    /// `a_loc·f` alone.
    pub fn apply_local(&self, f: &Field) -> Result<Field> {
        self.check_domain(f)?;
        let v = self.apply_vec(f.values(), true, false);
        Field::from_vector(&self.domain, v)
    }

    /// Row-parallel matvec. Each output entry is one column/vector dot
    /// product (the matrices are symmetric), evaluated in a fixed order, so
    /// results are bitwise deterministic for any thread count.
    pub(crate) fn apply_vec(
        &self,
        v: &DVector<f64>,
        local: bool,
        fractional: bool,
    ) -> DVector<f64> {
        let n = v.len();
        let mut out = DVector::zeros(n);
        self.parallelism.fill_indexed(out.as_mut_slice(), |i| {
            let mut acc = 0.0;
            if local {
                acc += self.a_loc.column(i).dot(v);
            }
            if fractional {
                acc += self.a_frac.column(i).dot(v);
            }
            acc
        });
        out
    }

    /// The full bilinear form `fᵀ (a_loc + a_frac) g`, symmetric in `(f,g)`.
    pub fn bilinear(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check_domain(f)?;
        self.check_domain(g)?;
        let ag = self.apply_vec(g.values(), true, true);
        Ok(f.values().dot(&ag))
    }

    /// Gagliardo energy `fᵀ a_frac f` of the zero-extended field, exterior
    /// tail included.
    pub fn gagliardo_energy(&self, f: &Field) -> Result<f64> {
        self.check_domain(f)?;
        let af = self.apply_vec(f.values(), false, true);
        Ok(f.values().dot(&af))
    }

    /// Local quadratic form `fᵀ a_loc f` (equals `h1_semi(f)²`).
    pub fn local_energy(&self, f: &Field) -> Result<f64> {
        self.check_domain(f)?;
        let af = self.apply_vec(f.values(), true, false);
        Ok(f.values().dot(&af))
    }

    /// Worst relative symmetry defect of the two assembled matrices.
    pub fn symmetry_defect(&self) -> f64 {
        let rel = |m: &DMatrix<f64>| -> f64 {
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    scale = scale.max(m[(i, j)].abs());
                }
            }
            if scale == 0.0 {
                0.0
            } else {
                worst / scale
            }
        };
        rel(&self.a_loc).max(rel(&self.a_frac))
    }

    /// Dump a matrix in coordinate text format (`row col value` per line)
    /// for external cross-checks.
    pub fn write_coo<W: Write>(&self, matrix: CooMatrix, mut w: W) -> io::Result<()> {
        let m = match matrix {
            CooMatrix::Local => &self.a_loc,
            CooMatrix::Fractional => &self.a_frac,
        };
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{} {} {:.16e}", i, j, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Which matrix [`MixedOperator::write_coo`] dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CooMatrix {
    Local,
    Fractional,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// 1D closed-form tail `∫_{ℝ∖[lo,hi]} |x−y|^{−1−2s} dy` for `x` inside.
fn tail_1d(x: f64, lo: f64, hi: f64, s: f64) -> f64 {
    ((x - lo).powf(-2.0 * s) + (hi - x).powf(-2.0 * s)) / (2.0 * s)
}

fn assemble_1d(
    domain: &Domain,
    s: f64,
    par: Parallelism,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let ax = domain.axes()[0];
    let (a, b, n) = (ax.lo, ax.hi, ax.n);
    let h = ax.h();

    // local stiffness: measure-scaled second-order stencil
    let mut a_loc = DMatrix::zeros(n, n);
    for i in 0..n {
        a_loc[(i, i)] = 2.0 / h;
        if i > 0 {
            a_loc[(i, i - 1)] = -1.0 / h;
        }
        if i + 1 < n {
            a_loc[(i, i + 1)] = -1.0 / h;
        }
    }

    // fractional weights: near-cell Taylor stencil + far-cell midpoint
    let c_near = (h / 2.0).powf(2.0 - 2.0 * s) / ((2.0 - 2.0 * s) * h * h);
    let far: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                h * (k as f64 * h).powf(-1.0 - 2.0 * s)
            }
        })
        .collect();
    let scale = 2.0 * h; // quadratic form = full double integral
    let mut a_frac = DMatrix::zeros(n, n);
    par.fill_chunks(a_frac.as_mut_slice(), n, |i, col| {
        // column i equals row i of the symmetric matrix
        let x = ax.node(i);
        let mut diag = 2.0 * c_near;
        for (j, c) in col.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let w = far[i.abs_diff(j)];
            *c = -scale * w;
            diag += w;
        }
        if i > 0 {
            col[i - 1] -= scale * c_near;
        }
        if i + 1 < n {
            col[i + 1] -= scale * c_near;
        }
        // strips next to the boundary plus the exterior tail: together the
        // complement of the union of the interior cells
        diag += tail_1d(x, a + h / 2.0, b - h / 2.0, s);
        col[i] = scale * diag;
    });

    let ext = DVector::from_fn(n, |i, _| scale * tail_1d(ax.node(i), a, b, s));
    (a_loc, a_frac, ext)
}

/// Second moments of the kernel over the centered near cell
/// `[-hx/2,hx/2]×[-hy/2,hy/2]`: `c_x = ∫ z_x² |z|^{−2−2s} dz` and the
/// symmetric `c_y`, via the radial closed form and angular Gauss panels
/// split at the cell corner direction.
fn near_cell_consts(hx: f64, hy: f64, s: f64, rule: &GaussRule) -> (f64, f64) {
    let phic = hy.atan2(hx);
    let rb = |phi: f64| -> f64 {
        let c = phi.cos().abs();
        let sn = phi.sin().abs();
        let tx = if c > 1e-300 {
            hx / 2.0 / c
        } else {
            f64::INFINITY
        };
        let ty = if sn > 1e-300 {
            hy / 2.0 / sn
        } else {
            f64::INFINITY
        };
        tx.min(ty)
    };
    let p = 2.0 - 2.0 * s;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (lo, hi) in [(0.0, phic), (phic, std::f64::consts::FRAC_PI_2)] {
        cx += 4.0 * rule.integrate(lo, hi, |t| t.cos().powi(2) * rb(t).powf(p)) / p;
        cy += 4.0 * rule.integrate(lo, hi, |t| t.sin().powi(2) * rb(t).powf(p)) / p;
    }
    (cx, cy)
}

/// `∫_{ℝ²∖[x0,x1]×[y0,y1]} |z−p|^{−2−2s} dz` for `p` strictly inside the
/// rectangle: radial closed form, angular Gauss panels split at the four
/// corner directions (the integrand is smooth inside each panel).
#[allow(clippy::too_many_arguments)]
fn complement_tail_2d(
    px: f64,
    py: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    s: f64,
    rule: &GaussRule,
) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let (dx0, dx1) = (px - x0, x1 - px);
    let (dy0, dy1) = (py - y0, y1 - py);
    let mut cuts = [
        dy1.atan2(dx1).rem_euclid(tau),
        dy1.atan2(-dx0).rem_euclid(tau),
        (-dy0).atan2(-dx0).rem_euclid(tau),
        (-dy0).atan2(dx1).rem_euclid(tau),
    ];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let exit = |phi: f64| -> f64 {
        let c = phi.cos();
        let sn = phi.sin();
        let mut t = f64::INFINITY;
        if c > 1e-300 {
            t = t.min(dx1 / c);
        }
        if c < -1e-300 {
            t = t.min(-dx0 / c);
        }
        if sn > 1e-300 {
            t = t.min(dy1 / sn);
        }
        if sn < -1e-300 {
            t = t.min(-dy0 / sn);
        }
        t
    };
    let mut total = 0.0;
    for k in 0..4 {
        let lo = cuts[k];
        let hi = if k == 3 { cuts[0] + tau } else { cuts[k + 1] };
        total += rule.integrate(lo, hi, |phi| exit(phi).powf(-2.0 * s)) / (2.0 * s);
    }
    total
}

fn assemble_2d(
    domain: &Domain,
    s: f64,
    par: Parallelism,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let (ax, ay) = (domain.axes()[0], domain.axes()[1]);
    let (nx, ny) = (ax.n, ay.n);
    let (hx, hy) = (ax.h(), ay.h());
    let n = nx * ny;
    let meas = hx * hy;
    let rule = GaussRule::legendre(32);

    let mut a_loc = DMatrix::zeros(n, n);
    for ix in 0..nx {
        for iy in 0..ny {
            let i = ix * ny + iy;
            a_loc[(i, i)] = meas * (2.0 / (hx * hx) + 2.0 / (hy * hy));
            if ix > 0 {
                a_loc[(i, i - ny)] = -meas / (hx * hx);
            }
            if ix + 1 < nx {
                a_loc[(i, i + ny)] = -meas / (hx * hx);
            }
            if iy > 0 {
                a_loc[(i, i - 1)] = -meas / (hy * hy);
            }
            if iy + 1 < ny {
                a_loc[(i, i + 1)] = -meas / (hy * hy);
            }
        }
    }

    let (cx, cy) = near_cell_consts(hx, hy, s, &rule);
    let cnx = 0.5 * cx / (hx * hx);
    let cny = 0.5 * cy / (hy * hy);

    // midpoint far-field weights, translation invariant: index (dx, dy)
    let far: Vec<f64> = (0..nx)
        .flat_map(|dx| {
            (0..ny).map(move |dy| {
                if dx == 0 && dy == 0 {
                    0.0
                } else {
                    let r2 = (dx as f64 * hx).powi(2) + (dy as f64 * hy).powi(2);
                    meas * r2.powf(-(1.0 + s))
                }
            })
        })
        .collect();

    // per-node closed-form tails: over the complement of the cell union and
    // over the complement of the domain (the difference is the strips)
    let mut tail_box = vec![0.0; n];
    let mut tail_dom = vec![0.0; n];
    par.fill_indexed(&mut tail_box, |i| {
        let c = domain.node_coords(i);
        complement_tail_2d(
            c[0],
            c[1],
            ax.lo + hx / 2.0,
            ax.hi - hx / 2.0,
            ay.lo + hy / 2.0,
            ay.hi - hy / 2.0,
            s,
            &rule,
        )
    });
    par.fill_indexed(&mut tail_dom, |i| {
        let c = domain.node_coords(i);
        complement_tail_2d(c[0], c[1], ax.lo, ax.hi, ay.lo, ay.hi, s, &rule)
    });

    let scale = 2.0 * meas;
    let mut a_frac = DMatrix::zeros(n, n);
    par.fill_chunks(a_frac.as_mut_slice(), n, |i, col| {
        let (ix, iy) = (i / ny, i % ny);
        let mut diag = 2.0 * (cnx + cny);
        for (j, c) in col.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let (jx, jy) = (j / ny, j % ny);
            let w = far[ix.abs_diff(jx) * ny + iy.abs_diff(jy)];
            *c = -scale * w;
            diag += w;
        }
        if ix > 0 {
            col[i - ny] -= scale * cnx;
        }
        if ix + 1 < nx {
            col[i + ny] -= scale * cnx;
        }
        if iy > 0 {
            col[i - 1] -= scale * cny;
        }
        if iy + 1 < ny {
            col[i + 1] -= scale * cny;
        }
        diag += tail_box[i];
        col[i] = scale * diag;
    });

    let ext = DVector::from_fn(n, |i, _| scale * tail_dom[i]);
    (a_loc, a_frac, ext)
}
