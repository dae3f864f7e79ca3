//! Five-point semi-vectorial (quasi-TE) Helmholtz operator.
//!
//! For the dominant field `Ex` on cell centers:
//!
//! ```text
//! ∂x[(1/ε) ∂x(ε Ex)] + ∂y² Ex + k0² ε Ex = β² Ex
//! ```
//!
//! The operator is divided by `k0²`, so its eigenvalues are `n_eff²`.
//! Interface permittivities in the x flux terms are arithmetic means of the
//! two neighboring cells.

use num_complex::Complex64;

use super::Boundary;

/// Banded storage: five coefficients per row.
#[derive(Debug, Clone)]
pub struct HelmholtzOperator {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<Complex64>,
    pub west: Vec<Complex64>,
    pub east: Vec<Complex64>,
    pub south: Vec<Complex64>,
    pub north: Vec<Complex64>,
}

impl HelmholtzOperator {
    pub fn assemble(
        eps: &[Complex64],
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
        wavelength: f64,
        bx: Boundary,
        by: Boundary,
    ) -> Self {
        let k0 = 2.0 * std::f64::consts::PI / wavelength;
        let ax = 1.0 / (k0 * dx).powi(2);
        let ay = 1.0 / (k0 * dy).powi(2);
        let n = nx * ny;
        let zero = Complex64::new(0.0, 0.0);
        let mut op = Self {
            nx,
            ny,
            diag: vec![zero; n],
            west: vec![zero; n],
            east: vec![zero; n],
            south: vec![zero; n],
            north: vec![zero; n],
        };
        for j in 0..ny {
            for i in 0..nx {
                let p = j * nx + i;
                let e = eps[p];
                let mut d = e;

                if i + 1 < nx {
                    let en = eps[p + 1];
                    let face = 0.5 * (e + en);
                    op.east[p] = ax * en / face;
                    d -= ax * e / face;
                } else if bx == Boundary::ZeroField {
                    d -= ax;
                }
                if i > 0 {
                    let en = eps[p - 1];
                    let face = 0.5 * (e + en);
                    op.west[p] = ax * en / face;
                    d -= ax * e / face;
                } else if bx == Boundary::ZeroField {
                    d -= ax;
                }

                if j + 1 < ny {
                    op.north[p] = Complex64::new(ay, 0.0);
                    d -= ay;
                } else if by == Boundary::ZeroField {
                    d -= ay;
                }
                if j > 0 {
                    op.south[p] = Complex64::new(ay, 0.0);
                    d -= ay;
                } else if by == Boundary::ZeroField {
                    d -= ay;
                }
                op.diag[p] = d;
            }
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.nx * self.ny
    }

    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let nx = self.nx;
        for p in 0..self.dim() {
            let i = p % nx;
            let mut acc = self.diag[p] * v[p];
            if i > 0 {
                acc += self.west[p] * v[p - 1];
            }
            if i + 1 < nx {
                acc += self.east[p] * v[p + 1];
            }
            if p >= nx {
                acc += self.south[p] * v[p - nx];
            }
            if p + nx < v.len() {
                acc += self.north[p] * v[p + nx];
            }
            out[p] = acc;
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|p| {
                self.diag[p].norm()
                    + self.west[p].norm()
                    + self.east[p].norm()
                    + self.south[p].norm()
                    + self.north[p].norm()
            })
            .fold(0.0, f64::max)
    }

    /// `(row, col, value)` entries of `A - shift·I`.
    pub fn shifted_triplets(&self, shift: Complex64) -> Vec<(usize, usize, Complex64)> {
        let nx = self.nx;
        let n = self.dim();
        let mut t = Vec::with_capacity(5 * n);
        for p in 0..n {
            let i = p % nx;
            t.push((p, p, self.diag[p] - shift));
            if i > 0 {
                t.push((p, p - 1, self.west[p]));
            }
            if i + 1 < nx {
                t.push((p, p + 1, self.east[p]));
            }
            if p >= nx {
                t.push((p, p - nx, self.south[p]));
            }
            if p + nx < n {
                t.push((p, p + nx, self.north[p]));
            }
        }
        t
    }
}
