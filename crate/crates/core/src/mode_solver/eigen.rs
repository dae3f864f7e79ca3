//! Shift-invert Arnoldi for the complex non-Hermitian mode operator.
//!
//! `(A - σI)` is factored once with a sparse LU; Arnoldi then runs on its
//! inverse, whose dominant eigenvalues `μ` map back to the eigenvalues of
//! `A` nearest the shift through `λ = σ + 1/μ`.

use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, MatMut};
use faer::prelude::Solve;
use num_complex::Complex64;

use super::operator::HelmholtzOperator;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
    /// `‖(A - λ)x‖ / (|λ|·‖x‖)`
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ArnoldiSettings {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
}

impl Default for ArnoldiSettings {
    fn default() -> Self {
        Self { krylov_dim: 24, max_restarts: 40, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiReport {
    pub restarts: usize,
    pub krylov_dim: usize,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EigenFailure {
    Factorization(String),
    Dense(String),
    NotConverged(ArnoldiReport),
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic, symmetry-free start vector (splitmix64).
fn start_vector(n: usize) -> Vec<Complex64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| Complex64::new(1.0 + next(), next())).collect()
}

pub struct ShiftInvert {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    shift: Complex64,
    n: usize,
}

impl ShiftInvert {
    pub fn new(op: &HelmholtzOperator, shift: Complex64) -> Result<Self, EigenFailure> {
        let n = op.dim();
        let triplets: Vec<Triplet<usize, usize, c64>> = op
            .shifted_triplets(shift)
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| EigenFailure::Factorization(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| EigenFailure::Factorization(format!("{e:?}")))?;
        Ok(Self { lu, shift, n })
    }

    fn apply(&self, v: &mut [Complex64]) {
        let view: MatMut<'_, c64> = MatMut::from_column_major_slice_mut(v, self.n, 1);
        self.lu.solve_in_place(view);
    }
}

/// Eigenpairs of `op` nearest `shift`, ordered by distance to the shift.
///
/// `wanted + guard` pairs are tracked. The `wanted` ones with the largest
/// `Re √λ` must reach `settings.tol`; the guards only need `√tol`, enough to
/// be sure nothing ranked above the wanted pairs is missed.
///
/// Thick-restarted Arnoldi: after each sweep the orthonormalized wanted Ritz
/// subspace (plus the residual direction) seeds the next one, so converged
/// information is never discarded.
pub fn eigs_near(
    op: &HelmholtzOperator,
    shift: Complex64,
    wanted: usize,
    guard: usize,
    settings: ArnoldiSettings,
) -> Result<(Vec<EigenPair>, ArnoldiReport), EigenFailure> {
    let n = op.dim();
    let tight = wanted.max(1);
    let guard_tol = settings.tol.sqrt();
    let wanted = (wanted + guard).clamp(1, n.saturating_sub(1).max(1));
    let m = settings.krylov_dim.max(2 * wanted + 2).min(n.saturating_sub(1)).max(1);
    let keep = (wanted + (m - wanted) / 2).clamp(1, (m - 1).max(1));
    let si = ShiftInvert::new(op, shift)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut report = ArnoldiReport { restarts: 0, krylov_dim: m, residuals: vec![] };
    let mut scratch = vec![zero; n];

    let start = start_vector(n);
    let s = 1.0 / norm(&start);
    let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|x| x * s).collect()];
    // projected matrix, (m + 1) x m; row `steps` holds the residual couplings
    let mut h = Mat::<c64>::zeros(m + 1, m);
    let mut k = 0;

    for restart in 0..=settings.max_restarts {
        report.restarts = restart;
        let mut steps = m;
        let mut invariant = false;
        for j in k..m {
            let mut w = basis[j].clone();
            si.apply(&mut w);
            // classical Gram-Schmidt, applied twice
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[(i, j)] += c;
                    for (a, b) in w.iter_mut().zip(v) {
                        *a -= c * b;
                    }
                }
            }
            let beta = norm(&w);
            h[(j + 1, j)] = Complex64::new(beta, 0.0);
            let col_scale = (0..=j).map(|i| h[(i, j)].norm()).fold(beta, f64::max);
            if beta <= 1e-13 * col_scale {
                steps = j + 1;
                invariant = true;
                break;
            }
            basis.push(w.into_iter().map(|x| x / beta).collect());
        }

        let hm = Mat::<c64>::from_fn(steps, steps, |i, j| h[(i, j)]);
        let evd = hm.eigen().map_err(|e| EigenFailure::Dense(format!("{e:?}")))?;
        let mu = evd.S().column_vector();
        let u = evd.U();
        let mut order: Vec<usize> = (0..steps).filter(|&i| mu[i].norm() > 0.0).collect();
        order.sort_by(|&a, &b| mu[b].norm().total_cmp(&mu[a].norm()).then(a.cmp(&b)));

        let pairs: Vec<EigenPair> = order
            .iter()
            .take(wanted)
            .map(|&q| {
                let value = si.shift + Complex64::new(1.0, 0.0) / mu[q];
                let mut x = vec![zero; n];
                for (i, v) in basis.iter().enumerate().take(steps) {
                    let c = u[(i, q)];
                    for (a, b) in x.iter_mut().zip(v) {
                        *a += c * b;
                    }
                }
                op.apply(&x, &mut scratch);
                let r = scratch
                    .iter()
                    .zip(&x)
                    .map(|(ax, xi)| (ax - value * xi).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                let residual = r / (value.norm() * norm(&x));
                EigenPair { value, vector: x, residual }
            })
            .collect();
        report.residuals = pairs.iter().map(|p| p.residual).collect();

        let mut ranked: Vec<&EigenPair> = pairs.iter().collect();
        ranked.sort_by(|a, b| b.value.sqrt().re.total_cmp(&a.value.sqrt().re));
        let done = pairs.len() >= wanted
            && ranked.iter().take(tight).all(|p| p.residual <= settings.tol)
            && ranked.iter().all(|p| p.residual <= guard_tol);
        if done {
            return Ok((pairs, report));
        }
        if restart == settings.max_restarts || invariant {
            let converged: Vec<EigenPair> =
                pairs.into_iter().filter(|p| p.residual <= settings.tol).collect();
            if converged.is_empty() {
                return Err(EigenFailure::NotConverged(report));
            }
            return Ok((converged, report));
        }

        // orthonormal basis Q of the kept Ritz vectors (modified Gram-Schmidt)
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(keep);
        for &col in order.iter().take(keep) {
            let mut y: Vec<Complex64> = (0..steps).map(|i| u[(i, col)]).collect();
            for _ in 0..2 {
                for prev in &q {
                    let c = dot(prev, &y);
                    for (a, b) in y.iter_mut().zip(prev) {
                        *a -= c * b;
                    }
                }
            }
            let ny = norm(&y);
            if ny > 1e-10 {
                q.push(y.into_iter().map(|x| x / ny).collect());
            }
        }
        let kk = q.len();

        let mut new_h = Mat::<c64>::zeros(m + 1, m);
        // T = Qᴴ H Q, residual row b = h[steps, :] Q
        let hq: Vec<Vec<Complex64>> = q
            .iter()
            .map(|qc| (0..steps).map(|i| (0..steps).map(|l| hm[(i, l)] * qc[l]).sum()).collect())
            .collect();
        for a in 0..kk {
            for b in 0..kk {
                new_h[(a, b)] = dot(&q[a], &hq[b]);
            }
        }
        for b in 0..kk {
            new_h[(kk, b)] = (0..steps).map(|l| h[(steps, l)] * q[b][l]).sum();
        }

        let residual_dir = basis.pop().expect("basis has steps + 1 vectors");
        let mut new_basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        for qc in &q {
            let mut x = vec![zero; n];
            for (v, &c) in basis.iter().zip(qc) {
                for (a, b) in x.iter_mut().zip(v) {
                    *a += c * b;
                }
            }
            new_basis.push(x);
        }
        new_basis.push(residual_dir);
        basis = new_basis;
        h = new_h;
        k = kk;
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_solver::Boundary;

    #[test]
    fn recovers_laplacian_spectrum() {
        // Uniform medium with zero-field walls: eigenvalues are
        // ε - (2/(k0 d)²)(1 - cos(pπ/(N+1))) summed over both axes.
        let (nx, ny) = (14, 12);
        let (d, lambda) = (50e-9, 1.0e-6);
        let eps = vec![Complex64::new(4.0, -0.01); nx * ny];
        let op = HelmholtzOperator::assemble(
            &eps,
            nx,
            ny,
            d,
            d,
            lambda,
            Boundary::ZeroField,
            Boundary::ZeroField,
        );
        let k0d = 2.0 * std::f64::consts::PI / lambda * d;
        let a = 1.0 / (k0d * k0d);
        let lam = |p: usize, q: usize| {
            let cx = 2.0 * a * (1.0 - (p as f64 * std::f64::consts::PI / (nx as f64 + 1.0)).cos());
            let cy = 2.0 * a * (1.0 - (q as f64 * std::f64::consts::PI / (ny as f64 + 1.0)).cos());
            Complex64::new(4.0 - cx - cy, -0.01)
        };
        let (pairs, _) =
            eigs_near(&op, Complex64::new(4.0, 0.0), 3, 0, ArnoldiSettings::default()).unwrap();
        let mut expected = vec![lam(1, 1), lam(2, 1), lam(1, 2)];
        expected.sort_by(|a, b| b.re.total_cmp(&a.re));
        for (p, e) in pairs.iter().zip(&expected) {
            assert!((p.value - e).norm() < 1e-10, "{:?} vs {:?}", p.value, e);
            assert!(p.residual < 1e-8);
        }
    }
}
