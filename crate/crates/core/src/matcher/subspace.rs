//! Low-rank compression of the dictionary for large matching jobs.
//!
//! Entries are projected onto an orthonormal basis `V` of a dominant subspace
//! found by randomized subspace iteration on a sample of entries. For an
//! entry `e` with coefficients `c = Vᴴe` and residual `r = ‖e − Vc‖`, the
//! residual is orthogonal to the subspace, so
//! `|⟨e, s⟩ − ⟨c, Vᴴs⟩| ≤ r‖s − VVᴴs‖`. Scores in the subspace thus come
//! with a per-entry, per-signal error bound and the candidate scan stays
//! exact.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

type C64 = Complex<f64>;

/// Basis vectors.
pub(crate) const RANK: usize = 128;
/// Entries used to find the basis.
const SAMPLE: usize = 4096;
/// Subspace iterations after the initial random projection.
const POWER_STEPS: usize = 2;
/// Relative amount added to each squared residual to absorb loss of
/// orthogonality in `V`.
const ORTH_SLACK: f64 = 1e-10;
/// Entries per projection chunk.
const CHUNK: usize = 512;

pub(crate) struct Subspace {
    /// `conj(V)`, row-major `points × RANK`.
    conj_basis: Vec<C64>,
    /// Coefficients `Vᴴe` per entry, interleaved single precision, `2·RANK` per entry.
    pub coeffs: Vec<f32>,
    /// `r / ‖e‖` per entry.
    pub slack: Vec<f32>,
}

/// `c[m×n] = a · b` for complex f64 matrices with explicit strides.
#[allow(clippy::too_many_arguments)]
fn zgemm(m: usize, k: usize, n: usize, a: &[C64], rsa: usize, csa: usize, b: &[C64], rsb: usize, csb: usize, c: &mut [C64]) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if m == 0 || n == 0 || k == 0 {
        c[..m * n].fill(C64::default());
        return;
    }
    assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len() && c.len() >= m * n);
    let one = [1.0, 0.0];
    let zero = [0.0, 0.0];
    // SAFETY: `Complex<f64>` is `repr(C)` with layout `[f64; 2]`; extents asserted above.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            one,
            a.as_ptr().cast(),
            rsa as isize,
            csa as isize,
            b.as_ptr().cast(),
            rsb as isize,
            csb as isize,
            zero,
            c.as_mut_ptr().cast(),
            n as isize,
            1,
        );
    }
}

/// Orthonormalizes the columns of a row-major `rows × cols` matrix in place
/// with two passes of modified Gram-Schmidt. Degenerate columns become zero.
fn orthonormalize(z: &mut [C64], rows: usize, cols: usize) {
    let mut col = vec![C64::default(); rows];
    let mut done: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        for i in 0..rows {
            col[i] = z[i * cols + j];
        }
        let start = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &done {
                let p: C64 = q.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in col.iter_mut().zip(q) {
                    *x -= p * a;
                }
            }
        }
        let n = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-10 * start && n > 0.0 {
            col.iter_mut().for_each(|v| *v /= n);
        } else {
            col.fill(C64::default());
        }
        for i in 0..rows {
            z[i * cols + j] = col[i];
        }
        done.push(col.clone());
    }
}

fn to_complex(entries: &[f32]) -> Vec<C64> {
    entries.chunks_exact(2).map(|c| C64::new(c[0] as f64, c[1] as f64)).collect()
}

impl Subspace {
    /// Whether compression pays off for this dictionary shape.
    pub fn worthwhile(points: usize, n_entries: usize) -> bool {
        points >= 4 * RANK && n_entries >= 4 * RANK
    }

    /// `entries` holds `n_entries` interleaved complex rows of `points` samples.
    pub fn build(entries: &[f32], points: usize, entry_norms: &[f64]) -> Self {
        let n_entries = entry_norms.len();
        let width = 2 * points;
        let step = n_entries.div_ceil(SAMPLE).max(1);
        let sample: Vec<C64> = (0..n_entries).step_by(step).flat_map(|j| to_complex(&entries[j * width..(j + 1) * width])).collect();
        let ns = sample.len() / points;

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut z: Vec<C64> = (0..points * RANK)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let mut y = vec![C64::default(); ns * RANK];
        for _ in 0..=POWER_STEPS {
            // y = E z, then z = Eᴴ y = conj(Eᵀ conj(y)).
            zgemm(ns, points, RANK, &sample, points, 1, &z, RANK, 1, &mut y);
            y.iter_mut().for_each(|v| *v = v.conj());
            zgemm(points, ns, RANK, &sample, 1, points, &y, RANK, 1, &mut z);
            z.iter_mut().for_each(|v| *v = v.conj());
            orthonormalize(&mut z, points, RANK);
        }
        let conj_basis: Vec<C64> = z.iter().map(|v| v.conj()).collect();

        let mut coeffs = vec![0f32; n_entries * 2 * RANK];
        let mut slack = vec![0f32; n_entries];
        coeffs
            .par_chunks_mut(CHUNK * 2 * RANK)
            .zip(slack.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(ci, (cout, sout))| {
                let first = ci * CHUNK;
                let n = sout.len();
                let e = to_complex(&entries[first * width..(first + n) * width]);
                let mut c = vec![C64::default(); n * RANK];
                zgemm(n, points, RANK, &e, points, 1, &conj_basis, RANK, 1, &mut c);
                for (j, row) in c.chunks_exact(RANK).enumerate() {
                    let en = entry_norms[first + j];
                    let kept: f64 = row.iter().map(|v| v.norm_sqr()).sum();
                    let r = ((en * en - kept).max(0.0) + ORTH_SLACK * en * en).sqrt();
                    sout[j] = if en > 0.0 { (r / en) as f32 * (1.0 + 1e-6) } else { 0.0 };
                    for (k, v) in row.iter().enumerate() {
                        cout[j * 2 * RANK + 2 * k] = v.re as f32;
                        cout[j * 2 * RANK + 2 * k + 1] = v.im as f32;
                    }
                }
            });
        Self { conj_basis, coeffs, slack }
    }

    /// `Vᴴs` and `‖s − VVᴴs‖` for a row-major `n × points` block of signals.
    pub fn project(&self, signals: &[C64], n: usize, points: usize) -> (Vec<C64>, Vec<f32>) {
        let mut d = vec![C64::default(); n * RANK];
        zgemm(n, points, RANK, signals, points, 1, &self.conj_basis, RANK, 1, &mut d);
        let perp = signals
            .chunks_exact(points.max(1))
            .zip(d.chunks_exact(RANK))
            .map(|(s, d)| {
                let total: f64 = s.iter().map(|v| v.norm_sqr()).sum();
                let kept: f64 = d.iter().map(|v| v.norm_sqr()).sum();
                (((total - kept).max(0.0) + ORTH_SLACK * total).sqrt() * (1.0 + 1e-6)) as f32
            })
            .collect();
        (d, perp)
    }
}
