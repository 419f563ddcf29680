//! Exhaustive scan of a dictionary in blocks via single-precision GEMM.
//!
//! Each signal block is multiplied against chunks of the entry matrix. For a
//! complex signal `s` stored interleaved, `Re⟨e, s⟩` is the real dot product
//! of `e` with `s`, and `Im⟨e, s⟩` is the dot product with `-i·s`, so each
//! signal contributes two GEMM rows. Each single-precision score carries an
//! error bound: half the rounding margin plus an optional per-entry slack.
//! Every entry whose upper bound reaches the best lower bound is kept and
//! re-scored exactly in double precision, which makes the result identical to
//! a plain f64 scan.

/// Signals per GEMM block.
pub(crate) const SIGNAL_BLOCK: usize = 64;
/// Entries per GEMM chunk.
const ENTRY_CHUNK: usize = 1024;
/// Candidate margin relative to the signal norm.
const MARGIN: f32 = 2e-4;
/// Beyond this many candidates a signal falls back to an f64 scan.
const MAX_CANDIDATES: usize = 4096;

/// `c[m×n] = a[m×k] · b[n×k]ᵀ`, all row-major.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: bounds asserted above; strides describe the row-major layouts.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Rows of the left GEMM operand and scaling of the products into scores.
pub(crate) struct Block {
    /// Row-major `rows × width` matrix.
    pub rows: Vec<f32>,
    /// Number of signals in the block.
    pub signals: usize,
    /// GEMM rows per signal: 2 for complex scores, 1 for magnitude.
    pub rows_per_signal: usize,
    /// `‖s‖` per signal, for the candidate margin.
    pub signal_norms: Vec<f32>,
    /// Norm that multiplies the per-entry slack, per signal.
    pub slack_scale: Vec<f32>,
}

/// Best entries by single-precision score, per signal in the block.
/// `slack[j]` widens the error bound of entry `j` by `slack[j]` times the
/// signal's `slack_scale`.
pub(crate) fn candidates(
    block: &Block,
    entries: &[f32],
    width: usize,
    inv_norms: &[f32],
    slack: Option<&[f32]>,
) -> Vec<Option<Vec<u32>>> {
    let n_entries = inv_norms.len();
    let m = block.signals * block.rows_per_signal;
    let mut out = vec![0f32; m * ENTRY_CHUNK];
    let mut scores = vec![0f32; ENTRY_CHUNK];
    // Best lower bound so far, per signal.
    let mut best = vec![f32::NEG_INFINITY; block.signals];
    let mut cands: Vec<Vec<(u32, f32)>> = vec![Vec::new(); block.signals];
    let mut overflow = vec![false; block.signals];
    let mut start = 0;
    while start < n_entries {
        let n = ENTRY_CHUNK.min(n_entries - start);
        gemm_abt(m, width, n, &block.rows, &entries[start * width..(start + n) * width], &mut out);
        for s in 0..block.signals {
            if overflow[s] {
                continue;
            }
            let half = 0.5 * MARGIN * block.signal_norms[s];
            let scale = block.slack_scale[s];
            let inv = &inv_norms[start..start + n];
            let scores = &mut scores[..n];
            if block.rows_per_signal == 2 {
                let re = &out[2 * s * n..(2 * s + 1) * n];
                let im = &out[(2 * s + 1) * n..(2 * s + 2) * n];
                for j in 0..n {
                    scores[j] = (re[j] * re[j] + im[j] * im[j]).sqrt() * inv[j];
                }
            } else {
                let dot = &out[s * n..(s + 1) * n];
                for j in 0..n {
                    scores[j] = dot[j] * inv[j];
                }
            }
            let list = &mut cands[s];
            for (j, &score) in scores.iter().enumerate() {
                let bound = half + slack.map_or(0.0, |sl| sl[start + j] * scale);
                let (lo, hi) = (score - bound, score + bound);
                if hi >= best[s] {
                    if lo > best[s] {
                        best[s] = lo;
                    }
                    list.push(((start + j) as u32, hi));
                }
            }
            if list.len() > 256 {
                let floor = best[s];
                list.retain(|&(_, hi)| hi >= floor);
                if list.len() > MAX_CANDIDATES {
                    overflow[s] = true;
                    list.clear();
                }
            }
        }
        start += n;
    }
    cands
        .into_iter()
        .enumerate()
        .map(|(s, list)| {
            if overflow[s] {
                return None;
            }
            let floor = best[s];
            Some(list.into_iter().filter(|&(_, hi)| hi >= floor).map(|(j, _)| j).collect())
        })
        .collect()
}
