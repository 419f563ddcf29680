//! Parameter grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{SequenceKind, SignalModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    SinglePoolIrff,
    TwoPoolIrff,
    TwoPoolIrffMt,
}

impl DictionaryKind {
    pub const ALL: [DictionaryKind; 3] =
        [DictionaryKind::SinglePoolIrff, DictionaryKind::TwoPoolIrff, DictionaryKind::TwoPoolIrffMt];

    pub fn model(self) -> SignalModel {
        match self {
            DictionaryKind::SinglePoolIrff => SignalModel::SinglePool,
            _ => SignalModel::TwoPool,
        }
    }

    pub fn sequence(self) -> SequenceKind {
        match self {
            DictionaryKind::TwoPoolIrffMt => SequenceKind::IrffMt,
            _ => SequenceKind::Irff,
        }
    }

    pub fn has_f_axis(self) -> bool {
        self.model() == SignalModel::TwoPool
    }

    pub fn name(self) -> &'static str {
        match self {
            DictionaryKind::SinglePoolIrff => "single_pool_irff",
            DictionaryKind::TwoPoolIrff => "two_pool_irff",
            DictionaryKind::TwoPoolIrffMt => "two_pool_irff_mt",
        }
    }
}

impl std::str::FromStr for DictionaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown dictionary kind '{s}'")))
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

pub fn linear_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| match i {
            _ if i == n - 1 => hi,
            _ => lo + (hi - lo) * i as f64 / (n - 1) as f64,
        })
        .collect()
}

/// Zero followed by `n_nonzero` log-spaced fractions in `[lo, hi]`.
pub fn fraction_axis(lo: f64, hi: f64, n_nonzero: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend(log_axis(lo, hi, n_nonzero));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t1_ms: Vec<f64>,
    pub t2_ms: Vec<f64>,
    pub b1: Vec<f64>,
    /// Absent for single-pool grids.
    pub f_frac: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTuple {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub b1: f64,
    pub f_frac: f64,
}

impl GridSpec {
    /// 20 × 20 × 11 (× 8 F values for two-pool kinds).
    pub fn desk(kind: DictionaryKind) -> Self {
        Self::with_sizes(kind, 20, 20, 11, 7)
    }

    /// 70 × 70 × 41 (× 16 F values for two-pool kinds).
    pub fn full(kind: DictionaryKind) -> Self {
        Self::with_sizes(kind, 70, 70, 41, 15)
    }

    /// Default ranges (T1 100–4300 ms, T2 15–430 ms, B1 0.7–1.3, F 0.5–30 %)
    /// with the given axis sizes.
    pub fn with_sizes(kind: DictionaryKind, n_t1: usize, n_t2: usize, n_b1: usize, n_f_nonzero: usize) -> Self {
        Self {
            t1_ms: log_axis(100.0, 4300.0, n_t1),
            t2_ms: log_axis(15.0, 430.0, n_t2),
            b1: linear_axis(0.7, 1.3, n_b1),
            f_frac: kind.has_f_axis().then(|| fraction_axis(0.005, 0.30, n_f_nonzero)),
        }
    }

    pub fn validate(&self, kind: DictionaryKind) -> Result<()> {
        let check = |name: &str, axis: &[f64]| -> Result<()> {
            if axis.is_empty() {
                return Err(Error::Config(format!("{name} axis is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{name} axis has non-finite values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("{name} axis is not strictly increasing")));
            }
            Ok(())
        };
        check("t1", &self.t1_ms)?;
        check("t2", &self.t2_ms)?;
        check("b1", &self.b1)?;
        if self.t1_ms[0] <= 0.0 || self.t2_ms[0] <= 0.0 {
            return Err(Error::Config("relaxation times must be positive".into()));
        }
        let (lo, hi) = crate::sequence::simulate::B1_RANGE;
        if self.b1[0] < lo || self.b1[self.b1.len() - 1] > hi {
            return Err(Error::Config(format!("b1 axis must lie within [{lo}, {hi}]")));
        }
        match (&self.f_frac, kind.has_f_axis()) {
            (Some(f), true) => {
                check("f", f)?;
                if f[0] != 0.0 {
                    return Err(Error::Config("f axis must start at 0".into()));
                }
                if f[f.len() - 1] >= 0.5 {
                    return Err(Error::Config("f axis values must be below 0.5".into()));
                }
            }
            (None, false) => {}
            (None, true) => return Err(Error::Config(format!("{} needs an f axis", kind.name()))),
            (Some(_), false) => return Err(Error::Config(format!("{} takes no f axis", kind.name()))),
        }
        Ok(())
    }

    /// Raw Cartesian product size, before exclusions.
    pub fn raw_count(&self) -> usize {
        self.t1_ms.len() * self.t2_ms.len() * self.b1.len() * self.f_frac.as_ref().map_or(1, |f| f.len())
    }
}

/// Row-major product over (t1, t2, b1, f) without the `t2 >= t1` tuples.
pub fn build_grid(kind: DictionaryKind, axes: &GridSpec) -> Result<Vec<ParamTuple>> {
    axes.validate(kind)?;
    let fs: &[f64] = axes.f_frac.as_deref().unwrap_or(&[0.0]);
    let mut out = Vec::new();
    for &t1 in &axes.t1_ms {
        for &t2 in &axes.t2_ms {
            if t2 >= t1 {
                continue;
            }
            for &b1 in &axes.b1 {
                for &f in fs {
                    out.push(ParamTuple { t1_ms: t1, t2_ms: t2, b1, f_frac: f });
                }
            }
        }
    }
    Ok(out)
}
