//! Base kernels on points, pairwise constructions and their symmetry transforms.
//!
//! A pairwise kernel compares two ordered pairs `(v, v')` and `(w, w')`. The raw
//! pairwise value comes from a [`Construction`] over a [`BaseKernel`]; a
//! [`Transform`] then averages it over swaps inside the argument pairs:
//!
//! | transform | value |
//! |-----------|-------|
//! | permuted | `k(v', v, w', w)` |
//! | permutation invariant | `½(k(v, v', w, w') + k(v', v, w', w))` |
//! | symmetric | `¼` of the sum over all four within-pair swaps |
//! | anti-symmetric | `¼` of the signed sum, one sign flip per swapped pair |
//!
//! The symmetric and anti-symmetric values always add up to the permutation
//! invariant one.

mod gram;
mod sample;

pub use gram::{build_gram, normalize_pairwise, GramMatrix, PSD_TOL};
pub use sample::{close_under_swap, PairSample, PointSet, SwapMode};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseKernel {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Gaussian { gamma: f64 },
}

impl BaseKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseKernel::Linear => Ok(()),
            BaseKernel::Polynomial { degree, offset } => {
                if degree < 1 {
                    return Err(Error::InvalidSpec("polynomial degree must be >= 1".into()));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidSpec(format!("polynomial offset {offset} must be >= 0")));
                }
                Ok(())
            }
            BaseKernel::Gaussian { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidSpec(format!("gaussian gamma {gamma} must be > 0")));
                }
                Ok(())
            }
        }
    }

    /// Unchecked evaluation; both slices must have the same length.
    #[inline]
    pub(crate) fn eval(&self, v: &[f64], w: &[f64]) -> f64 {
        match *self {
            BaseKernel::Linear => dot(v, w),
            BaseKernel::Polynomial { degree, offset } => (dot(v, w) + offset).powi(degree as i32),
            BaseKernel::Gaussian { gamma } => {
                let sq: f64 = v.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

#[inline]
fn dot(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// How a base kernel on points is lifted to ordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// `k(v, w) · k(v', w')`
    Kronecker,
    /// `k(v, w)`; the second element of each pair is ignored.
    Pointwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    Permuted,
    PermutationInvariant,
    Symmetric,
    Antisymmetric,
}

impl Transform {
    pub const ALL: [Transform; 5] = [
        Transform::None,
        Transform::Permuted,
        Transform::PermutationInvariant,
        Transform::Symmetric,
        Transform::Antisymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::Permuted => "permuted",
            Transform::PermutationInvariant => "permutation_invariant",
            Transform::Symmetric => "symmetric",
            Transform::Antisymmetric => "antisymmetric",
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .or(match s {
                "pi" | "PI" => Some(Transform::PermutationInvariant),
                "S" => Some(Transform::Symmetric),
                "A" => Some(Transform::Antisymmetric),
                _ => None,
            })
            .ok_or_else(|| Error::Parse(format!("unknown transform `{s}`")))
    }
}

impl std::str::FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kronecker" => Ok(Construction::Kronecker),
            "pointwise" => Ok(Construction::Pointwise),
            other => Err(Error::Parse(format!("unknown construction `{other}`"))),
        }
    }
}

/// Declarative description of a pairwise kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub construction: Construction,
    pub transform: Transform,
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(base: BaseKernel, construction: Construction, transform: Transform) -> Result<Self> {
        let spec = Self { base, construction, transform, scale: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian_kronecker(gamma: f64) -> Self {
        Self {
            base: BaseKernel::Gaussian { gamma },
            construction: Construction::Kronecker,
            transform: Transform::None,
            scale: 1.0,
        }
    }

    /// The transitive ranking kernel: anti-symmetrized pointwise kernel.
    pub fn transitive(base: BaseKernel) -> Self {
        Self {
            base,
            construction: Construction::Pointwise,
            transform: Transform::Antisymmetric,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("scale {} must be > 0", self.scale)));
        }
        Ok(())
    }

    pub fn with_transform(&self, transform: Transform) -> Self {
        Self { transform, ..*self }
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        Self { scale, ..*self }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    #[inline]
    fn raw(&self, v: &[f64], vp: &[f64], w: &[f64], wp: &[f64]) -> f64 {
        match self.construction {
            Construction::Kronecker => self.base.eval(v, w) * self.base.eval(vp, wp),
            Construction::Pointwise => self.base.eval(v, w),
        }
    }

    /// Unchecked pairwise evaluation. The four-term sums are grouped so that
    /// swapping within either argument pair permutes operands of commutative
    /// additions only, which makes (anti-)symmetry bit-exact.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
        let ((v, vp), (w, wp)) = (a, b);
        let value = match self.transform {
            Transform::None => self.raw(v, vp, w, wp),
            Transform::Permuted => self.raw(vp, v, wp, w),
            Transform::PermutationInvariant => 0.5 * (self.raw(v, vp, w, wp) + self.raw(vp, v, wp, w)),
            Transform::Symmetric | Transform::Antisymmetric => {
                let t1 = self.raw(v, vp, w, wp);
                let t2 = self.raw(vp, v, w, wp);
                let t3 = self.raw(v, vp, wp, w);
                let t4 = self.raw(vp, v, wp, w);
                if self.transform == Transform::Symmetric {
                    0.25 * ((t1 + t2) + (t3 + t4))
                } else {
                    0.25 * ((t1 - t2) - (t3 - t4))
                }
            }
        };
        self.scale * value
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.base {
            BaseKernel::Linear => "linear".to_string(),
            BaseKernel::Polynomial { degree, offset } => format!("polynomial(degree={degree},offset={offset})"),
            BaseKernel::Gaussian { gamma } => format!("gaussian(gamma={gamma})"),
        };
        let construction = match self.construction {
            Construction::Kronecker => "kronecker",
            Construction::Pointwise => "pointwise",
        };
        write!(f, "{construction}/{base}/{}/scale={}", self.transform.name(), self.scale)
    }
}

fn check_point(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    if let Some(i) = p.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite { location: format!("coordinate {i}") });
    }
    Ok(())
}

/// Base kernel value `k(v, w)` on two points.
pub fn eval_base(spec: &KernelSpec, v: &[f64], w: &[f64]) -> Result<f64> {
    check_point(v, v.len())?;
    check_point(w, v.len())?;
    Ok(spec.base.eval(v, w))
}

/// Pairwise kernel value between ordered pairs `a = (v, v')` and `b = (w, w')`.
pub fn eval_pairwise(spec: &KernelSpec, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Result<f64> {
    spec.validate()?;
    let dim = a.0.len();
    for p in [a.0, a.1, b.0, b.1] {
        check_point(p, dim)?;
    }
    Ok(spec.eval_unchecked(a, b))
}
