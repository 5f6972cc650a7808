//! Pairwise kernels with symmetry transforms, their empirical spectra, and
//! kernel ridge regression over samples of ordered pairs.
//!
//! ```
//! use pairspec::kernel::{build_gram, KernelSpec, PairSample, PointSet, Transform};
//! use pairspec::spectral::{empirical_operator, effective_dimension};
//!
//! let points = PointSet::new(vec![vec![0.1], vec![0.4], vec![0.9]]).unwrap();
//! let sample = PairSample::all_ordered(3);
//! let spec = KernelSpec::gaussian_kronecker(1.0).with_transform(Transform::Symmetric);
//! let t = empirical_operator(&build_gram(&spec, &points, &sample).unwrap()).unwrap();
//! assert!(effective_dimension(&t.values, 0.1).unwrap() > 0.0);
//! ```

pub mod config;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod regression;
pub mod spectral;
pub mod testbed;

pub use error::{Error, Result};
