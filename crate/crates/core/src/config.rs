//! Flat `key = value` configuration files.
//!
//! ```text
//! # kernel
//! base.kind = gaussian
//! base.gamma = 0.5
//! construction = kronecker
//! transform = symmetric
//! ```
//!
//! Suite files use the suite keys (`seed`, `trials`, `sizes`, ...) and describe
//! kernels under numbered prefixes, `spec.0.base.kind = gaussian`. Lists are
//! comma separated. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::{BaseKernel, Construction, KernelSpec, Transform};
use crate::testbed::{default_tolerances, SuiteConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

/// Comma separated values; empty items are rejected.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>().map_err(|_| Error::Config(format!("bad list item `{item}` for `{key}`")))
        })
        .collect()
}

const KERNEL_KEYS: [&str; 7] = ["base.kind", "base.gamma", "base.degree", "base.offset", "construction", "transform", "scale"];

fn kernel_from(cfg: &FlatConfig, prefix: &str) -> Result<KernelSpec> {
    let key = |k: &str| format!("{prefix}{k}");
    let kind = cfg
        .get(&key("base.kind"))
        .ok_or_else(|| Error::Config(format!("missing `{}`", key("base.kind"))))?;
    let base = match kind {
        "linear" => BaseKernel::Linear,
        "polynomial" => BaseKernel::Polynomial {
            degree: cfg.parsed(&key("base.degree"))?.unwrap_or(2),
            offset: cfg.parsed(&key("base.offset"))?.unwrap_or(1.0),
        },
        "gaussian" => BaseKernel::Gaussian { gamma: cfg.parsed(&key("base.gamma"))?.unwrap_or(1.0) },
        other => return Err(Error::Config(format!("unknown base kernel `{other}`"))),
    };
    let construction = match cfg.get(&key("construction")) {
        Some(v) => Construction::from_str(v)?,
        None => Construction::Kronecker,
    };
    let transform = match cfg.get(&key("transform")) {
        Some(v) => Transform::from_str(v)?,
        None => Transform::None,
    };
    let mut spec = KernelSpec::new(base, construction, transform)?;
    if let Some(scale) = cfg.parsed(&key("scale"))? {
        spec = spec.with_scale(scale);
        spec.validate()?;
    }
    Ok(spec)
}

/// Kernel spec from a flat config holding only kernel keys.
pub fn kernel_spec_from(cfg: &FlatConfig) -> Result<KernelSpec> {
    if let Some(k) = cfg.keys().find(|k| !KERNEL_KEYS.contains(k)) {
        return Err(Error::Config(format!("unknown kernel key `{k}`")));
    }
    kernel_from(cfg, "")
}

pub fn parse_kernel_spec(text: &str) -> Result<KernelSpec> {
    kernel_spec_from(&FlatConfig::parse(text)?)
}

pub fn load_kernel_spec(path: &Path) -> Result<KernelSpec> {
    kernel_spec_from(&FlatConfig::load(path)?)
}

/// Flat config text describing `spec`; parses back to the same spec.
pub fn kernel_spec_to_config(spec: &KernelSpec) -> String {
    let mut out = String::new();
    match spec.base {
        BaseKernel::Linear => out.push_str("base.kind = linear\n"),
        BaseKernel::Polynomial { degree, offset } => {
            out.push_str(&format!("base.kind = polynomial\nbase.degree = {degree}\nbase.offset = {offset:?}\n"))
        }
        BaseKernel::Gaussian { gamma } => out.push_str(&format!("base.kind = gaussian\nbase.gamma = {gamma:?}\n")),
    }
    let construction = match spec.construction {
        Construction::Kronecker => "kronecker",
        Construction::Pointwise => "pointwise",
    };
    out.push_str(&format!(
        "construction = {construction}\ntransform = {}\nscale = {:?}\n",
        spec.transform.name(),
        spec.scale
    ));
    out
}

const SUITE_KEYS: [&str; 13] = [
    "seed",
    "trials",
    "sizes",
    "dims",
    "reg_grid",
    "bias_reg_grid",
    "jitter_gamma",
    "fault.gram_delta",
    "approx.enabled",
    "approx.gamma",
    "approx.sizes",
    "approx.dim",
    "approx.reg",
];

/// Suite config over the defaults; only keys present in the file change.
pub fn suite_config_from(cfg: &FlatConfig) -> Result<SuiteConfig> {
    let mut out = SuiteConfig::default();
    let known_tol = default_tolerances();
    let mut spec_indices = std::collections::BTreeSet::new();
    for key in cfg.keys() {
        if SUITE_KEYS.contains(&key) {
            continue;
        }
        if let Some(name) = key.strip_prefix("tolerance.") {
            if !known_tol.contains_key(name) {
                return Err(Error::Config(format!("unknown tolerance `{name}`")));
            }
            continue;
        }
        if let Some(rest) = key.strip_prefix("spec.") {
            let (idx, field) = rest.split_once('.').unwrap_or((rest, ""));
            let idx: usize = idx.parse().map_err(|_| Error::Config(format!("bad spec index in `{key}`")))?;
            if !KERNEL_KEYS.contains(&field) {
                return Err(Error::Config(format!("unknown kernel key `{field}` in `{key}`")));
            }
            spec_indices.insert(idx);
            continue;
        }
        return Err(Error::Config(format!("unknown suite key `{key}`")));
    }

    if let Some(v) = cfg.parsed("seed")? {
        out.master_seed = v;
    }
    if let Some(v) = cfg.parsed("trials")? {
        out.trials = v;
    }
    if let Some(v) = cfg.list("sizes")? {
        out.sizes = v;
    }
    if let Some(v) = cfg.list("dims")? {
        out.dims = v;
    }
    if let Some(v) = cfg.list("reg_grid")? {
        out.reg_grid = v;
    }
    if let Some(v) = cfg.list("bias_reg_grid")? {
        out.bias_reg_grid = v;
    }
    if let Some(v) = cfg.parsed("jitter_gamma")? {
        out.jitter_gamma = v;
    }
    if let Some(v) = cfg.parsed("fault.gram_delta")? {
        out.gram_fault = v;
    }
    if let Some(v) = cfg.parsed("approx.enabled")? {
        out.approximation.enabled = v;
    }
    if let Some(v) = cfg.parsed("approx.gamma")? {
        out.approximation.gamma = v;
    }
    if let Some(v) = cfg.list("approx.sizes")? {
        out.approximation.sizes = v;
    }
    if let Some(v) = cfg.parsed("approx.dim")? {
        out.approximation.decay.dim = v;
    }
    if let Some(v) = cfg.parsed("approx.reg")? {
        out.approximation.decay.reg = v;
    }
    for name in known_tol.keys() {
        if let Some(v) = cfg.parsed(&format!("tolerance.{name}"))? {
            out.tolerances.insert(name.clone(), v);
        }
    }
    if !spec_indices.is_empty() {
        out.specs = spec_indices
            .iter()
            .map(|i| kernel_from(cfg, &format!("spec.{i}.")))
            .collect::<Result<_>>()?;
    }
    out.validate()?;
    Ok(out)
}

pub fn parse_suite_config(text: &str) -> Result<SuiteConfig> {
    suite_config_from(&FlatConfig::parse(text)?)
}

pub fn load_suite_config(path: &Path) -> Result<SuiteConfig> {
    suite_config_from(&FlatConfig::load(path)?)
}
