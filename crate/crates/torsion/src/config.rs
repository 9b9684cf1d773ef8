//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, unknown keys are hard errors.
//! Parsing keeps line numbers so every error points at its source line.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Radial,
    PhiTable,
    FemBall,
    FemStar,
    Classify,
    RigiditySweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Radial => "radial",
            ExperimentKind::PhiTable => "phi-table",
            ExperimentKind::FemBall => "fem-ball",
            ExperimentKind::FemStar => "fem-star",
            ExperimentKind::Classify => "classify",
            ExperimentKind::RigiditySweep => "rigidity-sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "radial" => Some(ExperimentKind::Radial),
            "phi-table" => Some(ExperimentKind::PhiTable),
            "fem-ball" => Some(ExperimentKind::FemBall),
            "fem-star" => Some(ExperimentKind::FemStar),
            "classify" => Some(ExperimentKind::Classify),
            "rigidity-sweep" => Some(ExperimentKind::RigiditySweep),
            _ => None,
        }
    }
}

/// Validated experiment description. Fields irrelevant to the kind stay at
/// their defaults and are rejected if explicitly set.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub profile: String,
    pub profile_param: Option<f64>,
    pub n: u32,
    pub p: f64,
    /// Ball radius (radial, fem-ball) or table extent (phi-table).
    pub r: f64,
    pub grid_size: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub domain_a0: f64,
    pub domain_cos: Vec<f64>,
    pub domain_sin: Vec<f64>,
    pub f_form: String,
    pub f_param: f64,
    pub f_param2: Option<f64>,
    pub sweep_radius: f64,
    pub sweep_mode: u32,
    pub sweep_lambdas: Vec<f64>,
    pub n_bins: usize,
    pub seed: Option<u64>,
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::ConfigParse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if let Some((prev_line, _)) = entries.insert(key.clone(), (line_no, value)) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("duplicate key `{key}` (first set at line {prev_line})"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::ConfigParse {
                line,
                message: format!(
                    "value `{v}` for key `{key}` is not a valid {}",
                    std::any::type_name::<T>()
                ),
            }),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::ConfigParse {
                        line,
                        message: format!("entry `{}` in list `{key}` is not a number", s.trim()),
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn reject_leftovers(&self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.iter().next() {
            return Err(Error::ConfigParse {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::ConfigInvalid(format!("missing required key `{key}`")))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;

    let kind_str = required(raw.take("kind"), "kind")?;
    let kind = ExperimentKind::parse(&kind_str).ok_or_else(|| {
        Error::ConfigInvalid(format!(
            "invalid kind `{kind_str}` (expected radial, phi-table, fem-ball, fem-star, \
             classify or rigidity-sweep)"
        ))
    })?;

    let profile = required(raw.take("profile"), "profile")?;
    let profile_param = raw.take_parsed::<f64>("profile_param")?;
    let n = raw.take_parsed::<u32>("n")?.unwrap_or(2);
    let p = required(raw.take_parsed::<f64>("p")?, "p")?;
    let r = raw.take_parsed::<f64>("r")?;
    let grid_size = raw.take_parsed::<usize>("grid_size")?;
    let n_r = raw.take_parsed::<usize>("n_r")?;
    let n_theta = raw.take_parsed::<usize>("n_theta")?;
    let domain_a0 = raw.take_parsed::<f64>("domain_a0")?;
    let domain_cos = raw.take_list("domain_cos")?;
    let domain_sin = raw.take_list("domain_sin")?;
    let f_form = raw.take("f_form");
    let f_param = raw.take_parsed::<f64>("f_param")?;
    let f_param2 = raw.take_parsed::<f64>("f_param2")?;
    let sweep_radius = raw.take_parsed::<f64>("sweep_radius")?;
    let sweep_mode = raw.take_parsed::<u32>("sweep_mode")?;
    let sweep_lambdas = raw.take_list("sweep_lambdas")?;
    let n_bins = raw.take_parsed::<usize>("n_bins")?;
    let seed = raw.take_parsed::<u64>("seed")?;
    raw.reject_leftovers()?;

    let reject_if = |set: bool, key: &str| -> Result<()> {
        if set {
            Err(Error::ConfigInvalid(format!(
                "key `{key}` does not apply to kind `{}`",
                kind.name()
            )))
        } else {
            Ok(())
        }
    };
    let needs_domain = matches!(kind, ExperimentKind::FemStar | ExperimentKind::Classify);
    let needs_mesh = matches!(
        kind,
        ExperimentKind::FemBall | ExperimentKind::FemStar | ExperimentKind::RigiditySweep
    );
    match kind {
        ExperimentKind::Radial | ExperimentKind::PhiTable => {
            reject_if(n_r.is_some() || n_theta.is_some(), "n_r/n_theta")?;
            reject_if(domain_a0.is_some(), "domain_a0")?;
        }
        ExperimentKind::FemBall => {
            reject_if(domain_a0.is_some(), "domain_a0")?;
        }
        _ => {}
    }
    if !needs_domain {
        reject_if(domain_cos.is_some() || domain_sin.is_some(), "domain_cos/domain_sin")?;
    }
    if kind != ExperimentKind::Classify {
        reject_if(
            f_form.is_some() || f_param.is_some() || f_param2.is_some(),
            "f_form/f_param",
        )?;
    }
    if kind != ExperimentKind::RigiditySweep {
        reject_if(sweep_radius.is_some(), "sweep_radius")?;
        reject_if(sweep_mode.is_some(), "sweep_mode")?;
        reject_if(sweep_lambdas.is_some(), "sweep_lambdas")?;
        reject_if(n_bins.is_some(), "n_bins")?;
    }

    let r_needed = matches!(
        kind,
        ExperimentKind::Radial | ExperimentKind::PhiTable | ExperimentKind::FemBall
    );
    let r = if r_needed {
        required(r, "r")?
    } else {
        reject_if(r.is_some(), "r")?;
        0.0
    };
    if r_needed && !(r > 0.0) {
        return Err(Error::ConfigInvalid(format!("`r` must be positive, got {r}")));
    }
    if !(p > 1.0) {
        return Err(Error::ConfigInvalid(format!("`p` must exceed 1, got {p}")));
    }
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("`n` must be at least 2, got {n}")));
    }
    if needs_mesh && n != 2 {
        return Err(Error::ConfigInvalid(format!(
            "kind `{}` meshes a 2-dimensional domain; `n` must be 2, got {n}",
            kind.name()
        )));
    }

    let domain_a0 = if needs_domain {
        required(domain_a0, "domain_a0")?
    } else {
        1.0
    };
    let (f_form, f_param) = if kind == ExperimentKind::Classify {
        (
            required(f_form, "f_form")?,
            required(f_param, "f_param")?,
        )
    } else {
        (String::new(), 0.0)
    };
    if kind == ExperimentKind::Classify
        && !matches!(f_form.as_str(), "const" | "linear" | "exp" | "power")
    {
        return Err(Error::ConfigInvalid(format!(
            "invalid f_form `{f_form}` (expected const, linear, exp or power)"
        )));
    }
    let (sweep_radius, sweep_mode) = if kind == ExperimentKind::RigiditySweep {
        (
            required(sweep_radius, "sweep_radius")?,
            required(sweep_mode, "sweep_mode")?,
        )
    } else {
        (0.0, 0)
    };
    let sweep_lambdas = sweep_lambdas.unwrap_or_else(|| vec![0.0, 0.1, 0.2, 0.3]);
    if kind == ExperimentKind::RigiditySweep {
        if !(sweep_radius > 0.0) {
            return Err(Error::ConfigInvalid("`sweep_radius` must be positive".into()));
        }
        if sweep_mode == 0 {
            return Err(Error::ConfigInvalid("`sweep_mode` must be at least 1".into()));
        }
        if sweep_lambdas.is_empty() || sweep_lambdas.iter().any(|&l| l < 0.0 || l >= 1.0) {
            return Err(Error::ConfigInvalid(
                "`sweep_lambdas` must be a nonempty list inside [0, 1)".into(),
            ));
        }
    }

    Ok(ExperimentConfig {
        kind,
        profile,
        profile_param,
        n,
        p,
        r,
        grid_size: grid_size.unwrap_or(match kind {
            ExperimentKind::PhiTable => 257,
            _ => crate::radial::DEFAULT_GRID_SIZE,
        }),
        n_r: n_r.unwrap_or(64),
        n_theta: n_theta.unwrap_or(128),
        domain_a0,
        domain_cos: domain_cos.unwrap_or_default(),
        domain_sin: domain_sin.unwrap_or_default(),
        f_form,
        f_param,
        f_param2,
        sweep_radius,
        sweep_mode,
        sweep_lambdas,
        n_bins: n_bins.unwrap_or(16),
        seed,
    })
}
