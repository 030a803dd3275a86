//! Flat `key = value` run configuration with dotted sections and strict
//! parsing: unknown or duplicate keys are rejected by name, and the
//! either/or pairs (eta vs xi, lambda vs gamma, csv vs teacher data) must be
//! given exactly one way.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::activation::Activation;
use crate::error::{Result, SgnError};
use crate::loss::Loss;
use crate::optimizer::{Hyperparams, TrainOptions, UpdateStyle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// Mirrored zero-output initialization (depth-1 networks only).
    Symmetric,
    /// Independent standard normal entries.
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Constant,
    Anchored,
    Zero,
}

#[derive(Clone, Debug)]
pub struct NetworkSection {
    pub depth: usize,
    pub width: usize,
    pub input_dim: usize,
    pub activation: Activation,
    pub init: InitKind,
}

/// Step size given directly or through xi = eta/alpha.
#[derive(Clone, Copy, Debug)]
pub enum EtaSpec {
    Eta(f64),
    Xi(f64),
}

/// Damping given directly or through gamma = lambda/(alpha Lip_phi^2 B).
#[derive(Clone, Copy, Debug)]
pub enum LambdaSpec {
    Lambda(f64),
    Gamma(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct HyperSection {
    pub eta: EtaSpec,
    pub lambda: LambdaSpec,
    pub alpha: f64,
    pub batch: usize,
    pub k_max: usize,
    pub radius: f64,
}

impl HyperSection {
    /// Concrete hyperparameters once the geometry (hence Lip_phi) is known;
    /// gamma and xi resolve through their defining ratios.
    pub fn resolve(&self, lip_phi: f64) -> Hyperparams {
        let eta = match self.eta {
            EtaSpec::Eta(e) => e,
            EtaSpec::Xi(xi) => xi * self.alpha,
        };
        let lambda = match self.lambda {
            LambdaSpec::Lambda(l) => l,
            LambdaSpec::Gamma(g) => g * self.alpha * lip_phi * lip_phi * self.batch as f64,
        };
        Hyperparams {
            eta,
            alpha: self.alpha,
            lambda,
            batch: self.batch,
            radius: self.radius,
            k_max: self.k_max,
        }
    }

    /// Variant with the damping overridden (used by sweep runs).
    pub fn resolve_with_lambda(&self, lip_phi: f64, lambda: f64) -> Hyperparams {
        let mut h = self.resolve(lip_phi);
        h.lambda = lambda;
        h
    }
}

#[derive(Clone, Debug)]
pub struct TeacherSpec {
    pub v_c_bar: f64,
    pub v_w_bar: f64,
    pub n: usize,
    pub map: MapKind,
    pub m_features: usize,
    pub heldout: usize,
}

#[derive(Clone, Debug)]
pub enum DataSpec {
    Csv { path: PathBuf },
    Teacher(TeacherSpec),
}

#[derive(Clone, Debug)]
pub struct StabilitySection {
    pub j_star: usize,
    pub replacement_seed: u64,
    pub lambda_sweep: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TelemetrySection {
    pub lambda_min_stride: usize,
    pub update_style: UpdateStyle,
    pub track_gram_mean: bool,
}

impl TelemetrySection {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            update_style: self.update_style,
            lambda_min_stride: self.lambda_min_stride,
            track_gram_mean: self.track_gram_mean,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub network: NetworkSection,
    pub loss: Loss,
    pub hyper: HyperSection,
    pub data: DataSpec,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub stability: Option<StabilitySection>,
    pub telemetry: TelemetrySection,
    /// Horizon for the bounds command; defaults to hyper.k_max.
    pub bounds_k: Option<usize>,
    pub mu0_probes: usize,
}

struct KeyBag {
    map: BTreeMap<String, String>,
}

impl KeyBag {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SgnError::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(SgnError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(SgnError::Config(format!("duplicate key '{key}'")));
            }
        }
        Ok(KeyBag { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| SgnError::Config(format!("key '{key}': '{v}' is not a number")))
            })
            .transpose()
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    SgnError::Config(format!("key '{key}': '{v}' is not a nonnegative integer"))
                })
            })
            .transpose()
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.take(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    SgnError::Config(format!("key '{key}': '{v}' is not a nonnegative integer"))
                })
            })
            .transpose()
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|v| match v.as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                other => Err(SgnError::Config(format!(
                    "key '{key}': '{other}' is not a boolean"
                ))),
            })
            .transpose()
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?
            .ok_or_else(|| SgnError::Config(format!("missing required key '{key}'")))
    }

    fn require_usize(&mut self, key: &str) -> Result<usize> {
        self.take_usize(key)?
            .ok_or_else(|| SgnError::Config(format!("missing required key '{key}'")))
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(SgnError::Config(format!("unknown key '{key}'")));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn parse_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SgnError::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut bag = KeyBag::parse(text)?;

        let network = {
            let depth = bag.require_usize("network.depth")?;
            let width = bag.require_usize("network.width")?;
            let input_dim = bag.require_usize("network.input_dim")?;
            let activation = Activation::parse(
                &bag.take("network.activation")
                    .ok_or_else(|| SgnError::Config("missing required key 'network.activation'".into()))?,
            )?;
            let init = match bag.take("network.init").as_deref() {
                None | Some("symmetric") => InitKind::Symmetric,
                Some("normal") => InitKind::Normal,
                Some(other) => {
                    return Err(SgnError::Config(format!(
                        "key 'network.init': unknown value '{other}' (expected symmetric or normal)"
                    )))
                }
            };
            NetworkSection {
                depth,
                width,
                input_dim,
                activation,
                init,
            }
        };

        let loss = {
            let name = bag
                .take("loss.name")
                .ok_or_else(|| SgnError::Config("missing required key 'loss.name'".into()))?;
            let reg = bag.take_f64("loss.reg")?;
            Loss::parse(&name, reg)?
        };

        let hyper = {
            let eta = bag.take_f64("hyper.eta")?;
            let xi = bag.take_f64("hyper.xi")?;
            let eta = match (eta, xi) {
                (Some(e), None) => EtaSpec::Eta(e),
                (None, Some(x)) => EtaSpec::Xi(x),
                (Some(_), Some(_)) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'hyper.eta' and 'hyper.xi', not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'hyper.eta' and 'hyper.xi'".into(),
                    ))
                }
            };
            let lambda = bag.take_f64("hyper.lambda")?;
            let gamma = bag.take_f64("hyper.gamma")?;
            let lambda = match (lambda, gamma) {
                (Some(l), None) => LambdaSpec::Lambda(l),
                (None, Some(g)) => LambdaSpec::Gamma(g),
                (Some(_), Some(_)) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'hyper.lambda' and 'hyper.gamma', not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'hyper.lambda' and 'hyper.gamma'".into(),
                    ))
                }
            };
            HyperSection {
                eta,
                lambda,
                alpha: bag.require_f64("hyper.alpha")?,
                batch: bag.require_usize("hyper.batch")?,
                k_max: bag.require_usize("hyper.k_max")?,
                radius: bag.require_f64("hyper.radius")?,
            }
        };

        let data = {
            let path = bag.take("data.path");
            let teacher_n = bag.take_usize("data.teacher.n")?;
            match (path, teacher_n) {
                (Some(p), None) => DataSpec::Csv {
                    path: PathBuf::from(p),
                },
                (None, Some(n)) => {
                    let noise = bag.take_f64("data.teacher.noise")?.unwrap_or(0.0);
                    if noise != 0.0 {
                        return Err(SgnError::Config(
                            "key 'data.teacher.noise': only noiseless teachers (0) are supported"
                                .into(),
                        ));
                    }
                    let map = match bag.take("data.teacher.map").as_deref() {
                        None | Some("constant") => MapKind::Constant,
                        Some("anchored") => MapKind::Anchored,
                        Some("zero") => MapKind::Zero,
                        Some(other) => {
                            return Err(SgnError::Config(format!(
                                "key 'data.teacher.map': unknown value '{other}'"
                            )))
                        }
                    };
                    DataSpec::Teacher(TeacherSpec {
                        v_c_bar: bag.require_f64("data.teacher.v_c_bar")?,
                        v_w_bar: bag.require_f64("data.teacher.v_w_bar")?,
                        n,
                        map,
                        m_features: bag
                            .take_usize("data.teacher.m_features")?
                            .unwrap_or(crate::teacher::DEFAULT_TEACHER_FEATURES),
                        heldout: bag.take_usize("data.teacher.heldout")?.unwrap_or(0),
                    })
                }
                (Some(_), Some(_)) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'data.path' and 'data.teacher.*'".into(),
                    ))
                }
                (None, None) => {
                    return Err(SgnError::Config(
                        "give exactly one of 'data.path' and 'data.teacher.n'".into(),
                    ))
                }
            }
        };

        let seeds = {
            let raw = bag
                .take("seeds")
                .ok_or_else(|| SgnError::Config("missing required key 'seeds'".into()))?;
            let seeds: Vec<u64> = raw
                .split(',')
                .map(|s| {
                    s.trim().parse::<u64>().map_err(|_| {
                        SgnError::Config(format!("key 'seeds': '{s}' is not an integer"))
                    })
                })
                .collect::<Result<_>>()?;
            if seeds.is_empty() {
                return Err(SgnError::Config("key 'seeds': need at least one seed".into()));
            }
            seeds
        };

        let out_dir = bag.take("out_dir").map(PathBuf::from);

        let stability = match bag.take_usize("stability.j_star")? {
            Some(j_star) => {
                let replacement_seed = bag.take_u64("stability.replacement_seed")?.unwrap_or(
                    0xF00D ^ j_star as u64,
                );
                let lambda_sweep = match bag.take("stability.lambda_sweep") {
                    Some(raw) => raw
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<f64>().map_err(|_| {
                                SgnError::Config(format!(
                                    "key 'stability.lambda_sweep': '{s}' is not a number"
                                ))
                            })
                        })
                        .collect::<Result<_>>()?,
                    None => Vec::new(),
                };
                Some(StabilitySection {
                    j_star,
                    replacement_seed,
                    lambda_sweep,
                })
            }
            None => None,
        };

        let telemetry = TelemetrySection {
            lambda_min_stride: bag.take_usize("telemetry.lambda_min_stride")?.unwrap_or(1),
            update_style: match bag.take("telemetry.update_style").as_deref() {
                None | Some("rowwise") => UpdateStyle::RowWise,
                Some("blocked") => UpdateStyle::Blocked,
                Some(other) => {
                    return Err(SgnError::Config(format!(
                        "key 'telemetry.update_style': unknown value '{other}'"
                    )))
                }
            },
            track_gram_mean: bag.take_bool("telemetry.track_gram_mean")?.unwrap_or(false),
        };

        let bounds_k = bag.take_usize("bounds.k")?;
        let mu0_probes = bag.take_usize("bounds.mu0_probes")?.unwrap_or(50);

        bag.finish()?;

        Ok(RunConfig {
            network,
            loss,
            hyper,
            data,
            seeds,
            out_dir,
            stability,
            telemetry,
            bounds_k,
            mu0_probes,
        })
    }
}
