//! TOML model files.
//!
//! ```toml
//! [meta]
//! name = "two_state_symmetric"
//! dimension = 1
//!
//! [chain]
//! kind = "generator"          # or "stochastic"
//! rows = [[-1.0, 1.0], [1.0, -1.0]]
//!
//! # stochastic chains only: one entry per positive transition, states 1-based
//! [[increments]]
//! from = 1
//! to = 2
//! law = { kind = "gaussian", mean = [1.0], cov = [[1.0]] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::markov::{Generator, StochasticMatrix};
use crate::model::{DiscreteMapModel, IncrementLaw, LocalTimeMapModel, MapModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Stochastic,
    Generator,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    name: String,
    dimension: usize,
    #[serde(default)]
    description: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    kind: ChainKind,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIncrement {
    from: usize,
    to: usize,
    law: IncrementLaw<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    meta: RawMeta,
    chain: RawChain,
    #[serde(default)]
    increments: Vec<RawIncrement>,
}

/// Model metadata carried into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMeta {
    pub name: String,
    pub kind: ChainKind,
    pub states: usize,
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// SHA-256 of the file contents.
    pub sha256: String,
}

/// A parsed model. `model` is centred; `drift` is the drift removed from it.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub meta: ModelMeta,
    pub model: MapModel<f64>,
    pub drift: Vec<f64>,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read model file: {e}")))?;
    parse_model(&text, &path.display().to_string())
}

/// Parses model text; `origin` prefixes every error location.
pub fn parse_model(text: &str, origin: &str) -> Result<LoadedModel> {
    let at = |loc: &str| format!("{origin}: {loc}");
    let raw: RawModel = toml::from_str(text).map_err(|e| Error::config(origin, e.to_string().trim_end()))?;
    if raw.meta.name.trim().is_empty() {
        return Err(Error::config(at("[meta] name"), "must not be empty"));
    }
    let n = raw.chain.rows.len();
    let wrap = |loc: String| move |e: Error| Error::config(loc, e.to_string());

    let model = match raw.chain.kind {
        ChainKind::Generator => {
            if !raw.increments.is_empty() {
                return Err(Error::config(at("[[increments]]"), "increment laws are only allowed for stochastic chains"));
            }
            let g = Generator::from_rows(&raw.chain.rows).map_err(wrap(at("[chain] rows")))?;
            let m = LocalTimeMapModel::new(g).map_err(wrap(at("[chain] rows")))?;
            if raw.meta.dimension != n - 1 {
                return Err(Error::config(
                    at("[meta] dimension"),
                    format!("a {n}-state generator has projected local times of dimension {}, not {}", n - 1, raw.meta.dimension),
                ));
            }
            MapModel::LocalTime(m)
        }
        ChainKind::Stochastic => {
            let p = StochasticMatrix::from_rows(&raw.chain.rows).map_err(wrap(at("[chain] rows")))?;
            let mut laws: Vec<Vec<Option<IncrementLaw<f64>>>> = vec![vec![None; n]; n];
            for (i, inc) in raw.increments.iter().enumerate() {
                let loc = at(&format!("increments[{}] (from {} to {})", i + 1, inc.from, inc.to));
                if !(1..=n).contains(&inc.from) || !(1..=n).contains(&inc.to) {
                    return Err(Error::config(loc, format!("states are numbered 1..={n}")));
                }
                let (k, l) = (inc.from - 1, inc.to - 1);
                if p.get(k, l) <= 0.0 {
                    return Err(Error::config(loc, "transition has zero probability"));
                }
                if laws[k][l].is_some() {
                    return Err(Error::config(loc, "duplicate law for this transition"));
                }
                inc.law.validate().map_err(wrap(loc.clone()))?;
                if inc.law.dim() != raw.meta.dimension {
                    return Err(Error::config(
                        loc,
                        format!("law has dimension {}, [meta] dimension is {}", inc.law.dim(), raw.meta.dimension),
                    ));
                }
                laws[k][l] = Some(inc.law.clone());
            }
            for k in 0..n {
                for l in 0..n {
                    if p.get(k, l) > 0.0 && laws[k][l].is_none() {
                        return Err(Error::config(
                            at("[[increments]]"),
                            format!("missing law for positive transition from {} to {}", k + 1, l + 1),
                        ));
                    }
                }
            }
            MapModel::Discrete(DiscreteMapModel::new(p, laws).map_err(wrap(at("[[increments]]")))?)
        }
    };

    let drift: Vec<f64> = match &model {
        MapModel::Discrete(m) => m.drift().iter().copied().collect(),
        MapModel::LocalTime(_) => vec![0.0; n - 1],
    };
    Ok(LoadedModel {
        meta: ModelMeta {
            name: raw.meta.name,
            kind: raw.chain.kind,
            states: n,
            dimension: raw.meta.dimension,
            description: raw.meta.description,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        },
        model: model.center(),
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYM: &str = r#"
[meta]
name = "sym"
dimension = 1

[chain]
kind = "generator"
rows = [[-1.0, 1.0], [1.0, -1.0]]
"#;

    #[test]
    fn generator_model() {
        let m = parse_model(SYM, "sym.toml").unwrap();
        assert_eq!(m.meta.states, 2);
        assert_eq!(m.meta.kind, ChainKind::Generator);
        assert!(matches!(m.model, MapModel::LocalTime(_)));
    }

    #[test]
    fn discrete_model_is_centred() {
        let text = r#"
[meta]
name = "shifted"
dimension = 1
[chain]
kind = "stochastic"
rows = [[0.5, 0.5], [0.5, 0.5]]
[[increments]]
from = 1
to = 1
law = { kind = "point_mass", at = [1.0] }
[[increments]]
from = 1
to = 2
law = { kind = "gaussian", mean = [2.0], cov = [[1.0]] }
[[increments]]
from = 2
to = 1
law = { kind = "point_mass", at = [1.0] }
[[increments]]
from = 2
to = 2
law = { kind = "uniform_box", lo = [1.0], hi = [3.0] }
"#;
        let m = parse_model(text, "x").unwrap();
        assert!((m.drift[0] - 1.5).abs() < 1e-14);
        let MapModel::Discrete(d) = &m.model else { panic!() };
        assert!(d.drift()[0].abs() < 1e-14);
    }

    fn location(text: &str) -> String {
        match parse_model(text, "m.toml") {
            Err(Error::Config { location, .. }) => location,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_location() {
        assert_eq!(location(&SYM.replace("dimension = 1", "dimension = 2")), "m.toml: [meta] dimension");
        assert_eq!(location(&SYM.replace("[1.0, -1.0]]", "[1.0, -2.0]]")), "m.toml: [chain] rows");
        let missing = r#"
[meta]
name = "m"
dimension = 1
[chain]
kind = "stochastic"
rows = [[0.5, 0.5], [0.5, 0.5]]
[[increments]]
from = 1
to = 3
law = { kind = "point_mass", at = [0.0] }
"#;
        assert_eq!(location(missing), "m.toml: increments[1] (from 1 to 3)");
        assert_eq!(location(&missing.replace("to = 3", "to = 2")), "m.toml: [[increments]]");
        assert_eq!(location("[meta]\nname = 3"), "m.toml");
    }
}
