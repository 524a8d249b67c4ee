//! Textual and JSON manifold specifications.
//!
//! The text form is `kind:key=value,...`, for example `sphere:n=2,r=1.0`,
//! `torus:n=2`, `hyperbolic:n=2,c=1.0`, `ellipsoid:a=1,b=1,c=2` or
//! `sphereprod:p=2,q=2,r1=1,r2=1`. The JSON form is the same object with a
//! `kind` tag: `{"kind": "sphere", "n": 2, "r": 1.0}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Manifold, DEFAULT_TORUS_PERIOD};
use crate::error::{Error, Result};

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Sphere {
        #[serde(default = "two")]
        n: usize,
        #[serde(default = "one")]
        r: f64,
    },
    Torus {
        #[serde(default = "two")]
        n: usize,
        /// Common period of every coordinate; defaults to `2 pi`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Hyperbolic {
        #[serde(default = "two")]
        n: usize,
        #[serde(default = "one")]
        c: f64,
    },
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    Sphereprod {
        p: usize,
        q: usize,
        #[serde(default = "one")]
        r1: f64,
        #[serde(default = "one")]
        r2: f64,
    },
}

impl ModelSpec {
    /// Parses either the text form or a JSON document.
    pub fn parse(input: &str) -> Result<Self> {
        input.parse()
    }

    pub fn build(&self) -> Result<Manifold> {
        match *self {
            ModelSpec::Sphere { n, r } => Manifold::round_sphere(n, r),
            ModelSpec::Torus { n, period } => {
                Manifold::flat_torus(vec![period.unwrap_or(DEFAULT_TORUS_PERIOD); n])
            }
            ModelSpec::Hyperbolic { n, c } => Manifold::hyperbolic(n, c),
            ModelSpec::Ellipsoid { a, b, c } => Manifold::ellipsoid(a, b, c),
            ModelSpec::Sphereprod { p, q, r1, r2 } => Manifold::sphere_product(p, q, r1, r2),
        }
    }
}

fn scalar(raw: &str) -> Result<Value> {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<u64>() {
        return Ok(Value::from(i));
    }
    raw.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .map(Value::from)
        .ok_or_else(|| Error::Parse(format!("`{raw}` is not a number")))
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let input = input.trim();
        if input.starts_with('{') {
            return serde_json::from_str(input).map_err(|e| Error::Parse(e.to_string()));
        }
        let (kind, rest) = input.split_once(':').unwrap_or((input, ""));
        let mut map = Map::new();
        map.insert("kind".into(), Value::from(kind.trim()));
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{pair}`")))?;
            if map.insert(key.trim().into(), scalar(val)?).is_some() {
                return Err(Error::Parse(format!("duplicate key `{}`", key.trim())));
            }
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Sphere { n, r } => write!(f, "sphere:n={n},r={r:?}"),
            ModelSpec::Torus { n, period: None } => write!(f, "torus:n={n}"),
            ModelSpec::Torus { n, period: Some(p) } => write!(f, "torus:n={n},period={p:?}"),
            ModelSpec::Hyperbolic { n, c } => write!(f, "hyperbolic:n={n},c={c:?}"),
            ModelSpec::Ellipsoid { a, b, c } => write!(f, "ellipsoid:a={a:?},b={b:?},c={c:?}"),
            ModelSpec::Sphereprod { p, q, r1, r2 } => write!(f, "sphereprod:p={p},q={q},r1={r1:?},r2={r2:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_documented_form() {
        assert_eq!("sphere:n=2,r=1.0".parse::<ModelSpec>().unwrap(), ModelSpec::Sphere { n: 2, r: 1.0 });
        assert_eq!("torus:n=2".parse::<ModelSpec>().unwrap(), ModelSpec::Torus { n: 2, period: None });
        assert_eq!(
            "hyperbolic:n=2,c=1.0".parse::<ModelSpec>().unwrap(),
            ModelSpec::Hyperbolic { n: 2, c: 1.0 }
        );
        assert_eq!(
            "ellipsoid:a=1,b=1,c=2".parse::<ModelSpec>().unwrap(),
            ModelSpec::Ellipsoid { a: 1.0, b: 1.0, c: 2.0 }
        );
        assert_eq!(
            "sphereprod:p=2,q=2,r1=1,r2=1".parse::<ModelSpec>().unwrap(),
            ModelSpec::Sphereprod { p: 2, q: 2, r1: 1.0, r2: 1.0 }
        );
    }

    #[test]
    fn json_and_text_agree() {
        let json: ModelSpec = r#"{"kind": "ellipsoid", "a": 1, "b": 1.5, "c": 2}"#.parse().unwrap();
        assert_eq!(json, "ellipsoid:a=1,b=1.5,c=2".parse().unwrap());
    }

    #[test]
    fn display_round_trips() {
        for text in ["sphere:n=4,r=2.5", "torus:n=3", "torus:n=2,period=1.5", "sphereprod:p=2,q=3,r1=1,r2=0.5"] {
            let spec: ModelSpec = text.parse().unwrap();
            assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["cube:n=2", "sphere:n=two", "sphere:n", "sphere:n=2,n=3", "sphere:radius=1", "ellipsoid:a=1"] {
            assert!(bad.parse::<ModelSpec>().is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn builds_models() {
        assert_eq!("sphere:n=4".parse::<ModelSpec>().unwrap().build().unwrap().dim(), 4);
        assert!("sphere:n=1".parse::<ModelSpec>().unwrap().build().is_err());
        assert_eq!("sphereprod:p=2,q=3".parse::<ModelSpec>().unwrap().build().unwrap().dim(), 5);
    }
}
