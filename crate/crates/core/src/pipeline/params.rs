use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value as Json};

use crate::Error;

/// The closed set of parameter kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Int,
    Float,
    Bool,
    String,
    StringList,
    FloatList,
    Path,
    Column,
}

impl ParamKind {
    pub const ALL: [ParamKind; 8] = [
        ParamKind::Int,
        ParamKind::Float,
        ParamKind::Bool,
        ParamKind::String,
        ParamKind::StringList,
        ParamKind::FloatList,
        ParamKind::Path,
        ParamKind::Column,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Int => "int",
            ParamKind::Float => "float",
            ParamKind::Bool => "bool",
            ParamKind::String => "string",
            ParamKind::StringList => "stringList",
            ParamKind::FloatList => "floatList",
            ParamKind::Path => "path",
            ParamKind::Column => "column",
        }
    }

    pub fn from_name(name: &str) -> Option<ParamKind> {
        ParamKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    String(String),
    StringList(Vec<String>),
    FloatList(Vec<f64>),
    Path(String),
    Column(String),
}

impl ParamValue {
    pub fn kind(&self) -> ParamKind {
        match self {
            ParamValue::Int(_) => ParamKind::Int,
            ParamValue::Float(_) => ParamKind::Float,
            ParamValue::Bool(_) => ParamKind::Bool,
            ParamValue::String(_) => ParamKind::String,
            ParamValue::StringList(_) => ParamKind::StringList,
            ParamValue::FloatList(_) => ParamKind::FloatList,
            ParamValue::Path(_) => ParamKind::Path,
            ParamValue::Column(_) => ParamKind::Column,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            ParamValue::Int(v) => json!(v),
            ParamValue::Float(v) => json!(v),
            ParamValue::Bool(v) => json!(v),
            ParamValue::String(v) | ParamValue::Path(v) | ParamValue::Column(v) => json!(v),
            ParamValue::StringList(v) => json!(v),
            ParamValue::FloatList(v) => json!(v),
        }
    }

    /// Reads a value of `kind`. Integral JSON numbers are accepted for
    /// floats; nothing else is coerced.
    pub fn from_json(kind: ParamKind, v: &Json) -> Option<ParamValue> {
        let float = |v: &Json| v.as_f64().filter(|x| x.is_finite());
        Some(match kind {
            ParamKind::Int => ParamValue::Int(v.as_i64()?),
            ParamKind::Float => ParamValue::Float(float(v)?),
            ParamKind::Bool => ParamValue::Bool(v.as_bool()?),
            ParamKind::String => ParamValue::String(v.as_str()?.to_string()),
            ParamKind::Path => ParamValue::Path(v.as_str()?.to_string()),
            ParamKind::Column => ParamValue::Column(v.as_str()?.to_string()),
            ParamKind::StringList => ParamValue::StringList(
                v.as_array()?
                    .iter()
                    .map(|s| s.as_str().map(str::to_string))
                    .collect::<Option<_>>()?,
            ),
            ParamKind::FloatList => {
                ParamValue::FloatList(v.as_array()?.iter().map(float).collect::<Option<_>>()?)
            }
        })
    }

    fn is_valid(&self) -> bool {
        match self {
            ParamValue::Float(x) => x.is_finite(),
            ParamValue::FloatList(xs) => xs.iter().all(|x| x.is_finite()),
            ParamValue::Column(c) => !c.is_empty(),
            _ => true,
        }
    }
}

/// One declared parameter of a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub default: Option<ParamValue>,
    pub doc: String,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind, doc: &str) -> ParamSpec {
        ParamSpec {
            name: name.to_string(),
            kind,
            default: None,
            doc: doc.to_string(),
        }
    }

    pub fn with_default(mut self, default: ParamValue) -> ParamSpec {
        self.default = Some(default);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageKind {
    Estimator,
    Transformer,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Estimator => "estimator",
            StageKind::Transformer => "transformer",
        }
    }

    pub fn from_name(name: &str) -> Option<StageKind> {
        match name {
            "estimator" => Some(StageKind::Estimator),
            "transformer" => Some(StageKind::Transformer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDescriptor {
    pub name: String,
    pub kind: StageKind,
    pub doc: String,
    pub params: Vec<ParamSpec>,
}

impl StageDescriptor {
    pub fn new(name: &str, kind: StageKind, doc: &str, params: Vec<ParamSpec>) -> StageDescriptor {
        StageDescriptor {
            name: name.to_string(),
            kind,
            doc: doc.to_string(),
            params,
        }
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Unique param names, defaults of the declared kind.
    pub fn validate(&self) -> Result<(), Error> {
        let mut seen = std::collections::HashSet::new();
        for p in &self.params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Invalid(format!(
                    "stage `{}` declares `{}` twice",
                    self.name, p.name
                )));
            }
            if let Some(d) = &p.default {
                if d.kind() != p.kind || !d.is_valid() {
                    return Err(Error::Invalid(format!(
                        "default of `{}.{}` is not a valid {}",
                        self.name, p.name, p.kind
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A complete, validated assignment of a stage's parameters: every declared
/// parameter has a value of its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMap {
    values: BTreeMap<String, ParamValue>,
}

impl ParamMap {
    /// Checks `given` against `desc` and fills in defaults.
    pub fn resolve(
        desc: &StageDescriptor,
        given: BTreeMap<String, ParamValue>,
    ) -> Result<ParamMap, Error> {
        for (name, value) in &given {
            let spec = desc.param(name).ok_or_else(|| Error::UnknownParam {
                stage: desc.name.clone(),
                param: name.clone(),
            })?;
            if value.kind() != spec.kind || !value.is_valid() {
                return Err(Error::ParamType {
                    param: name.clone(),
                    expected: spec.kind.to_string(),
                });
            }
        }
        let mut values = BTreeMap::new();
        for spec in &desc.params {
            let v = match given.get(&spec.name) {
                Some(v) => v.clone(),
                None => spec.default.clone().ok_or_else(|| Error::MissingParam {
                    stage: desc.name.clone(),
                    param: spec.name.clone(),
                })?,
            };
            values.insert(spec.name.clone(), v);
        }
        Ok(ParamMap { values })
    }

    /// Reads `{name: value}` JSON against `desc`.
    pub fn from_json(desc: &StageDescriptor, json: &Json) -> Result<ParamMap, Error> {
        let obj = match json {
            Json::Object(o) => o,
            Json::Null => return ParamMap::resolve(desc, BTreeMap::new()),
            _ => return Err(Error::Invalid("params must be an object".into())),
        };
        let mut given = BTreeMap::new();
        for (name, v) in obj {
            let spec = desc.param(name).ok_or_else(|| Error::UnknownParam {
                stage: desc.name.clone(),
                param: name.clone(),
            })?;
            let value = ParamValue::from_json(spec.kind, v).ok_or_else(|| Error::ParamType {
                param: name.clone(),
                expected: spec.kind.to_string(),
            })?;
            given.insert(name.clone(), value);
        }
        ParamMap::resolve(desc, given)
    }

    pub fn to_json(&self) -> Json {
        Json::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), v.to_json()))
                .collect(),
        )
    }

    pub fn values(&self) -> &BTreeMap<String, ParamValue> {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    fn typed<'a, T>(&'a self, name: &str, f: impl FnOnce(&'a ParamValue) -> Option<T>) -> T {
        self.values
            .get(name)
            .and_then(f)
            .unwrap_or_else(|| panic!("parameter `{name}` is not declared with this kind"))
    }

    // The typed getters panic on undeclared names: a ParamMap is always
    // resolved against its stage's descriptor, so that is a programming error.

    pub fn int(&self, name: &str) -> i64 {
        self.typed(name, |v| match v {
            ParamValue::Int(x) => Some(*x),
            _ => None,
        })
    }

    pub fn float(&self, name: &str) -> f64 {
        self.typed(name, |v| match v {
            ParamValue::Float(x) => Some(*x),
            _ => None,
        })
    }

    pub fn bool(&self, name: &str) -> bool {
        self.typed(name, |v| match v {
            ParamValue::Bool(x) => Some(*x),
            _ => None,
        })
    }

    /// Any of the string-valued kinds.
    pub fn str(&self, name: &str) -> &str {
        self.typed(name, |v| match v {
            ParamValue::String(s) | ParamValue::Path(s) | ParamValue::Column(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn strings(&self, name: &str) -> &[String] {
        self.typed(name, |v| match v {
            ParamValue::StringList(s) => Some(s.as_slice()),
            _ => None,
        })
    }

    pub fn floats(&self, name: &str) -> &[f64] {
        self.typed(name, |v| match v {
            ParamValue::FloatList(s) => Some(s.as_slice()),
            _ => None,
        })
    }
}
