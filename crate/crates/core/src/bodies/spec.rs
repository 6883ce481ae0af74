//! JSON body specifications.
//!
//! ```json
//! {"type": "lp-ball", "dim": 3, "p": 1.5}
//! {"type": "h-polytope", "dim": 2, "facets": [{"normal": [1, 0], "offset": 1}, [-1, 0, 1], ...]}
//! {"type": "intersection-body", "of": {"type": "lp-ball", "dim": 3, "p": 4}, "level": 32}
//! ```

use serde::Serialize;
use serde_json::{Map, Value};

use super::{Ellipsoid, HPolytope, StarBody};
use crate::error::{Error, Result};
use crate::sphere::{GridSpec, MAX_PRODUCT_DIM};

/// One halfspace `⟨normal, x⟩ <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

pub const DEFAULT_IB_LEVEL: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BodySpec {
    Ball { dim: usize, radius: f64 },
    LpBall { dim: usize, p: f64 },
    Cube { dim: usize, halfwidth: f64 },
    CrossPolytope { dim: usize },
    Ellipsoid { dim: usize, matrix: Vec<f64> },
    HPolytope { dim: usize, facets: Vec<Facet> },
    IntersectionBody { of: Box<BodySpec>, level: usize },
    Scaled { factor: f64, of: Box<BodySpec> },
    Rotated { matrix: Vec<f64>, of: Box<BodySpec> },
}

const TYPES: &str = "ball, lp-ball, cube, cross-polytope, ellipsoid, h-polytope, intersection-body, scaled, rotated";

struct Fields<'a> {
    path: String,
    ty: &'a str,
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn name(&self, field: &str) -> String {
        if self.path.is_empty() {
            field.to_string()
        } else {
            format!("{}.{field}", self.path)
        }
    }

    fn allow(&self, allowed: &[&str]) -> Result<()> {
        for key in self.obj.keys() {
            if key != "type" && !allowed.contains(&key.as_str()) {
                return Err(Error::data(format!(
                    "body spec: unknown field \"{}\" for type \"{}\"",
                    self.name(key),
                    self.ty
                )));
            }
        }
        Ok(())
    }

    fn required(&self, field: &str) -> Result<&'a Value> {
        self.obj.get(field).ok_or_else(|| {
            Error::data(format!("body spec: missing field \"{}\" required for type \"{}\"", self.name(field), self.ty))
        })
    }

    fn number(&self, field: &str) -> Result<f64> {
        number(self.required(field)?, &self.name(field))
    }

    fn number_or(&self, field: &str, default: f64) -> Result<f64> {
        self.obj.get(field).map_or(Ok(default), |v| number(v, &self.name(field)))
    }

    fn dim(&self) -> Result<usize> {
        let v = self.required("dim")?;
        let n = v.as_u64().ok_or_else(|| {
            Error::data(format!("body spec: field \"{}\" must be a positive integer", self.name("dim")))
        })?;
        if n < 2 {
            return Err(Error::data(format!("body spec: field \"{}\" must be at least 2, got {n}", self.name("dim"))));
        }
        Ok(n as usize)
    }

    fn numbers(&self, field: &str) -> Result<Vec<f64>> {
        numbers(self.required(field)?, &self.name(field))
    }

    fn nested(&self, field: &str) -> Result<BodySpec> {
        BodySpec::from_value(self.required(field)?, &self.name(field))
    }
}

fn number(v: &Value, name: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::data(format!("body spec: field \"{name}\" must be a finite number")))
}

fn numbers(v: &Value, name: &str) -> Result<Vec<f64>> {
    let arr =
        v.as_array().ok_or_else(|| Error::data(format!("body spec: field \"{name}\" must be an array of numbers")))?;
    arr.iter().enumerate().map(|(i, x)| number(x, &format!("{name}[{i}]"))).collect()
}

fn facet(v: &Value, dim: usize, name: &str) -> Result<Facet> {
    match v {
        Value::Array(_) => {
            let mut vals = numbers(v, name)?;
            if vals.len() != dim + 1 {
                return Err(Error::data(format!(
                    "body spec: field \"{name}\" must hold {} numbers (normal then offset), got {}",
                    dim + 1,
                    vals.len()
                )));
            }
            let offset = vals.pop().unwrap();
            Ok(Facet { normal: vals, offset })
        }
        Value::Object(obj) => {
            let f = Fields { path: name.to_string(), ty: "facet", obj };
            f.allow(&["normal", "offset"])?;
            Ok(Facet { normal: f.numbers("normal")?, offset: f.number("offset")? })
        }
        _ => Err(Error::data(format!("body spec: field \"{name}\" must be an object or an array"))),
    }
}

impl BodySpec {
    /// Parses JSON text; syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::data(format!("body spec: malformed JSON: {e}")))?;
        Self::from_value(&value, "")
    }

    pub fn from_value(value: &Value, path: &str) -> Result<Self> {
        let obj =
            value.as_object().ok_or_else(|| Error::data(format!("body spec{}: expected a JSON object", at(path))))?;
        let ty = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::data(format!("body spec{}: missing string field \"type\"", at(path))))?;
        let f = Fields { path: path.to_string(), ty, obj };
        let spec = match ty {
            "ball" => {
                f.allow(&["dim", "radius"])?;
                BodySpec::Ball { dim: f.dim()?, radius: f.number_or("radius", 1.0)? }
            }
            "lp-ball" => {
                f.allow(&["dim", "p"])?;
                BodySpec::LpBall { dim: f.dim()?, p: f.number("p")? }
            }
            "cube" => {
                f.allow(&["dim", "halfwidth"])?;
                BodySpec::Cube { dim: f.dim()?, halfwidth: f.number_or("halfwidth", 1.0)? }
            }
            "cross-polytope" => {
                f.allow(&["dim"])?;
                BodySpec::CrossPolytope { dim: f.dim()? }
            }
            "ellipsoid" => {
                f.allow(&["dim", "matrix"])?;
                let dim = f.dim()?;
                let matrix = f.numbers("matrix")?;
                if matrix.len() != dim * dim {
                    return Err(Error::data(format!(
                        "body spec: field \"{}\" must hold {} entries (row-major {dim}x{dim}), got {}",
                        f.name("matrix"),
                        dim * dim,
                        matrix.len()
                    )));
                }
                BodySpec::Ellipsoid { dim, matrix }
            }
            "h-polytope" => {
                f.allow(&["dim", "facets"])?;
                let dim = f.dim()?;
                let name = f.name("facets");
                let arr = f
                    .required("facets")?
                    .as_array()
                    .ok_or_else(|| Error::data(format!("body spec: field \"{name}\" must be an array")))?;
                let facets = arr
                    .iter()
                    .enumerate()
                    .map(|(i, v)| facet(v, dim, &format!("{name}[{i}]")))
                    .collect::<Result<_>>()?;
                BodySpec::HPolytope { dim, facets }
            }
            "intersection-body" => {
                f.allow(&["of", "level"])?;
                let level = match obj.get("level") {
                    None => DEFAULT_IB_LEVEL,
                    Some(v) => v.as_u64().ok_or_else(|| {
                        Error::data(format!("body spec: field \"{}\" must be a positive integer", f.name("level")))
                    })? as usize,
                };
                BodySpec::IntersectionBody { of: Box::new(f.nested("of")?), level }
            }
            "scaled" => {
                f.allow(&["of", "factor"])?;
                BodySpec::Scaled { factor: f.number("factor")?, of: Box::new(f.nested("of")?) }
            }
            "rotated" => {
                f.allow(&["of", "matrix"])?;
                BodySpec::Rotated { matrix: f.numbers("matrix")?, of: Box::new(f.nested("of")?) }
            }
            other => {
                return Err(Error::data(format!(
                    "body spec{}: unknown body type \"{other}\" (expected one of: {TYPES})",
                    at(path)
                )))
            }
        };
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        match self {
            BodySpec::Ball { dim, .. }
            | BodySpec::LpBall { dim, .. }
            | BodySpec::Cube { dim, .. }
            | BodySpec::CrossPolytope { dim }
            | BodySpec::Ellipsoid { dim, .. }
            | BodySpec::HPolytope { dim, .. } => *dim,
            BodySpec::IntersectionBody { of, .. } | BodySpec::Scaled { of, .. } | BodySpec::Rotated { of, .. } => {
                of.dim()
            }
        }
    }

    /// Builds the body, validating every geometric constraint.
    pub fn build(&self) -> Result<StarBody> {
        match self {
            BodySpec::Ball { dim, radius } => StarBody::ball(*dim, *radius),
            BodySpec::LpBall { dim, p } => StarBody::lp_ball(*dim, *p),
            BodySpec::Cube { dim, halfwidth } => StarBody::cube(*dim, *halfwidth),
            BodySpec::CrossPolytope { dim } => StarBody::cross_polytope(*dim),
            BodySpec::Ellipsoid { dim, matrix } => StarBody::ellipsoid(Ellipsoid::from_row_major(*dim, matrix)?),
            BodySpec::HPolytope { dim, facets } => StarBody::h_polytope(HPolytope::new(*dim, facets.clone())?),
            BodySpec::IntersectionBody { of, level } => {
                let source = of.build()?;
                let spec = if source.dim() <= MAX_PRODUCT_DIM {
                    GridSpec::gauss(*level)
                } else {
                    GridSpec::monte_carlo(*level, 0)
                };
                super::intersection_body_of(&source, spec)
            }
            BodySpec::Scaled { factor, of } => of.build()?.scaled(*factor),
            BodySpec::Rotated { matrix, of } => {
                let inner = of.build()?;
                let n = inner.dim();
                if matrix.len() != n * n {
                    return Err(Error::data(format!("body spec: rotation matrix needs {} entries", n * n)));
                }
                inner.rotated(nalgebra::DMatrix::from_row_slice(n, n, matrix))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

fn at(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!(" at \"{path}\"")
    }
}

impl StarBody {
    pub fn from_json(text: &str) -> Result<Self> {
        BodySpec::parse(text)?.build()
    }

    /// The JSON specification this body round-trips through, when it has one.
    pub fn to_spec(&self) -> Option<BodySpec> {
        use super::BodyKind::*;
        let dim = self.dim;
        Some(match self.kind() {
            Ball { radius } => BodySpec::Ball { dim, radius: *radius },
            LpBall { p } => BodySpec::LpBall { dim, p: *p },
            Cube { halfwidth } => BodySpec::Cube { dim, halfwidth: *halfwidth },
            CrossPolytope => BodySpec::CrossPolytope { dim },
            Ellipsoid(e) => BodySpec::Ellipsoid { dim, matrix: e.row_major() },
            HPolytope(p) => BodySpec::HPolytope { dim, facets: p.facets().to_vec() },
            Intersection(ib) => {
                BodySpec::IntersectionBody { of: Box::new(ib.source().to_spec()?), level: ib.grid_spec().level }
            }
            Scaled { inner, factor } => BodySpec::Scaled { factor: *factor, of: Box::new(inner.to_spec()?) },
            Rotated { inner, rotation } => BodySpec::Rotated {
                matrix: rotation.transpose().iter().copied().collect(),
                of: Box::new(inner.to_spec()?),
            },
            Tabulated(_) | Custom { .. } => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_msg(text: &str) -> String {
        match BodySpec::parse(text) {
            Err(Error::Data(msg)) => msg,
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn parses_standard_bodies() {
        let b = StarBody::from_json(r#"{"type":"ball","dim":3}"#).unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(b.radial(&[1.0, 0.0, 0.0]), 1.0);
        let p = StarBody::from_json(r#"{"type":"lp-ball","dim":4,"p":1.5}"#).unwrap();
        assert_eq!(p.label(), "lp-ball(1.5)");
        let e = StarBody::from_json(r#"{"type":"ellipsoid","dim":2,"matrix":[1,0,0,4]}"#).unwrap();
        assert!((e.radial(&[0.0, 1.0]) - 0.5).abs() < 1e-15);
        let h = StarBody::from_json(
            r#"{"type":"h-polytope","dim":2,"facets":[[1,0,1],[-1,0,1],{"normal":[0,1],"offset":2},{"normal":[0,-1],"offset":2}]}"#,
        )
        .unwrap();
        assert!((h.radial(&[0.0, 1.0]) - 2.0).abs() < 1e-15);
        let ib =
            StarBody::from_json(r#"{"type":"intersection-body","of":{"type":"ball","dim":3},"level":16}"#).unwrap();
        assert!(ib.is_intersection_body());
    }

    #[test]
    fn missing_field_names_the_field() {
        let msg = data_msg(r#"{"type":"lp-ball","dim":3}"#);
        assert!(msg.contains("\"p\""), "{msg}");
        let nested = data_msg(r#"{"type":"scaled","factor":2,"of":{"type":"lp-ball","dim":3}}"#);
        assert!(nested.contains("\"of.p\""), "{nested}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let msg = data_msg("{\"type\":\"ball\",\n\"dim\":}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_unknown_type_and_fields() {
        assert!(data_msg(r#"{"type":"torus","dim":3}"#).contains("unknown body type"));
        assert!(data_msg(r#"{"type":"ball","dim":3,"radus":2}"#).contains("\"radus\""));
        assert!(data_msg(r#"{"type":"ball","dim":1}"#).contains("\"dim\""));
        assert!(data_msg(r#"{"type":"ellipsoid","dim":2,"matrix":[1,0,0]}"#).contains("\"matrix\""));
        assert!(data_msg(r#"{"type":"h-polytope","dim":2,"facets":[[1,0]]}"#).contains("facets[0]"));
    }

    #[test]
    fn geometric_validation_is_a_data_error() {
        assert!(matches!(
            StarBody::from_json(r#"{"type":"ellipsoid","dim":2,"matrix":[1,0,0,-1]}"#),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            StarBody::from_json(r#"{"type":"h-polytope","dim":2,"facets":[[1,0,1],[0,1,1]]}"#),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn spec_round_trips() {
        for text in [
            r#"{"type":"cube","dim":3,"halfwidth":0.5}"#,
            r#"{"type":"ellipsoid","dim":2,"matrix":[2.0,0.5,0.5,1.0]}"#,
            r#"{"type":"intersection-body","of":{"type":"lp-ball","dim":3,"p":4.0},"level":16}"#,
        ] {
            let spec = BodySpec::parse(text).unwrap();
            let body = spec.build().unwrap();
            assert_eq!(body.to_spec().unwrap(), spec);
            assert_eq!(BodySpec::parse(&spec.to_json()).unwrap(), spec);
        }
    }
}
