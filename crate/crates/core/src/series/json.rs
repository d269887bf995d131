use serde_json::{json, Value};

use super::{families, Coeff, FrameSolution, TruncSeries};
use crate::error::{Error, Result};

impl<T: Coeff> TruncSeries<T> {
    /// `{vars, shape, degree, entries: [{multidegree, matrix}]}`.
    pub fn to_json(&self) -> Value {
        let (p, q) = self.shape();
        let entries: Vec<Value> = self
            .coeffs()
            .iter()
            .map(|(md, m)| {
                let rows: Vec<Value> = (0..p)
                    .map(|i| Value::Array((0..q).map(|j| m[i * q + j].to_json()).collect()))
                    .collect();
                json!({ "multidegree": md, "matrix": rows })
            })
            .collect();
        json!({
            "vars": self.vars(),
            "shape": [p, q],
            "degree": self.degree(),
            "entries": entries,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Format(format!("series is missing `{k}`")));
        let uint = |x: &Value, what: &str| {
            x.as_u64()
                .ok_or_else(|| Error::Format(format!("`{what}` must be a nonnegative integer")))
        };
        let n = uint(field("vars")?, "vars")? as usize;
        let shape = field("shape")?
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Format("`shape` must be [rows, cols]".into()))?;
        let (p, q) = (uint(&shape[0], "shape")? as usize, uint(&shape[1], "shape")? as usize);
        let degree = uint(field("degree")?, "degree")? as u32;
        let mut s = Self::zero(n, (p, q), degree);
        let entries = field("entries")?
            .as_array()
            .ok_or_else(|| Error::Format("`entries` must be a list".into()))?;
        for e in entries {
            let md = e
                .get("multidegree")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Format("entry is missing `multidegree`".into()))?
                .iter()
                .map(|x| uint(x, "multidegree").map(|k| k as u32))
                .collect::<Result<Vec<u32>>>()?;
            if md.len() != 2 * n {
                return Err(Error::Format(format!(
                    "multidegree {md:?} has length {}, expected {}",
                    md.len(),
                    2 * n
                )));
            }
            let rows = e
                .get("matrix")
                .and_then(Value::as_array)
                .filter(|r| r.len() == p)
                .ok_or_else(|| Error::Format(format!("entry {md:?} needs a {p}-row `matrix`")))?;
            let mut m = Vec::with_capacity(p * q);
            for row in rows {
                let row = row
                    .as_array()
                    .filter(|r| r.len() == q)
                    .ok_or_else(|| Error::Format(format!("entry {md:?} needs rows of length {q}")))?;
                for c in row {
                    m.push(T::from_json(c)?);
                }
            }
            s.insert(md, m);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct FrobeniusProblem<T: Coeff> {
    pub f: TruncSeries<T>,
    /// Relation matrices; derived from `f` when absent.
    pub a: Option<Vec<TruncSeries<T>>>,
}

pub const FAMILIES: &[&str] = &["exp_scalar", "holomorphic", "gauged_pair", "random_gauged"];

/// Reads `{degree?, f, A?}` or `{degree?, family: {name, vars?, rank?, seed?}}`.
pub fn problem_from_json<T: Coeff>(v: &Value, default_degree: u32) -> Result<FrobeniusProblem<T>> {
    let degree = match v.get("degree") {
        Some(d) => d
            .as_u64()
            .ok_or_else(|| Error::Format("`degree` must be a nonnegative integer".into()))? as u32,
        None => default_degree,
    };
    if degree < 1 {
        return Err(Error::Format("truncation degree must be at least 1".into()));
    }
    if let Some(fam) = v.get("family") {
        let name = fam
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format("`family.name` must be a string".into()))?;
        let get = |k: &str, dflt: u64| fam.get(k).and_then(Value::as_u64).unwrap_or(dflt);
        let (f, a) = match name {
            "exp_scalar" => families::exp_scalar(get("vars", 1) as usize, degree),
            "holomorphic" => families::holomorphic(degree),
            "gauged_pair" => families::gauged_pair(degree),
            "random_gauged" => families::random_gauged(
                get("vars", 2) as usize,
                get("rank", 2) as usize,
                degree,
                get("seed", 0),
            ),
            other => {
                return Err(Error::Unknown {
                    kind: "series family",
                    name: other.into(),
                    available: FAMILIES.join(", "),
                })
            }
        };
        return Ok(FrobeniusProblem { f, a: Some(a) });
    }
    let f = TruncSeries::from_json(v.get("f").ok_or_else(|| Error::Format("problem needs `f` or `family`".into()))?)?;
    let f = if v.get("degree").is_some() { f.truncate(degree) } else { f };
    let a = match v.get("A") {
        Some(Value::Array(list)) => Some(
            list.iter()
                .map(|x| TruncSeries::from_json(x).map(|s| s.with_degree(f.degree())))
                .collect::<Result<Vec<_>>>()?,
        ),
        Some(_) => return Err(Error::Format("`A` must be a list of series".into())),
        None => None,
    };
    Ok(FrobeniusProblem { f, a })
}

pub fn solution_to_json<T: Coeff>(sol: &FrameSolution<T>) -> Value {
    let residuals: Vec<Value> = sol
        .dbar_g
        .iter()
        .enumerate()
        .map(|(k, r)| {
            json!({
                "variable": k + 1,
                "max_abs": r.max_abs(),
                "identically_zero": r.is_zero(),
                "modulo_degree": r.degree(),
            })
        })
        .collect();
    json!({
        "mode": if T::EXACT { "exact" } else { "float" },
        "g": sol.g.to_json(),
        "B_total": sol.b_total.to_json(),
        "certificates": {
            "dbar_g": residuals,
            "exact": sol.is_exact(),
            "max_residual": sol.max_residual(),
            "stages": sol.stages,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Exact;
    use num_complex::Complex64 as C64;

    #[test]
    fn round_trip_exact_and_float() {
        let (f, _) = families::random_gauged::<Exact>(2, 2, 4, 7);
        let back = TruncSeries::<Exact>::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let ff: TruncSeries<C64> = f.map_coeffs();
        let back = TruncSeries::<C64>::from_json(&ff.to_json()).unwrap();
        assert_eq!(back, ff);
        // exact strings read in float mode
        let as_float = TruncSeries::<C64>::from_json(&f.to_json()).unwrap();
        assert!(as_float.try_sub(&ff).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs() {
        let bad = json!({"vars": 1, "shape": [1, 1], "degree": 3,
            "entries": [{"multidegree": [1], "matrix": [[["1", "0"]]]}]});
        assert!(matches!(TruncSeries::<Exact>::from_json(&bad), Err(Error::Format(_))));
        let bad = json!({"vars": 1, "shape": [1, 1], "degree": 3,
            "entries": [{"multidegree": [1, 0], "matrix": [[["1/0", "0"]]]}]});
        assert!(TruncSeries::<Exact>::from_json(&bad).is_err());
        let prob = json!({"family": {"name": "nope"}});
        assert!(matches!(problem_from_json::<Exact>(&prob, 8), Err(Error::Unknown { .. })));
    }

    #[test]
    fn family_problem() {
        let prob = json!({"degree": 6, "family": {"name": "exp_scalar", "vars": 2}});
        let p = problem_from_json::<Exact>(&prob, 8).unwrap();
        assert_eq!(p.f.degree(), 6);
        assert_eq!(p.a.unwrap().len(), 2);
    }
}
