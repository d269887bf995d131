use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64 as C64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

/// Complex rational, the exact coefficient ring.
pub type Exact = Complex<BigRational>;

/// Coefficient field for truncated series.
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_c64(z: C64) -> Self;
    fn conj(&self) -> Self;
    fn magnitude(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn to_c64(&self) -> C64;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;
}

impl Coeff for C64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        C64::new(num as f64 / den as f64, 0.0)
    }
    fn from_c64(z: C64) -> Self {
        z
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn to_json(&self) -> Value {
        serde_json::json!([self.re, self.im])
    }
    fn from_json(v: &Value) -> Result<Self> {
        let (re, im) = parts(v)?;
        Ok(C64::new(parse_float(re)?, parse_float(im)?))
    }
}

impl Coeff for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Complex::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Complex::new(BigRational::one(), BigRational::zero())
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(BigRational::new(num.into(), den.into()), BigRational::zero())
    }
    fn from_c64(z: C64) -> Self {
        let r = |x: f64| BigRational::from_float(x).expect("finite coefficient");
        Complex::new(r(z.re), r(z.im))
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn to_c64(&self) -> C64 {
        let f = |q: &BigRational| q.to_f64().unwrap_or(f64::NAN);
        C64::new(f(&self.re), f(&self.im))
    }
    fn to_json(&self) -> Value {
        serde_json::json!([rational_string(&self.re), rational_string(&self.im)])
    }
    fn from_json(v: &Value) -> Result<Self> {
        let (re, im) = parts(v)?;
        Ok(Complex::new(parse_rational(re)?, parse_rational(im)?))
    }
}

fn parts(v: &Value) -> Result<(&Value, &Value)> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok((&a[0], &a[1])),
        Value::Number(_) | Value::String(_) => Ok((v, &Value::Null)),
        _ => Err(Error::Format(format!("coefficient must be [re, im], got {v}"))),
    }
}

fn parse_float(v: &Value) -> Result<f64> {
    match v {
        Value::Null => Ok(0.0),
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Format(format!("bad number {n}"))),
        Value::String(_) => Ok(parse_rational(v)?.to_f64().unwrap_or(f64::NAN)),
        _ => Err(Error::Format(format!("bad coefficient part {v}"))),
    }
}

fn parse_rational(v: &Value) -> Result<BigRational> {
    match v {
        Value::Null => Ok(BigRational::zero()),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigRational::from_integer(i.into()))
            } else {
                let x = n.as_f64().ok_or_else(|| Error::Format(format!("bad number {n}")))?;
                BigRational::from_float(x).ok_or_else(|| Error::Format(format!("non-finite {x}")))
            }
        }
        Value::String(s) => {
            let bad = || Error::Format(format!("bad rational `{s}`"));
            let (num, den) = match s.split_once('/') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (s.trim(), "1"),
            };
            let num: BigInt = num.parse().map_err(|_| bad())?;
            let den: BigInt = den.parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(num, den))
        }
        _ => Err(Error::Format(format!("bad coefficient part {v}"))),
    }
}

fn rational_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// `|x|` for the pivot choice in exact elimination.
pub(crate) fn pivot_weight<T: Coeff>(x: &T) -> f64 {
    if T::EXACT {
        if x.is_zero() {
            0.0
        } else {
            1.0 + x.magnitude()
        }
    } else {
        x.magnitude()
    }
}
