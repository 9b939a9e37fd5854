//! Serde helpers for exact values: rationals as `{num, den}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct Frac {
    num: serde_json::Value,
    den: serde_json::Value,
}

pub fn int_value(x: &BigInt) -> serde_json::Value {
    match x.to_i64() {
        Some(v) => v.into(),
        None => x.to_string().into(),
    }
}

fn parse_int<E: serde::de::Error>(v: &serde_json::Value) -> Result<BigInt, E> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| E::custom("expected an integer")),
        serde_json::Value::String(s) => s.parse().map_err(E::custom),
        _ => Err(E::custom("expected an integer")),
    }
}

pub fn to_frac(r: &BigRational) -> serde_json::Value {
    serde_json::json!({ "num": int_value(r.numer()), "den": int_value(r.denom()) })
}

pub mod rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        Frac {
            num: int_value(r.numer()),
            den: int_value(r.denom()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let f = Frac::deserialize(d)?;
        let den: BigInt = parse_int(&f.den)?;
        if den == BigInt::from(0) {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(BigRational::new(parse_int(&f.num)?, den))
    }
}

pub mod rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => super::rational::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        let v = Option::<serde_json::Value>::deserialize(d)?;
        match v {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(v) => super::rational::deserialize(v).map(Some).map_err(serde::de::Error::custom),
        }
    }
}
