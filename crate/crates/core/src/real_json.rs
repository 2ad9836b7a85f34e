//! Serde helper for real-valued fields that may legitimately be infinite.
//!
//! JSON has no literal for infinities and `serde_json` renders them as
//! `null`. Condition reports use +inf sentinels on purpose (k = 1, σ = 0),
//! so fields tagged with this module serialize finite values as numbers and
//! non-finite ones as the strings "inf" / "-inf" / "nan", accepting either
//! form when reading back.

use serde::{Deserialize, Deserializer, Serializer};

use crate::scalar::Scalar;

pub fn serialize<F: Scalar, S: Serializer>(v: &F, s: S) -> Result<S::Ok, S::Error> {
    let x = v.to_real();
    if x.is_finite() {
        s.serialize_f64(x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if x.is_sign_positive() {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn deserialize<'de, F: Scalar, D: Deserializer<'de>>(d: D) -> Result<F, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    let x = match Raw::deserialize(d)? {
        Raw::Num(v) => v,
        Raw::Str(s) => match s.as_str() {
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            "nan" => f64::NAN,
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unrecognized real value \"{other}\""
                )))
            }
        },
    };
    Ok(F::real(x))
}
