//! Serde adapters that store `f64` values as their IEEE-754 bit pattern in
//! hexadecimal (`"0x3ff0000000000000"`), so serialized models reload
//! bit-exactly.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(v: f64) -> String {
    format!("0x{:016x}", v.to_bits())
}

pub fn decode(s: &str) -> Result<f64, String> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("hex float `{s}` lacks 0x prefix"))?;
    if digits.len() != 16 {
        return Err(format!("hex float `{s}` must have 16 digits"));
    }
    u64::from_str_radix(digits, 16)
        .map(f64::from_bits)
        .map_err(|e| format!("hex float `{s}`: {e}"))
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    decode(&s).map_err(D::Error::custom)
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&encode(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| decode(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod matrix {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for row in m {
            let encoded: Vec<String> = row.iter().map(|x| encode(*x)).collect();
            seq.serialize_element(&encoded)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|s| decode(s).map_err(D::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encodings() {
        assert_eq!(encode(1.0), "0x3ff0000000000000");
        assert_eq!(decode("0x0000000000000000").unwrap(), 0.0);
        assert!(decode("3ff0000000000000").is_err());
        assert!(decode("0x3ff").is_err());
    }

    proptest! {
        #[test]
        fn round_trips_bits(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assert_eq!(decode(&encode(v)).unwrap().to_bits(), bits);
        }
    }
}
