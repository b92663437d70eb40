use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A virtual address in the analyzed image.
///
/// Serializes as a `0x`-prefixed, zero-padded hex string so artifacts stay
/// readable and diffable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Addr(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hex address {0:?}")]
pub struct BadHex(pub String);

impl Addr {
    pub fn get(self) -> u64 {
        self.0
    }

    pub fn offset(self, delta: i64) -> Addr {
        Addr(self.0.wrapping_add_signed(delta))
    }
}

impl From<u64> for Addr {
    fn from(v: u64) -> Self {
        Addr(v)
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:08x}", self.0)
    }
}

impl fmt::LowerHex for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

impl FromStr for Addr {
    type Err = BadHex;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
        if digits.is_empty() || digits.len() > 16 {
            return Err(BadHex(s.to_string()));
        }
        u64::from_str_radix(digits, 16).map(Addr).map_err(|_| BadHex(s.to_string()))
    }
}

impl Serialize for Addr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Addr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_prefix() {
        assert_eq!("0x08001234".parse::<Addr>().unwrap(), Addr(0x0800_1234));
        assert_eq!("8000".parse::<Addr>().unwrap(), Addr(0x8000));
        assert_eq!("0XfF".parse::<Addr>().unwrap(), Addr(0xff));
    }

    #[test]
    fn rejects_garbage() {
        assert!("".parse::<Addr>().is_err());
        assert!("0x".parse::<Addr>().is_err());
        assert!("0xzz".parse::<Addr>().is_err());
        assert!("-0x10".parse::<Addr>().is_err());
    }

    #[test]
    fn json_form_is_padded_hex() {
        let s = serde_json::to_string(&Addr(0x8000)).unwrap();
        assert_eq!(s, "\"0x00008000\"");
        let back: Addr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Addr(0x8000));
    }
}
