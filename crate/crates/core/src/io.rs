//! JSON output with fixed float formatting, and CSV dumps.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! that every value round-trips exactly and repeated runs produce
//! byte-identical files. Non-finite values become `null`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::Result;

struct SignificantDigits;

fn write_float<W: ?Sized + Write>(writer: &mut W, value: f64) -> std::io::Result<()> {
    if value.is_finite() {
        write!(writer, "{value:.16e}")
    } else {
        writer.write_all(b"null")
    }
}

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write_float(writer, value)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write_float(writer, value as f64)
    }
}

/// Serializes with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Formats a float for CSV cells with the same 17-digit convention.
pub fn csv_float(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else if value.is_nan() {
        "nan".into()
    } else if value > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinities_become_null() {
        let s = to_json_string(&vec![1.0, f64::INFINITY]).unwrap();
        assert_eq!(s, "[1.0000000000000000e0,null]\n");
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exact(v in prop::collection::vec(-1e300f64..1e300, 0..20)) {
            let s = to_json_string(&v).unwrap();
            let back: Vec<f64> = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
