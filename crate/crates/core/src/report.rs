//! Deterministic JSON output: struct field order is preserved, maps are
//! sorted, and every float is written with 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;

/// Pretty formatter that prints floats in `d.dddddddddddddddde±x` form.
pub struct FixedPrecisionFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for FixedPrecisionFormatter<'_> {
    fn default() -> Self {
        FixedPrecisionFormatter {
            inner: PrettyFormatter::with_indent(b"  "),
        }
    }
}

/// 17 significant digits, always in exponent form so integral values stay
/// floats when re-read.
pub fn format_f64(value: f64) -> String {
    if value == 0.0 {
        // Avoid a signed zero in golden files.
        return "0.0000000000000000e0".to_string();
    }
    format!("{value:.16e}")
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.inner.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for FixedPrecisionFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FixedPrecisionFormatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| crate::error::Error::Io(io::Error::other(e)))?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        b: f64,
        a: Vec<f64>,
        c: Option<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits_and_fields_keep_order() {
        let s = to_json_string(&Sample { b: 0.1, a: vec![1.0, -0.0, 0.375], c: None }).unwrap();
        assert!(s.find("\"b\"").unwrap() < s.find("\"a\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("3.7500000000000000e-1"));
        assert!(s.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
        assert_eq!(back["a"][1].as_f64(), Some(0.0));
    }

    #[test]
    fn round_trips_every_float() {
        for v in [1.0 / 3.0, 2.0f64.sqrt(), -1e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
