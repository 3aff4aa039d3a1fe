//! Byte-stable JSON output shared by trace documents and weights files.
//!
//! Every `f32` is written with exactly nine significant digits in exponent
//! form (`-1.23456789e-3`). Nine digits are enough to recover any `f32`
//! exactly, so parse-then-write reproduces the original bytes.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

#[derive(Debug, Default, Clone, Copy)]
pub struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }

    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        CompactFormatter.write_f64(writer, value)
    }
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 << 16);
    let mut ser = Serializer::with_formatter(&mut out, CanonicalFormatter);
    value
        .serialize(&mut ser)
        .expect("serializing into memory cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(to_vec(&[0.1f32, -0.0, 1.0, 1e-20]), b"[1.00000001e-1,-0.00000000e0,1.00000000e0,9.99999968e-21]");
    }

    proptest! {
        #[test]
        fn f32_survives_text(bits in any::<u32>()) {
            let v = f32::from_bits(bits);
            prop_assume!(v.is_finite());
            let text = to_vec(&v);
            let back: f32 = serde_json::from_slice(&text).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
            prop_assert_eq!(to_vec(&back), text);
        }
    }
}
