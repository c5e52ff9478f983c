//! Locale-independent CSV helpers.

use std::io::{self, Write};

/// Scientific notation with 17 significant digits, which round-trips every f64.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_row<W: Write, S: AsRef<str>>(w: &mut W, fields: &[S]) -> io::Result<()> {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            w.write_all(b",")?;
        }
        w.write_all(f.as_ref().as_bytes())?;
    }
    w.write_all(b"\n")
}
