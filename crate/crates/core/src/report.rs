//! Plain-text CSV helpers shared by the experiment writers.

use std::io::{self, Write};

/// Round-trip decimal (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a `# ` comment line; embedded newlines are folded into `; `.
pub fn write_comment<W: Write>(w: &mut W, text: &str) -> io::Result<()> {
    writeln!(w, "# {}", text.replace('\n', "; "))
}

pub fn write_row<W: Write>(w: &mut W, fields: &[String]) -> io::Result<()> {
    writeln!(w, "{}", fields.join(","))
}
