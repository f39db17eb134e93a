//! Plain-text serialization helpers shared by the report writers.

/// One CSV line; floats use Rust's shortest round-trip formatting so output
/// is deterministic and lossless.
pub fn csv_row(values: &[f64]) -> String {
    let mut line = values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// CSV document with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
    }
    out
}
