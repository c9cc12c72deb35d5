//! Number canonicalization for persisted files.

/// Rounds to 9 significant digits; `-0.0` becomes `0.0`.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}
