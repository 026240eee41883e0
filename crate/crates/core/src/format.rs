//! Deterministic number formatting for emitted files.

/// Significant digits kept in every serialized number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Shortest decimal text of `sig12(x)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    format!("{}", sig12(x))
}
