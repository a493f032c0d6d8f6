//! CSV number formatting: 12 significant digits, `.` decimal separator,
//! deterministic across runs so golden files are bit-exact.

/// Format with 12 significant digits: fixed-point for moderate magnitudes,
/// scientific otherwise. `0` and `-0` both print as `0`.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e12).contains(&a) {
        let digits_before = a.log10().floor() as i32 + 1;
        let decimals = (12 - digits_before).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.11e}")
    }
}
