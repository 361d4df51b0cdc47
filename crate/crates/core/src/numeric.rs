/// Ceiling that ignores floating-point noise just above an integer, so that
/// e.g. `8 * ln(e) / 1.0` rounds to 8 rather than 9.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `value` lies in the closed window spanned by `(1 - tol) * center` and
/// `(1 + tol) * center`. Works for negative centres; a zero centre admits only 0.
pub(crate) fn within_window(value: f64, center: f64, tol: f64) -> bool {
    let lo = ((1.0 - tol) * center).min((1.0 + tol) * center);
    let hi = ((1.0 - tol) * center).max((1.0 + tol) * center);
    lo <= value && value <= hi
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}
