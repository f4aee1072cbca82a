/// Shortest round-trip decimal form of a float; `.` decimal separator, no
/// locale. Exponent notation only for very large or small magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-300, 6.02214076e23, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
