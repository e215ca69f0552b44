//! Unit conversions. All internal math is in SI units (W, Hz, s, bits);
//! dBm shows up only at the config boundary.

/// dBm to Watts: W = 10^((dBm - 30) / 10).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_watts_fixture() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-15);
        // 25 dBm device cap is about 316 mW
        assert!((dbm_to_watts(25.0) - 0.31622776601683794).abs() < 1e-12);
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-9);
    }
}
