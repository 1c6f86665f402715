//! dB / linear conversions. Everything downstream of configuration works in
//! linear units (W, Hz, ratios).

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Noise power in W for a density given in dBm/MHz over `bandwidth_hz`.
pub fn noise_power(density_dbm_per_mhz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_per_mhz) * bandwidth_hz / 1e6
}
