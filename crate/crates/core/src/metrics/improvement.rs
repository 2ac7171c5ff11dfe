use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Relative change `100 * (after - before) / before`, unrounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub before: f64,
    pub after: f64,
    pub percent: f64,
}

impl Improvement {
    /// Percent rounded half-up to one decimal, in tenths.
    pub fn tenths(&self) -> i64 {
        round_half_up(self.percent, 1)
    }

    /// One-decimal display form, e.g. `4.0` or `-2.5`.
    pub fn display(&self) -> String {
        format_tenths(self.tenths())
    }

    pub fn rounded(&self) -> f64 {
        self.tenths() as f64 / 10.0
    }
}

pub fn improvement(before: f64, after: f64) -> Result<Improvement, MetricError> {
    if !before.is_finite() || !after.is_finite() {
        return Err(MetricError::NonFinite("improvement input"));
    }
    if before <= 0.0 {
        return Err(MetricError::NonPositiveBaseline(before));
    }
    Ok(Improvement {
        before,
        after,
        percent: 100.0 * (after - before) / before,
    })
}

/// Round half-up (towards +inf on ties) to `decimals` places and return
/// the scaled integer. A small relative slack absorbs binary
/// representation error, so decimal ties like 2.25 round up.
pub fn round_half_up(value: f64, decimals: u32) -> i64 {
    let scale = libm::pow(10.0, f64::from(decimals));
    let scaled = value * scale;
    let slack = 1e-9 * libm::fmax(1.0, libm::fabs(scaled));
    libm::floor(scaled + 0.5 + slack) as i64
}

fn format_tenths(tenths: i64) -> String {
    let sign = if tenths < 0 { "-" } else { "" };
    let abs = tenths.unsigned_abs();
    format!("{sign}{}.{}", abs / 10, abs % 10)
}
