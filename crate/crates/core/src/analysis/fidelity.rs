//! Circulation fidelities and their dB forms.

use alloc::vec::Vec;

use crate::linalg::Mat3;

/// Circulation sense. Clockwise routes port 1 to 2, 2 to 3 and 3 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Cw,
    Ccw,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Cw => "cw",
            Direction::Ccw => "ccw",
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Cw => Direction::Ccw,
            Direction::Ccw => Direction::Cw,
        }
    }

    pub fn fidelity(self, report: &FidelityReport) -> f64 {
        match self {
            Direction::Cw => report.f_cw,
            Direction::Ccw => report.f_ccw,
        }
    }
}

impl core::str::FromStr for Direction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "cw" => Ok(Direction::Cw),
            "ccw" => Ok(Direction::Ccw),
            _ => Err(()),
        }
    }
}

/// Averages of the clockwise, counter-clockwise and reflection magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    pub f_cw: f64,
    pub f_ccw: f64,
    pub r_avg: f64,
    /// `|S_13|, |S_32|, |S_21|`
    pub cw_terms: [f64; 3],
    /// `|S_12|, |S_23|, |S_31|`
    pub ccw_terms: [f64; 3],
    /// `|S_11|, |S_22|, |S_33|`
    pub r_terms: [f64; 3],
}

fn mean(t: &[f64; 3]) -> f64 {
    (t[0] + t[1] + t[2]) / 3.0
}

fn min_max(t: &[f64; 3]) -> (f64, f64) {
    (t[0].min(t[1]).min(t[2]), t[0].max(t[1]).max(t[2]))
}

impl FidelityReport {
    pub fn cw_range(&self) -> (f64, f64) {
        min_max(&self.cw_terms)
    }

    pub fn ccw_range(&self) -> (f64, f64) {
        min_max(&self.ccw_terms)
    }

    pub fn r_range(&self) -> (f64, f64) {
        min_max(&self.r_terms)
    }
}

pub fn circulation_fidelities(s: &Mat3) -> FidelityReport {
    let a = |i: usize, j: usize| s[(i - 1, j - 1)].norm();
    let cw_terms = [a(1, 3), a(3, 2), a(2, 1)];
    let ccw_terms = [a(1, 2), a(2, 3), a(3, 1)];
    let r_terms = [a(1, 1), a(2, 2), a(3, 3)];
    FidelityReport {
        f_cw: mean(&cw_terms),
        f_ccw: mean(&ccw_terms),
        r_avg: mean(&r_terms),
        cw_terms,
        ccw_terms,
        r_terms,
    }
}

/// `-20 log10(x)`, `+∞` at zero.
pub fn loss_db(x: f64) -> f64 {
    if x > 0.0 {
        -20.0 * libm::log10(x)
    } else {
        f64::INFINITY
    }
}

/// IL and IS of the forward and reverse circulation senses, reflectance in
/// dB, and sweep bandwidths in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceReport {
    pub il_db: f64,
    pub is_db: f64,
    pub r_db: f64,
    /// Widest contiguous band with `IL < 1 dB`; `None` if no point qualifies.
    pub bandwidth_il_1db_mhz: Option<f64>,
    /// Widest contiguous band with `IS > 14 dB`.
    pub bandwidth_is_14db_mhz: Option<f64>,
}

pub const IL_BANDWIDTH_DB: f64 = 1.0;
pub const IS_BANDWIDTH_DB: f64 = 14.0;

/// Single-point metrics for a clockwise device.
pub fn point_metrics(report: &FidelityReport) -> (f64, f64, f64) {
    (loss_db(report.f_cw), loss_db(report.f_ccw), -loss_db(report.r_avg))
}

/// dB metrics at `report` and bandwidths over `sweep`, a list of
/// `(f_ghz, report)` in ascending frequency. Forward is clockwise.
pub fn performance_db(report: &FidelityReport, sweep: &[(f64, FidelityReport)]) -> PerformanceReport {
    let (il_db, is_db, r_db) = point_metrics(report);
    let freqs: Vec<f64> = sweep.iter().map(|(f, _)| *f).collect();
    let il_margin: Vec<f64> = sweep
        .iter()
        .map(|(_, r)| IL_BANDWIDTH_DB - loss_db(r.f_cw))
        .collect();
    let is_margin: Vec<f64> = sweep
        .iter()
        .map(|(_, r)| loss_db(r.f_ccw) - IS_BANDWIDTH_DB)
        .collect();
    PerformanceReport {
        il_db,
        is_db,
        r_db,
        bandwidth_il_1db_mhz: longest_band(&freqs, &il_margin).map(|w| w * 1e3),
        bandwidth_is_14db_mhz: longest_band(&freqs, &is_margin).map(|w| w * 1e3),
    }
}

/// Width of the longest contiguous run with `margin > 0`, its edges placed
/// at the linearly interpolated zero crossings. Units follow `x`.
pub fn longest_band(x: &[f64], margin: &[f64]) -> Option<f64> {
    let n = x.len().min(margin.len());
    // infinite margins (zero transmission) would break the interpolation
    let g = |i: usize| margin[i].clamp(-1e6, 1e6);
    let crossing = |i: usize, j: usize| {
        let (gi, gj) = (g(i), g(j));
        x[i] + (x[j] - x[i]) * gi / (gi - gj)
    };
    let mut best: Option<f64> = None;
    let mut i = 0;
    while i < n {
        if !(g(i) > 0.0) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && g(i + 1) > 0.0 {
            i += 1;
        }
        let end = i;
        let left = if start > 0 { crossing(start - 1, start) } else { x[start] };
        let right = if end + 1 < n { crossing(end, end + 1) } else { x[end] };
        let width = right - left;
        if best.map_or(true, |b| width > b) {
            best = Some(width);
        }
        i += 1;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};

    #[test]
    fn band_interpolates_edges() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let m = [-1.0, 1.0, 1.0, -1.0, 1.0];
        assert!((longest_band(&x, &m).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(longest_band(&x, &[-1.0; 5]), None);
        assert!((longest_band(&x, &[1.0; 5]).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn ranges() {
        let mut s = Mat3::zeros();
        s[(1, 0)] = c(0.9, 0.0);
        s[(2, 1)] = c(0.0, 0.8);
        s[(0, 2)] = ONE;
        let r = circulation_fidelities(&s);
        assert_eq!(r.cw_range(), (0.8, 1.0));
        assert!((r.f_cw - 0.9).abs() < 1e-15);
    }
}
