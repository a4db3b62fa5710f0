//! Butterworth low-pass filtering of periodic angle sweeps.

use serde::{Deserialize, Serialize};

/// Filter settings used by the noise metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ButterworthConfig {
    pub order: usize,
    /// Cutoff as a fraction of the Nyquist frequency, in (0, 1).
    pub cutoff: f64,
    /// Full periods of circular padding added on each side before filtering.
    pub pad_periods: usize,
}

impl Default for ButterworthConfig {
    fn default() -> Self {
        Self {
            order: 2,
            cutoff: 0.15,
            pad_periods: 1,
        }
    }
}

/// Second-order section in transposed direct form II. First-order sections have
/// `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filters in place, starting from the steady state for a constant input equal to the
    /// first sample.
    fn run(&self, data: &mut [f64]) {
        let Some(&x0) = data.first() else { return };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let y0 = x0 * self.dc_gain();
        let mut z1 = y0 - b0 * x0;
        let mut z2 = b2 * x0 - a2 * y0;
        for v in data.iter_mut() {
            let x = *v;
            let y = b0 * x + z1;
            z1 = b1 * x - a1 * y + z2;
            z2 = b2 * x - a2 * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass as a cascade of sections, via the bilinear transform with
/// frequency prewarping.
pub fn design_lowpass(order: usize, cutoff: f64) -> Vec<Section> {
    assert!(order >= 1, "filter order must be at least 1");
    assert!(
        cutoff > 0.0 && cutoff < 1.0,
        "cutoff must lie in (0, 1) of Nyquist"
    );
    let k = (std::f64::consts::FRAC_PI_2 * cutoff).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let q =
            1.0 / (2.0 * (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * order) as f64).sin());
        let norm = 1.0 / (1.0 + k / q + k2);
        let b0 = k2 * norm;
        sections.push(Section {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm],
        });
    }
    if order % 2 == 1 {
        let b0 = k / (k + 1.0);
        sections.push(Section {
            b: [b0, b0, 0.0],
            a: [(k - 1.0) / (k + 1.0), 0.0],
        });
    }
    sections
}

/// Zero-phase (forward then backward) low-pass of a periodic sequence, padded circularly.
pub fn lowpass_circular(signal: &[f64], config: &ButterworthConfig) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let sections = design_lowpass(config.order, config.cutoff);
    let reps = 2 * config.pad_periods + 1;
    let mut padded: Vec<f64> = signal.iter().copied().cycle().take(n * reps).collect();
    for s in &sections {
        s.run(&mut padded);
    }
    padded.reverse();
    for s in &sections {
        s.run(&mut padded);
    }
    padded.reverse();
    let start = n * config.pad_periods;
    padded[start..start + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample() -> Vec<f64> {
        (0..36).map(|i| ((i * 37) % 11) as f64 / 10.0).collect()
    }

    #[test]
    fn second_order_coefficients_match_reference_design() {
        // scipy.signal.butter(2, 0.15)
        let s = design_lowpass(2, 0.15);
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s[0].b[0], 0.04125354, epsilon = 1e-8);
        assert_abs_diff_eq!(s[0].b[1], 0.08250707, epsilon = 1e-8);
        assert_abs_diff_eq!(s[0].a[0], -1.34896775, epsilon = 1e-8);
        assert_abs_diff_eq!(s[0].a[1], 0.51398189, epsilon = 1e-8);
    }

    #[test]
    fn fourth_order_poles_match_reference_design() {
        // denominators of scipy.signal.butter(4, 0.15, output="sos"); section order differs
        let s = design_lowpass(4, 0.15);
        let mut dens: Vec<[f64; 2]> = s.iter().map(|s| s.a).collect();
        dens.sort_by(|a, b| a[1].partial_cmp(&b[1]).unwrap());
        assert_abs_diff_eq!(dens[0][0], -1.2554404734849927, epsilon = 1e-12);
        assert_abs_diff_eq!(dens[0][1], 0.40901378318031234, epsilon = 1e-12);
        assert_abs_diff_eq!(dens[1][0], -1.5182418440638743, epsilon = 1e-12);
        assert_abs_diff_eq!(dens[1][1], 0.70396265666726188, epsilon = 1e-12);
    }

    #[test]
    fn magnitude_at_cutoff_is_half_power() {
        for order in 1..=6 {
            let cutoff = 0.15;
            let w = std::f64::consts::PI * cutoff;
            let mut mag = 1.0;
            for s in design_lowpass(order, cutoff) {
                let z1 = (w.cos(), -w.sin());
                let z2 = ((2.0 * w).cos(), -(2.0 * w).sin());
                let num = (
                    s.b[0] + s.b[1] * z1.0 + s.b[2] * z2.0,
                    s.b[1] * z1.1 + s.b[2] * z2.1,
                );
                let den = (
                    1.0 + s.a[0] * z1.0 + s.a[1] * z2.0,
                    s.a[0] * z1.1 + s.a[1] * z2.1,
                );
                mag *= num.0.hypot(num.1) / den.0.hypot(den.1);
            }
            assert_abs_diff_eq!(mag, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_phase_output_matches_reference_implementation() {
        // scipy sosfilt with sosfilt_zi steady-state start, forward and backward,
        // over three concatenated periods
        let cases: [(usize, [f64; 4]); 3] = [
            (
                2,
                [
                    0.41517217138854007,
                    0.5243036595566167,
                    0.535264721929492,
                    0.4144077110309402,
                ],
            ),
            (
                3,
                [
                    0.41331994193523347,
                    0.5241781839017299,
                    0.5263590857914975,
                    0.4137795864290089,
                ],
            ),
            (
                4,
                [
                    0.41515205049557014,
                    0.5214625067813287,
                    0.5184028248649691,
                    0.4158493666839179,
                ],
            ),
        ];
        for (order, expected) in cases {
            let config = ButterworthConfig {
                order,
                ..Default::default()
            };
            let out = lowpass_circular(&sample(), &config);
            for (idx, want) in [0usize, 5, 17, 35].into_iter().zip(expected) {
                assert_abs_diff_eq!(out[idx], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn constants_pass_unchanged() {
        let out = lowpass_circular(&[0.7; 36], &ButterworthConfig::default());
        for v in out {
            assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
        }
    }
}
