//! Radio channel: two-ray ground propagation with a receive threshold.

use std::f64::consts::PI;

use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
}

impl NodePosition {
    pub const fn new(x: f64, y: f64) -> Self {
        NodePosition { x, y }
    }

    pub fn distance(&self, other: &NodePosition) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("transmitter and receiver are co-located")]
    ZeroDistance,
    #[error("invalid radio parameter {0}")]
    InvalidParam(&'static str),
}

/// Antenna and receiver parameters shared by every node.
///
/// The defaults give a nominal range of about 250 m.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    /// Transmit power in watts.
    pub tx_power: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    /// Antenna heights in meters.
    pub antenna_height_tx: f64,
    pub antenna_height_rx: f64,
    /// Carrier frequency in Hz.
    pub frequency: f64,
    pub system_loss: f64,
    /// Minimum received power (watts) for a frame to be decodable.
    pub rx_threshold: f64,
    /// Channel bitrate in bits per second.
    pub bitrate: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power: 0.281_838_15,
            gain_tx: 1.0,
            gain_rx: 1.0,
            antenna_height_tx: 1.5,
            antenna_height_rx: 1.5,
            frequency: 914.0e6,
            system_loss: 1.0,
            rx_threshold: 3.652e-10,
            bitrate: 2.0e6,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), PhyError> {
        let checks: [(&'static str, f64); 9] = [
            ("tx_power", self.tx_power),
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
            ("antenna_height_tx", self.antenna_height_tx),
            ("antenna_height_rx", self.antenna_height_rx),
            ("frequency", self.frequency),
            ("system_loss", self.system_loss),
            ("rx_threshold", self.rx_threshold),
            ("bitrate", self.bitrate),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(PhyError::InvalidParam(name));
            }
        }
        if self.system_loss < 1.0 {
            return Err(PhyError::InvalidParam("system_loss"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    /// Distance at which the free-space and ground-reflection formulas meet.
    pub fn crossover_distance(&self) -> f64 {
        4.0 * PI * self.antenna_height_tx * self.antenna_height_rx / self.wavelength()
    }

    /// Free-space (Friis) received power at distance `d`.
    pub fn friis_power(&self, d: f64) -> f64 {
        let lambda = self.wavelength();
        self.tx_power * self.gain_tx * self.gain_rx * lambda * lambda / ((4.0 * PI * d).powi(2) * self.system_loss)
    }

    /// Ground-reflection received power at distance `d`.
    pub fn two_ray_power(&self, d: f64) -> f64 {
        let ht = self.antenna_height_tx;
        let hr = self.antenna_height_rx;
        self.tx_power * self.gain_tx * self.gain_rx * ht * ht * hr * hr / (d.powi(4) * self.system_loss)
    }

    /// Received power over distance `d`; two-ray at and beyond the crossover.
    pub fn power_at(&self, d: f64) -> Result<f64, PhyError> {
        if d <= 0.0 {
            return Err(PhyError::ZeroDistance);
        }
        if d < self.crossover_distance() {
            Ok(self.friis_power(d))
        } else {
            Ok(self.two_ray_power(d))
        }
    }

    pub fn in_range_at(&self, d: f64) -> bool {
        match self.power_at(d) {
            Ok(p) => p >= self.rx_threshold,
            Err(_) => true,
        }
    }
}

pub fn received_power(tx: NodePosition, rx: NodePosition, params: &RadioParams) -> Result<f64, PhyError> {
    params.power_at(tx.distance(&rx))
}

pub fn in_range(a: NodePosition, b: NodePosition, params: &RadioParams) -> bool {
    params.in_range_at(a.distance(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Range solved from the ground-reflection formula: d = (Pt Gt Gr ht² hr² / (L Pthr))^(1/4).
    fn analytic_range(p: &RadioParams) -> f64 {
        let num = p.tx_power * p.gain_tx * p.gain_rx * p.antenna_height_tx.powi(2) * p.antenna_height_rx.powi(2);
        (num / (p.system_loss * p.rx_threshold)).powf(0.25)
    }

    #[test]
    fn nominal_range_is_about_250m() {
        let p = RadioParams::default();
        let r = analytic_range(&p);
        assert!((r - 250.0).abs() < 0.05, "range {r}");
        // at 250 m the received power sits at the threshold (within 0.02 %)
        let pw = received_power(NodePosition::new(0.0, 0.0), NodePosition::new(250.0, 0.0), &p).unwrap();
        assert!((pw / p.rx_threshold - 1.0).abs() < 2e-4, "{pw}");
        assert!(pw >= p.rx_threshold);
    }

    #[test]
    fn crossover_uses_two_ray_branch() {
        let p = RadioParams::default();
        let dc = p.crossover_distance();
        let lambda = SPEED_OF_LIGHT / 914.0e6;
        assert!((dc - 4.0 * PI * 2.25 / lambda).abs() < 1e-9);
        let two_ray = p.tx_power * 1.5f64.powi(4) / dc.powi(4);
        let friis = p.tx_power * lambda * lambda / (4.0 * PI * dc).powi(2);
        // the two formulas coincide at the crossover distance
        assert!((two_ray / friis - 1.0).abs() < 1e-12);
        assert_eq!(p.power_at(dc).unwrap(), p.two_ray_power(dc));
        assert_eq!(p.power_at(dc * 0.999).unwrap(), p.friis_power(dc * 0.999));
    }

    #[test]
    fn zero_distance_is_an_error() {
        let p = RadioParams::default();
        let a = NodePosition::new(3.0, 4.0);
        assert_eq!(received_power(a, a, &p), Err(PhyError::ZeroDistance));
    }

    #[test]
    fn grid_neighbors_at_150m() {
        let p = RadioParams::default();
        let o = NodePosition::new(0.0, 0.0);
        assert!(in_range(o, NodePosition::new(150.0, 0.0), &p));
        assert!(in_range(o, NodePosition::new(150.0, 150.0), &p));
        assert!(!in_range(o, NodePosition::new(300.0, 0.0), &p));
    }

    #[test]
    fn power_decreases_with_distance() {
        let p = RadioParams::default();
        let dc = p.crossover_distance();
        let mut last = f64::INFINITY;
        for i in 1..2000 {
            let d = i as f64 * 0.25;
            let pw = p.power_at(d).unwrap();
            if (d - dc).abs() > 0.25 {
                assert!(pw < last, "not decreasing at {d}");
            }
            last = pw;
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let p = RadioParams { system_loss: 0.5, ..RadioParams::default() };
        assert_eq!(p.validate(), Err(PhyError::InvalidParam("system_loss")));
        let p = RadioParams { bitrate: 0.0, ..RadioParams::default() };
        assert!(p.validate().is_err());
        assert!(RadioParams::default().validate().is_ok());
    }
}
