//! Deterministic wind fields for disturbance scenarios.
//!
//! A scenario carries a list of fields; the sampled wind is their sum. All
//! fields are pure functions of position and time, so repeated runs see
//! identical disturbances.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// One wind field contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindField {
    /// Uniform, steady wind everywhere.
    Constant { velocity: Vector3<f64> },
    /// Uniform wind active only inside a time window `[start, end)`.
    GustPulse { velocity: Vector3<f64>, start: f64, end: f64 },
    /// Fan jet: wind of `speed` along `axis` inside a cone of the given
    /// half-angle opening from `apex`; zero outside.
    FanJet { apex: Vector3<f64>, axis: Vector3<f64>, half_angle: f64, speed: f64 },
}

impl WindField {
    /// Samples this field at a position (m, inertial) and time (s).
    pub fn wind_at(&self, position: Vector3<f64>, time: f64) -> Vector3<f64> {
        match self {
            WindField::Constant { velocity } => *velocity,
            WindField::GustPulse { velocity, start, end } => {
                if time >= *start && time < *end {
                    *velocity
                } else {
                    Vector3::zeros()
                }
            }
            WindField::FanJet { apex, axis, half_angle, speed } => {
                let axis_unit = axis.normalize();
                let rel = position - apex;
                let along = rel.dot(&axis_unit);
                if along <= 0.0 {
                    return Vector3::zeros();
                }
                let radial = (rel - along * axis_unit).norm();
                if radial.atan2(along) <= *half_angle {
                    *speed * axis_unit
                } else {
                    Vector3::zeros()
                }
            }
        }
    }

    /// Validates field invariants (speed >= 0, window ordered).
    pub fn validate(&self) -> Result<(), String> {
        match self {
            WindField::Constant { .. } => Ok(()),
            WindField::GustPulse { start, end, .. } => {
                if start < end {
                    Ok(())
                } else {
                    Err(format!("gust window start {start} must precede end {end}"))
                }
            }
            WindField::FanJet { axis, half_angle, speed, .. } => {
                if *speed < 0.0 {
                    Err("fan-jet speed must be >= 0".to_string())
                } else if axis.norm() == 0.0 {
                    Err("fan-jet axis must be nonzero".to_string())
                } else if !(*half_angle > 0.0) {
                    Err("fan-jet half-angle must be > 0".to_string())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Sums a list of fields at a sample point.
pub fn total_wind(fields: &[WindField], position: Vector3<f64>, time: f64) -> Vector3<f64> {
    fields
        .iter()
        .map(|f| f.wind_at(position, time))
        .fold(Vector3::zeros(), |acc, w| acc + w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_field_everywhere() {
        let f = WindField::Constant { velocity: Vector3::new(1.0, 0.0, 0.0) };
        assert_eq!(f.wind_at(Vector3::new(5.0, -3.0, 2.0), 17.0), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn gust_active_only_inside_window() {
        let f = WindField::GustPulse {
            velocity: Vector3::new(3.0, 0.0, 0.0),
            start: 3.0,
            end: 5.0,
        };
        assert_eq!(f.wind_at(Vector3::zeros(), 4.0), Vector3::new(3.0, 0.0, 0.0));
        assert_eq!(f.wind_at(Vector3::zeros(), 6.0), Vector3::zeros());
        assert_eq!(f.wind_at(Vector3::zeros(), 2.999), Vector3::zeros());
    }

    #[test]
    fn fan_jet_zero_outside_cone() {
        let f = WindField::FanJet {
            apex: Vector3::zeros(),
            axis: Vector3::new(1.0, 0.0, 0.0),
            half_angle: 0.3,
            speed: 2.0,
        };
        // On-axis point is inside.
        assert_abs_diff_eq!(
            f.wind_at(Vector3::new(2.0, 0.0, 0.0), 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            epsilon = 1e-12
        );
        // Far off-axis point at the same depth is outside.
        assert_eq!(f.wind_at(Vector3::new(2.0, 3.0, 0.0), 0.0), Vector3::zeros());
        // Behind the apex is outside.
        assert_eq!(f.wind_at(Vector3::new(-1.0, 0.0, 0.0), 0.0), Vector3::zeros());
    }

    #[test]
    fn fields_sum() {
        let fields = vec![
            WindField::Constant { velocity: Vector3::new(1.0, 0.0, 0.0) },
            WindField::GustPulse { velocity: Vector3::new(0.0, 2.0, 0.0), start: 0.0, end: 1.0 },
        ];
        assert_eq!(total_wind(&fields, Vector3::zeros(), 0.5), Vector3::new(1.0, 2.0, 0.0));
        assert_eq!(total_wind(&fields, Vector3::zeros(), 1.5), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn gust_validation_rejects_inverted_window() {
        let f = WindField::GustPulse { velocity: Vector3::zeros(), start: 5.0, end: 3.0 };
        assert!(f.validate().is_err());
    }
}
