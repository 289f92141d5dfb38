//! Scenario files: a line-oriented `key = value` format with `#` comments.
//!
//! Values keep the road-facing units (km/h, degrees, metres); conversion to
//! the SI scenario happens in one place. The file-unit struct is the
//! canonical form, so parse -> serialize -> parse is an exact fixpoint.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use critzone::{ComfortBounds, LateralInit, Scenario, VehicleParams};

macro_rules! scenario_fields {
    ($m:ident) => {
        $m!(v_x_kmh, "ego speed (km/h)");
        $m!(v_l_kmh, "lead speed (km/h)");
        $m!(gap_m, "initial bumper gap x_lead - front_bumper (m)");
        $m!(offset_m, "initial front-right-corner offset below the safety line (m)");
        $m!(psi_deg, "initial heading (deg)");
        $m!(vs_ms, "initial lateral speed (m/s)");
        $m!(psidot_degs, "initial yaw rate (deg/s)");
        $m!(delta_deg, "initial steering angle (deg)");
        $m!(mu, "road friction coefficient");
        $m!(x_margin_m, "longitudinal safety margin (m)");
        $m!(y_margin_m, "lateral safety margin (m)");
        $m!(ab0_ms2, "initial longitudinal acceleration (m/s^2)");
        $m!(mass_kg, "vehicle mass (kg)");
        $m!(yaw_inertia_kgm2, "yaw inertia (kg m^2)");
        $m!(cornering_front_nprad, "front cornering stiffness (N/rad)");
        $m!(cornering_rear_nprad, "rear cornering stiffness (N/rad)");
        $m!(front_axle_m, "reference point to front axle (m)");
        $m!(rear_axle_m, "reference point to rear axle (m)");
        $m!(front_bumper_m, "reference point to front bumper (m)");
        $m!(length_m, "vehicle length (m)");
        $m!(width_m, "vehicle width (m)");
        $m!(steer_angle_max_deg, "physical steering angle limit (deg)");
        $m!(steer_rate_max_degs, "physical steering rate limit (deg/s)");
        $m!(gravity_ms2, "gravitational acceleration (m/s^2)");
        $m!(brake_accel_min_ms2, "comfort deceleration floor (m/s^2)");
        $m!(brake_jerk_min_ms3, "comfort brake jerk floor (m/s^3)");
        $m!(lat_accel_max_ms2, "comfort lateral acceleration cap (m/s^2)");
        $m!(lat_jerk_max_ms3, "comfort lateral jerk cap (m/s^3)");
    };
}

/// Scenario in file units. Missing keys fall back to [`ScenarioSpec::default`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub v_x_kmh: f64,
    pub v_l_kmh: f64,
    pub gap_m: f64,
    pub offset_m: f64,
    pub psi_deg: f64,
    pub vs_ms: f64,
    pub psidot_degs: f64,
    pub delta_deg: f64,
    pub mu: f64,
    pub x_margin_m: f64,
    pub y_margin_m: f64,
    pub ab0_ms2: f64,
    pub mass_kg: f64,
    pub yaw_inertia_kgm2: f64,
    pub cornering_front_nprad: f64,
    pub cornering_rear_nprad: f64,
    pub front_axle_m: f64,
    pub rear_axle_m: f64,
    pub front_bumper_m: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub steer_angle_max_deg: f64,
    pub steer_rate_max_degs: f64,
    pub gravity_ms2: f64,
    pub brake_accel_min_ms2: f64,
    pub brake_jerk_min_ms3: f64,
    pub lat_accel_max_ms2: f64,
    pub lat_jerk_max_ms3: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            v_x_kmh: 70.0,
            v_l_kmh: 20.0,
            gap_m: 30.0,
            offset_m: -3.7,
            psi_deg: 0.0,
            vs_ms: 0.0,
            psidot_degs: 0.0,
            delta_deg: 0.0,
            mu: 1.0,
            x_margin_m: 0.0,
            y_margin_m: 0.0,
            ab0_ms2: 0.0,
            mass_kg: 2000.0,
            yaw_inertia_kgm2: 3200.0,
            cornering_front_nprad: 50_000.0,
            cornering_rear_nprad: 50_000.0,
            front_axle_m: 1.226,
            rear_axle_m: 1.550,
            front_bumper_m: 1.820,
            length_m: 4.27,
            width_m: 1.78,
            steer_angle_max_deg: 44.30,
            steer_rate_max_degs: 24.61,
            gravity_ms2: 9.81,
            brake_accel_min_ms2: -5.0,
            brake_jerk_min_ms3: -10.0,
            lat_accel_max_ms2: 5.0,
            lat_jerk_max_ms3: 5.0,
        }
    }
}

impl ScenarioSpec {
    /// Parses the documented `key = value` format. Unknown keys are
    /// rejected; missing keys keep their defaults.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut spec = ScenarioSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected 'key = value', got '{raw}'", idx + 1);
            };
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .with_context(|| format!("line {}: invalid number for '{key}'", idx + 1))?;
            macro_rules! assign {
                ($field:ident, $doc:expr) => {
                    if key == stringify!($field) {
                        spec.$field = value;
                        continue;
                    }
                };
            }
            scenario_fields!(assign);
            bail!("line {}: unknown key '{key}'", idx + 1);
        }
        Ok(spec)
    }

    /// Canonical text form; parsing it back yields an identical spec.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        macro_rules! emit {
            ($field:ident, $doc:expr) => {
                writeln!(out, "{} = {}  # {}", stringify!($field), self.$field, $doc).unwrap();
            };
        }
        scenario_fields!(emit);
        out
    }

    /// SI scenario for the solvers; validation errors carry the violated
    /// condition.
    pub fn to_scenario(&self) -> anyhow::Result<Scenario<f64>> {
        let params = VehicleParams {
            mass: self.mass_kg,
            yaw_inertia: self.yaw_inertia_kgm2,
            cornering_front: self.cornering_front_nprad,
            cornering_rear: self.cornering_rear_nprad,
            front_axle: self.front_axle_m,
            rear_axle: self.rear_axle_m,
            front_bumper: self.front_bumper_m,
            length: self.length_m,
            width: self.width_m,
            steer_angle_max: self.steer_angle_max_deg.to_radians(),
            steer_rate_max: self.steer_rate_max_degs.to_radians(),
            gravity: self.gravity_ms2,
        };
        let comfort = ComfortBounds {
            brake_accel_min: self.brake_accel_min_ms2,
            brake_jerk_min: self.brake_jerk_min_ms3,
            lat_accel_max: self.lat_accel_max_ms2,
            lat_jerk_max: self.lat_jerk_max_ms3,
        };
        let init = LateralInit {
            heading: self.psi_deg.to_radians(),
            lateral_speed: self.vs_ms,
            yaw_rate: self.psidot_degs.to_radians(),
            steer_angle: self.delta_deg.to_radians(),
        };
        let mut scenario = Scenario {
            params,
            comfort,
            v_x: self.v_x_kmh / 3.6,
            v_lead: self.v_l_kmh / 3.6,
            x_lead: 0.0,
            y_lead: 0.0,
            x_margin: self.x_margin_m,
            y_margin: self.y_margin_m,
            mu: self.mu,
            init,
            brake_accel0: self.ab0_ms2,
        };
        scenario.set_bumper_gap(self.gap_m);
        scenario.set_corner_offset(self.offset_m);
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Loads a scenario spec from an optional path; no path or an empty file
/// yields the defaults.
pub fn load_spec(path: Option<&std::path::Path>) -> anyhow::Result<ScenarioSpec> {
    match path {
        None => Ok(ScenarioSpec::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading scenario file {}", p.display()))?;
            ScenarioSpec::parse(&text)
                .with_context(|| format!("parsing scenario file {}", p.display()))
        }
    }
}
