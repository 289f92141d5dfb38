//! Result serialization: fixed-layout CSV and JSON.

use critzone::braking::BrakeOutcome;
use critzone::steering::SteerOutcome;
use critzone::zone::ZoneBoundary;
use serde::Serialize;

/// Zone table with one row per offset. Column order is fixed; the braking
/// boundary is a scalar and repeats on every row. Excluded offsets leave the
/// steering cells empty.
pub fn zone_csv(zone: &ZoneBoundary<f64>) -> String {
    let mut out = String::from("offset_m,steer_distance_m,steer_ttc_s,brake_distance_m,brake_ttc_s\n");
    for i in 0..zone.offsets.len() {
        let steer = match (zone.steer_distance[i], zone.steer_ttc[i]) {
            (Some(d), Some(t)) => format!("{d:.6},{t:.6}"),
            _ => String::from(","),
        };
        out.push_str(&format!(
            "{:.6},{},{:.6},{:.6}\n",
            zone.offsets[i], steer, zone.brake_distance, zone.brake_ttc
        ));
    }
    out
}

#[derive(Serialize)]
struct ZoneJson<'a> {
    offsets_m: &'a [f64],
    steer_distance_m: &'a [Option<f64>],
    steer_ttc_s: &'a [Option<f64>],
    brake_distance_m: f64,
    brake_ttc_s: f64,
}

pub fn zone_json(zone: &ZoneBoundary<f64>) -> String {
    let j = ZoneJson {
        offsets_m: &zone.offsets,
        steer_distance_m: &zone.steer_distance,
        steer_ttc_s: &zone.steer_ttc,
        brake_distance_m: zone.brake_distance,
        brake_ttc_s: zone.brake_ttc,
    };
    serde_json::to_string_pretty(&j).expect("static schema")
}

#[derive(Serialize)]
pub struct BrakeJson {
    pub verdict: String,
    pub avoidable: Option<bool>,
    pub t_b_s: Option<f64>,
    pub t_bj_s: Option<f64>,
    pub t_ba_s: Option<f64>,
    pub final_gap_m: Option<f64>,
}

pub fn brake_report(outcome: Option<&BrakeOutcome<f64>>) -> BrakeJson {
    match outcome {
        None => BrakeJson {
            verdict: "no braking needed".into(),
            avoidable: None,
            t_b_s: None,
            t_bj_s: None,
            t_ba_s: None,
            final_gap_m: None,
        },
        Some(o) => BrakeJson {
            verdict: if o.avoidable {
                "collision can be avoided by braking".into()
            } else {
                "collision cannot be avoided by braking".into()
            },
            avoidable: Some(o.avoidable),
            t_b_s: Some(o.t_b),
            t_bj_s: Some(o.t_bj),
            t_ba_s: Some(o.t_ba),
            final_gap_m: Some(-o.final_state.dx),
        },
    }
}

#[derive(Serialize)]
pub struct SteerJson {
    pub verdict: String,
    pub avoidable: Option<bool>,
    pub algorithm: Option<String>,
    pub t_s_s: Option<f64>,
    pub t_sj_s: Option<f64>,
    pub t_sa_s: Option<f64>,
    pub dx_s_m: Option<f64>,
    pub iterations: Option<usize>,
}

pub fn steer_report(outcome: Option<&SteerOutcome<f64>>) -> SteerJson {
    match outcome {
        None => SteerJson {
            verdict: "no risk of collision".into(),
            avoidable: None,
            algorithm: None,
            t_s_s: None,
            t_sj_s: None,
            t_sa_s: None,
            dx_s_m: None,
            iterations: None,
        },
        Some(o) => SteerJson {
            verdict: if o.avoidable {
                "collision can be avoided by steering".into()
            } else {
                "collision cannot be avoided by steering".into()
            },
            avoidable: Some(o.avoidable),
            algorithm: Some(o.algorithm.to_string()),
            t_s_s: Some(o.t_s),
            t_sj_s: Some(o.t_sj),
            t_sa_s: Some(o.t_sa),
            dx_s_m: Some(o.dx_s),
            iterations: Some(o.iterations),
        },
    }
}

pub fn text_lines<T: Serialize>(value: &T) -> String {
    // Flat key: value lines from the JSON view; terse but stable.
    let json = serde_json::to_value(value).expect("serializable");
    let mut out = String::new();
    if let serde_json::Value::Object(map) = json {
        for (k, v) in map {
            out.push_str(&format!("{k}: {v}\n"));
        }
    }
    out
}
