//! Built-in scenarios: the reference synthetic and RSSI setups plus two
//! cluttered multi-robot arenas with scripted dynamic movers.

use crate::field::{BasisLayout, GasFieldSpec};
use crate::geom::{Polygon, Rect, Vec2};
use crate::world::{
    DynamicObstacle, LidarParams, RobotPose, RssiModel, SourceMode, WorldScenario,
};

type V = Vec2<f64>;

/// Names accepted by the CLI in place of a scenario file path.
pub const BUILTIN_NAMES: [&str; 4] = ["survey-synthetic", "survey-rssi", "urban-5", "urban-9"];

/// Look up a built-in scenario by name.
pub fn builtin(name: &str) -> Option<WorldScenario<f64>> {
    match name {
        "survey-synthetic" => Some(survey_synthetic()),
        "survey-rssi" => Some(survey_rssi()),
        "urban-5" => Some(urban_5()),
        "urban-9" => Some(urban_9()),
        _ => None,
    }
}

/// Three-source synthetic gas field on the reference arena, 3 robots.
pub fn survey_synthetic() -> WorldScenario<f64> {
    let layout = BasisLayout::new(
        vec![V::new(1.6, 20.0), V::new(12.8, 3.3), V::new(1.6, 2.7)],
        vec![7.7, 6.0, 7.7],
    )
    .expect("valid truth layout");
    let spec = GasFieldSpec::new(layout, vec![1.6, 1.4, 1.6], 0.32f64.sqrt(), 1.0)
        .expect("valid truth field");
    WorldScenario {
        name: "survey-synthetic".into(),
        arena: Rect::from_size(14.98, 28.12),
        static_obstacles: vec![],
        dynamic_obstacles: vec![],
        robots: vec![
            RobotPose {
                position: V::new(10.559, 21.77),
                heading: -std::f64::consts::FRAC_PI_2,
            },
            RobotPose {
                position: V::new(9.9, 22.4),
                heading: -std::f64::consts::FRAC_PI_2,
            },
            RobotPose {
                position: V::new(11.2, 22.4),
                heading: -std::f64::consts::FRAC_PI_2,
            },
        ],
        source: SourceMode::SyntheticField(spec),
        comm_radius: 50.0,
        dt: 1.0 / 30.0,
        lidar: LidarParams::default(),
        robot_radius: 0.15,
        measurement_period: 5.0,
        budget_s: 1500.0,
        measurement_quota: 359,
        leader_speed: 0.16,
    }
}

/// Same arena and robots, but the source is an RSSI emitter.
pub fn survey_rssi() -> WorldScenario<f64> {
    let mut sc = survey_synthetic();
    sc.name = "survey-rssi".into();
    sc.source = SourceMode::RssiEmitter {
        position: V::new(12.8, 3.3),
        model: RssiModel::default(),
    };
    sc
}

fn rect_obstacle(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon<f64> {
    Polygon::rectangle(Rect::new(V::new(x0, y0), V::new(x1, y1)))
}

fn robot_row(n: usize, x0: f64, y: f64, step: f64) -> Vec<RobotPose<f64>> {
    (0..n)
        .map(|i| RobotPose {
            position: V::new(x0 + step * i as f64, y),
            heading: std::f64::consts::FRAC_PI_2,
        })
        .collect()
}

fn single_source(center: V, width: f64, gain: f64) -> SourceMode<f64> {
    let layout = BasisLayout::new(vec![center], vec![width]).expect("valid layout");
    SourceMode::SyntheticField(
        GasFieldSpec::new(layout, vec![gain], 0.3, 1.0).expect("valid field"),
    )
}

/// 5 robots, 3 static blocks plus 1 scripted mover on a 20 m arena.
pub fn urban_5() -> WorldScenario<f64> {
    WorldScenario {
        name: "urban-5".into(),
        arena: Rect::from_size(20.0, 20.0),
        static_obstacles: vec![
            rect_obstacle(6.0, 6.0, 8.0, 8.0),
            rect_obstacle(12.0, 11.0, 14.0, 13.0),
            rect_obstacle(4.0, 14.0, 6.0, 16.0),
        ],
        dynamic_obstacles: vec![DynamicObstacle {
            radius: 0.4,
            speed: 0.08,
            waypoints: vec![V::new(16.0, 5.0), V::new(16.0, 15.0)],
        }],
        robots: robot_row(5, 2.0, 1.2, 1.0),
        source: single_source(V::new(10.0, 16.0), 6.0, 1.6),
        comm_radius: 50.0,
        dt: 1.0 / 30.0,
        lidar: LidarParams::default(),
        robot_radius: 0.15,
        measurement_period: 5.0,
        budget_s: 1200.0,
        measurement_quota: 60,
        leader_speed: 0.16,
    }
}

/// 9 robots, 4 static blocks plus 2 scripted movers on a 24 m arena.
pub fn urban_9() -> WorldScenario<f64> {
    WorldScenario {
        name: "urban-9".into(),
        arena: Rect::from_size(24.0, 24.0),
        static_obstacles: vec![
            rect_obstacle(6.0, 7.0, 8.0, 9.0),
            rect_obstacle(15.0, 6.0, 17.0, 8.0),
            rect_obstacle(5.0, 16.0, 7.0, 18.0),
            rect_obstacle(14.0, 15.0, 16.0, 17.0),
        ],
        dynamic_obstacles: vec![
            DynamicObstacle {
                radius: 0.4,
                speed: 0.08,
                waypoints: vec![V::new(20.0, 5.0), V::new(20.0, 19.0)],
            },
            DynamicObstacle {
                radius: 0.4,
                speed: 0.06,
                waypoints: vec![V::new(10.0, 12.0), V::new(12.5, 12.0)],
            },
        ],
        robots: robot_row(9, 2.0, 1.2, 1.0),
        source: single_source(V::new(12.0, 19.0), 7.0, 1.6),
        comm_radius: 50.0,
        dt: 1.0 / 30.0,
        lidar: LidarParams::default(),
        robot_radius: 0.15,
        measurement_period: 5.0,
        budget_s: 1500.0,
        measurement_quota: 60,
        leader_speed: 0.16,
    }
}
