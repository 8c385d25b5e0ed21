//! Per-tick velocity commands: boids rules, virtual walls, goal attraction,
//! closest-safe-angle obstacle avoidance, force accumulation, and
//! virtual-spring formation tracking.

use crate::geom::{Rect, Vec2};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlockParams<F> {
    pub w_cohesion: F,
    pub w_alignment: F,
    pub w_separation: F,
    pub w_wall: F,
    pub w_goal: F,
    pub w_avoidance: F,
    pub r_alignment: F,
    pub r_separation: F,
    pub r_cohesion: F,
    pub r_avoidance: F,
    pub max_speed: F,
    pub max_turn_rate: F,
    /// Accumulator decay per tick; 1.0 reproduces pure accumulation.
    pub accumulator_decay: F,
    /// Cap on each separation term's magnitude.
    pub separation_cap: F,
    /// Proportional gain of the heading controller.
    pub turn_gain: F,
    /// Spring constant for formation slot tracking.
    pub spring_k: F,
}

impl<F: Real> Default for FlockParams<F> {
    fn default() -> Self {
        Self {
            w_cohesion: F::lit(0.6),
            w_alignment: F::lit(0.5),
            w_separation: F::lit(1.12),
            w_wall: F::lit(1.0),
            w_goal: F::lit(2.59),
            w_avoidance: F::lit(2.0),
            r_alignment: F::lit(3.0),
            r_separation: F::lit(0.95),
            r_cohesion: F::lit(3.0),
            r_avoidance: F::lit(0.5),
            max_speed: F::lit(0.15),
            max_turn_rate: F::lit(0.73),
            accumulator_decay: F::lit(0.95),
            separation_cap: F::lit(10.0),
            turn_gain: F::lit(1.5),
            spring_k: F::lit(1.5),
        }
    }
}

/// Kinematic state plus the accumulated force vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState<F> {
    pub position: Vec2<F>,
    pub heading: F,
    pub velocity: Vec2<F>,
    pub force_accum: Vec2<F>,
    pub linear_cmd: F,
    pub angular_cmd: F,
}

impl<F: Real> RobotState<F> {
    pub fn at(position: Vec2<F>, heading: F) -> Self {
        Self {
            position,
            heading,
            velocity: Vec2::zero(),
            force_accum: Vec2::zero(),
            linear_cmd: F::zero(),
            angular_cmd: F::zero(),
        }
    }
}

/// Per-tick force components prior to fusion. The wall force arrives
/// pre-scaled by its weight; every other component is raw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceComponents<F> {
    pub cohesion: Vec2<F>,
    pub separation: Vec2<F>,
    pub alignment: Vec2<F>,
    pub wall: Vec2<F>,
    pub goal: Vec2<F>,
    pub avoidance: Vec2<F>,
}

impl<F: Real> Default for ForceComponents<F> {
    fn default() -> Self {
        Self {
            cohesion: Vec2::zero(),
            separation: Vec2::zero(),
            alignment: Vec2::zero(),
            wall: Vec2::zero(),
            goal: Vec2::zero(),
            avoidance: Vec2::zero(),
        }
    }
}

/// Virtual-wall restoring force, unit components scaled by the wall weight.
pub fn wall_force<F: Real>(pos: Vec2<F>, bounds: Rect<F>, w_wall: F) -> Vec2<F> {
    let x = if pos.x < bounds.min.x {
        F::one()
    } else if pos.x > bounds.max.x {
        -F::one()
    } else {
        F::zero()
    };
    let y = if pos.y < bounds.min.y {
        F::one()
    } else if pos.y > bounds.max.y {
        -F::one()
    } else {
        F::zero()
    };
    Vec2::new(x, y).scale(w_wall)
}

/// Unscaled attraction toward the goal.
pub fn goal_force<F: Real>(pos: Vec2<F>, goal: Vec2<F>) -> Vec2<F> {
    goal - pos
}

/// A neighbour as seen by the controller.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<F> {
    pub position: Vec2<F>,
    pub velocity: Vec2<F>,
    pub heading: F,
}

/// Cohesion, separation, and alignment components from neighbour state.
pub fn boids_forces<F: Real>(
    me: &RobotState<F>,
    neighbors: &[Neighbor<F>],
    params: &FlockParams<F>,
) -> (Vec2<F>, Vec2<F>, Vec2<F>) {
    let mut coh_sum = Vec2::zero();
    let mut coh_n = 0usize;
    let mut sep = Vec2::zero();
    let mut ali_sum = Vec2::zero();
    let mut ali_n = 0usize;
    for nb in neighbors {
        let d = me.position.dist(nb.position);
        if d <= params.r_cohesion {
            coh_sum = coh_sum + nb.position;
            coh_n += 1;
        }
        if d <= params.r_separation {
            let away = me.position - nb.position;
            let term = if d > F::zero() {
                away.scale(F::one() / (d * d))
            } else {
                Vec2::zero()
            };
            let term = if term.norm() > params.separation_cap {
                term.unit_or_zero().scale(params.separation_cap)
            } else if d == F::zero() {
                // Coincident robots: push along +x at the cap.
                Vec2::new(params.separation_cap, F::zero())
            } else {
                term
            };
            sep = sep + term;
        }
        if d <= params.r_alignment {
            let dir = if nb.velocity.norm() > F::lit(1e-9) {
                nb.velocity.unit_or_zero()
            } else {
                Vec2::from_angle(nb.heading)
            };
            ali_sum = ali_sum + dir;
            ali_n += 1;
        }
    }
    let cohesion = if coh_n > 0 {
        coh_sum.scale(F::one() / F::from_usize(coh_n).unwrap()) - me.position
    } else {
        Vec2::zero()
    };
    let alignment = if ali_n > 0 {
        ali_sum.scale(F::one() / F::from_usize(ali_n).unwrap()) - Vec2::from_angle(me.heading)
    } else {
        Vec2::zero()
    };
    (cohesion, sep, alignment)
}

/// One LiDAR return: beam angle relative to the heading, and range. A range
/// of `f::infinity()` means no return.
pub type LidarScan<F> = Vec<(F, F)>;

/// Closest-safe-angle avoidance. Returns the steering vector (world frame)
/// and whether the robot is boxed in.
///
/// Triggered only when a blocked beam exists inside the forward sector
/// (|angle| <= pi/2).
pub fn avoidance_force<F: Real>(scan: &LidarScan<F>, heading: F, r_avoid: F) -> (Vec2<F>, bool) {
    let half_pi = F::PI() * F::lit(0.5);
    let triggered = scan
        .iter()
        .any(|&(a, r)| a.abs() <= half_pi && r < r_avoid);
    if !triggered {
        return (Vec2::zero(), false);
    }
    let mut best: Option<F> = None;
    for &(a, r) in scan {
        if r >= r_avoid {
            match best {
                Some(b) if a.abs() >= b.abs() => {}
                _ => best = Some(a),
            }
        }
    }
    match best {
        Some(a) => (Vec2::from_angle(heading + a), false),
        None => (-Vec2::from_angle(heading), true),
    }
}

/// Accumulate the weighted force components onto the decayed accumulator.
pub fn fuse_forces<F: Real>(
    prev: Vec2<F>,
    c: &ForceComponents<F>,
    params: &FlockParams<F>,
) -> Vec2<F> {
    prev.scale(params.accumulator_decay)
        + c.cohesion.scale(params.w_cohesion)
        + c.separation.scale(params.w_separation)
        + c.alignment.scale(params.w_alignment)
        + c.wall
        + c.goal.scale(params.w_goal)
        + c.avoidance.scale(params.w_avoidance)
}

/// Unicycle command from the resultant force: speed-limited magnitude and a
/// rate-limited proportional turn toward the force bearing.
pub fn to_velocity_cmd<F: Real>(force: Vec2<F>, heading: F, params: &FlockParams<F>) -> (F, F) {
    let norm = force.norm();
    if norm == F::zero() {
        return (F::zero(), F::zero());
    }
    let v = norm.min(params.max_speed);
    let bearing = force.angle();
    let err = wrap_angle(bearing - heading);
    let omega = (err * params.turn_gain)
        .max(-params.max_turn_rate)
        .min(params.max_turn_rate);
    (v, omega)
}

pub fn wrap_angle<F: Real>(a: F) -> F {
    let two_pi = F::lit(2.0) * F::PI();
    let mut x = a % two_pi;
    if x > F::PI() {
        x = x - two_pi;
    } else if x < -F::PI() {
        x = x + two_pi;
    }
    x
}

/// Linear spring toward the follower's slot in the leader frame.
pub fn spring_formation_force<F: Real>(
    robot_pos: Vec2<F>,
    leader_pos: Vec2<F>,
    leader_heading: F,
    offset: Vec2<F>,
    k: F,
) -> Vec2<F> {
    let cos = leader_heading.cos();
    let sin = leader_heading.sin();
    let slot = leader_pos
        + Vec2::new(
            offset.x * cos - offset.y * sin,
            offset.x * sin + offset.y * cos,
        );
    (slot - robot_pos).scale(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec2<f64>;

    fn params() -> FlockParams<f64> {
        FlockParams::default()
    }

    #[test]
    fn wall_force_cases() {
        let b = Rect::from_size(10.0, 10.0);
        assert_eq!(wall_force(V::new(5.0, 5.0), b, 1.0), V::zero());
        // Below x and above y: (+1, -1) scaled by the wall weight.
        let f = wall_force(V::new(-1.0, 12.0), b, 1.0);
        assert_eq!(f, V::new(1.0, -1.0));
        let f = wall_force(V::new(-1.0, 12.0), b, 2.0);
        assert_eq!(f, V::new(2.0, -2.0));
    }

    #[test]
    fn goal_force_cases() {
        assert_eq!(goal_force(V::new(1.0, 1.0), V::new(1.0, 1.0)), V::zero());
        let f = goal_force(V::zero(), V::new(3.0, 4.0));
        assert_eq!(f, V::new(3.0, 4.0));
        assert!((f.norm() - 5.0).abs() < 1e-12);
        // Antisymmetry.
        let a = V::new(2.0, -1.0);
        let b = V::new(-3.0, 5.0);
        assert_eq!(goal_force(a, b), -goal_force(b, a));
    }

    #[test]
    fn boids_no_neighbors_zero() {
        let me = RobotState::at(V::zero(), 0.0);
        let (c, s, a) = boids_forces(&me, &[], &params());
        assert_eq!((c, s, a), (V::zero(), V::zero(), V::zero()));
    }

    #[test]
    fn boids_cohesion_symmetry() {
        let p = params();
        let a = RobotState::at(V::new(-1.0, 0.0), 0.0);
        let b = RobotState::at(V::new(1.0, 0.0), 0.0);
        let nb = |r: &RobotState<f64>| Neighbor {
            position: r.position,
            velocity: V::zero(),
            heading: 0.0,
        };
        let (ca, _, _) = boids_forces(&a, &[nb(&b)], &p);
        let (cb, _, _) = boids_forces(&b, &[nb(&a)], &p);
        assert_eq!(ca, -cb);
    }

    #[test]
    fn boids_middle_of_line_cancels() {
        let p = params();
        let mid = RobotState::at(V::zero(), 0.0);
        let nbs = [
            Neighbor { position: V::new(-0.5, 0.0), velocity: V::zero(), heading: 0.0 },
            Neighbor { position: V::new(0.5, 0.0), velocity: V::zero(), heading: 0.0 },
        ];
        let (_, sep, _) = boids_forces(&mid, &nbs, &p);
        assert!(sep.norm() < 1e-12);
    }

    #[test]
    fn separation_antisymmetric_pair() {
        let p = params();
        let a = RobotState::at(V::new(-0.3, 0.1), 0.0);
        let b = RobotState::at(V::new(0.2, -0.2), 0.0);
        let nb = |r: &RobotState<f64>| Neighbor {
            position: r.position,
            velocity: V::zero(),
            heading: 0.0,
        };
        let (_, sa, _) = boids_forces(&a, &[nb(&b)], &p);
        let (_, sb, _) = boids_forces(&b, &[nb(&a)], &p);
        assert!((sa + sb).norm() < 1e-12);
    }

    #[test]
    fn avoidance_idle_when_clear() {
        let scan: LidarScan<f64> = (-90..=90).map(|d| ((d as f64).to_radians(), 10.0)).collect();
        let (f, boxed) = avoidance_force(&scan, 0.3, 0.5);
        assert_eq!(f, V::zero());
        assert!(!boxed);
    }

    #[test]
    fn avoidance_picks_nearest_safe_angle() {
        // Blocked sector dead ahead [-10, 10] degrees, free elsewhere.
        let scan: LidarScan<f64> = (-135i32..=135)
            .map(|d| {
                let a = (d as f64).to_radians();
                let r = if d.abs() <= 10 { 0.3 } else { 10.0 };
                (a, r)
            })
            .collect();
        let (f, boxed) = avoidance_force(&scan, 0.0, 0.5);
        assert!(!boxed);
        // Oracle: argmin |angle| over safe beams = +/-11 degrees; generation
        // order makes -11 the first minimal one.
        let expected = (-11.0f64).to_radians();
        assert!((f.angle() - expected).abs() < 1e-9, "angle {}", f.angle());
    }

    #[test]
    fn avoidance_boxed_in_reverses() {
        let scan: LidarScan<f64> = (-135..=135)
            .map(|d| ((d as f64).to_radians(), 0.2))
            .collect();
        let (f, boxed) = avoidance_force(&scan, 0.0, 0.5);
        assert!(boxed);
        assert!((f.angle().abs() - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn fuse_keeps_accumulator_with_zero_components() {
        let mut p = params();
        p.accumulator_decay = 1.0;
        let prev = V::new(0.4, -0.2);
        let out = fuse_forces(prev, &ForceComponents::default(), &p);
        assert_eq!(out, prev);
    }

    #[test]
    fn fuse_matches_dot_product_oracle() {
        let p = params();
        let c = ForceComponents {
            cohesion: V::new(0.1, -0.2),
            separation: V::new(-0.4, 0.3),
            alignment: V::new(0.2, 0.2),
            wall: V::new(1.0, 0.0),
            goal: V::new(2.0, -1.0),
            avoidance: V::new(0.0, 0.5),
        };
        let prev = V::new(0.05, 0.05);
        let out = fuse_forces(prev, &c, &p);
        // Independent accumulation with Table-style weights.
        let ox = 0.95 * 0.05 + 0.6 * 0.1 + 1.12 * (-0.4) + 0.5 * 0.2 + 1.0 + 2.59 * 2.0 + 2.0 * 0.0;
        let oy = 0.95 * 0.05 + 0.6 * (-0.2) + 1.12 * 0.3 + 0.5 * 0.2 + 0.0 + 2.59 * (-1.0) + 2.0 * 0.5;
        assert!((out.x - ox).abs() < 1e-12);
        assert!((out.y - oy).abs() < 1e-12);
    }

    #[test]
    fn fuse_linear_in_components() {
        let mut p = params();
        p.accumulator_decay = 0.0;
        let c = ForceComponents {
            cohesion: V::new(0.1, -0.2),
            separation: V::new(-0.4, 0.3),
            alignment: V::new(0.2, 0.2),
            wall: V::new(1.0, 0.0),
            goal: V::new(2.0, -1.0),
            avoidance: V::new(0.0, 0.5),
        };
        let doubled = ForceComponents {
            cohesion: c.cohesion.scale(2.0),
            separation: c.separation.scale(2.0),
            alignment: c.alignment.scale(2.0),
            wall: c.wall.scale(2.0),
            goal: c.goal.scale(2.0),
            avoidance: c.avoidance.scale(2.0),
        };
        let f1 = fuse_forces(V::zero(), &c, &p);
        let f2 = fuse_forces(V::zero(), &doubled, &p);
        assert!((f2 - f1.scale(2.0)).norm() < 1e-12);
    }

    #[test]
    fn velocity_cmd_limits() {
        let p = params();
        let (v, w) = to_velocity_cmd(V::new(0.15, 0.0), 0.0, &p);
        assert!((v - 0.15).abs() < 1e-12);
        assert_eq!(w, 0.0);
        // 90 degrees left: turn clamps to the max rate.
        let (_, w) = to_velocity_cmd(V::new(0.0, 1.0), 0.0, &p);
        assert!((w - 0.73).abs() < 1e-12);
        // Large force clamps to max speed.
        let (v, _) = to_velocity_cmd(V::new(10.0, 0.0), 0.0, &p);
        assert!((v - 0.15).abs() < 1e-12);
        // Zero vector.
        assert_eq!(to_velocity_cmd(V::zero(), 1.0, &p), (0.0, 0.0));
    }

    #[test]
    fn spring_force_toward_slot() {
        let k = 1.5;
        // Robot at its slot: zero force.
        let f = spring_formation_force(V::new(1.0, -1.0), V::zero(), 0.0, V::new(1.0, -1.0), k);
        assert!(f.norm() < 1e-12);
        // Displaced by d: magnitude k*d toward the slot.
        let f = spring_formation_force(V::new(1.0, -3.0), V::zero(), 0.0, V::new(1.0, -1.0), k);
        assert!((f.norm() - 1.5 * 2.0).abs() < 1e-12);
        assert!(f.y > 0.0);
        // Leader heading rotates the slot.
        let f = spring_formation_force(
            V::zero(),
            V::zero(),
            std::f64::consts::FRAC_PI_2,
            V::new(1.0, 0.0),
            1.0,
        );
        assert!((f.x - 0.0).abs() < 1e-12 && (f.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wall_recovery_reenters_bounds() {
        // Robot outside bounds with only the wall force active re-enters,
        // and never strays far while turning toward the interior.
        let p = params();
        let bounds = Rect::from_size(10.0, 10.0);
        let mut state = RobotState::at(V::new(-2.0, 5.0), std::f64::consts::PI);
        let dt = 1.0 / 30.0;
        let mut entered = false;
        for _ in 0..20_000 {
            let mut comp = ForceComponents::default();
            comp.wall = wall_force(state.position, bounds, p.w_wall);
            state.force_accum = fuse_forces(state.force_accum, &comp, &p);
            let (v, w) = to_velocity_cmd(state.force_accum, state.heading, &p);
            state.position = state.position
                + Vec2::from_angle(state.heading).scale(v * dt);
            state.heading = wrap_angle(state.heading + w * dt);
            if bounds.contains(state.position) {
                entered = true;
                break;
            }
            let d = (-state.position.x).max(0.0);
            // Worst-case turn-around excursion at max speed over a half turn.
            assert!(d < 3.0, "robot strayed to {d} m while re-entering");
        }
        assert!(entered, "robot failed to re-enter the bounds");
    }
}
