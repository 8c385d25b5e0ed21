//! Mission orchestrator: drives the simulated world with the coverage
//! planner, flocking controller, collaborative particle fusion, and
//! divergence-driven waypoint consensus, producing a complete run record
//! for the metrics harness.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{
    block_of_point, formation_offsets, plan_coverage, select_cell_size, CoverageParams,
    CoveragePlan,
};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_field, fuse_and_update, init_particles, FieldEstimate, FusionParams, ParticleSet,
};
use crate::field::{make_basis_grid, BasisLayout, BinaryObservation};
use crate::geom::Vec2;
use crate::metrics::CoverageTracker;
use crate::mission::{self, EventKind, MissionMode, ModeChange, TransitionEvent, TransitionTable};
use crate::scalar::Real;
use crate::sensing::{consensus_select, select_waypoint, AsParams, FreeSpace, Proposal};
use crate::swarm::{
    avoidance_force, boids_forces, goal_force, spring_formation_force, to_velocity_cmd,
    wall_force, wrap_angle, FlockParams, ForceComponents, Neighbor, RobotState,
};
use crate::world::{CollisionEvent, Payload, World, WorldScenario};

/// Mission composition selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    /// Coverage pass first, then active sensing.
    CppAs,
    /// Active sensing from the start.
    AsOnly,
    /// Keep looping the coverage tour for the whole mission.
    CppOnly,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMode::CppAs => "cpp-as",
            RunMode::AsOnly => "as-only",
            RunMode::CppOnly => "cpp-only",
        })
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cpp-as" => Ok(RunMode::CppAs),
            "as-only" => Ok(RunMode::AsOnly),
            "cpp-only" => Ok(RunMode::CppOnly),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected cpp-as, as-only, or cpp-only)"
            ))),
        }
    }
}

/// Runner knobs beyond what the scenario file carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RunnerConfig<F: Real> {
    pub mode: RunMode,
    /// Basis count of the estimation template (perfect square).
    pub basis_count: usize,
    /// Particles per agent.
    pub n_particles: usize,
    /// Coverage cell size; `None` runs the budget-driven search.
    pub cell_size: Option<F>,
    /// Follower slot spacing in formations, meters.
    pub formation_spacing: F,
    /// Waypoint arrival radius for the leader, meters.
    pub arrival_radius: F,
    /// Flocking controller gains.
    pub flock: FlockParams<F>,
}

impl<F: Real> RunnerConfig<F> {
    pub fn new(mode: RunMode, basis_count: usize, n_particles: usize) -> Self {
        Self {
            mode,
            basis_count,
            n_particles,
            cell_size: None,
            formation_spacing: F::lit(2.0),
            arrival_radius: F::lit(0.2),
            flock: {
                // A stronger separation weight than the open-space default:
                // in formation the spring pulls robots toward adjacent slots
                // and must never win a push-of-war at contact range.
                let mut f = FlockParams::default();
                f.w_separation = F::lit(2.5);
                f
            },
        }
    }
}

/// Complete log of one mission run; every metric is a pure function of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RunRecord<F: Real> {
    pub scenario: String,
    pub mode: RunMode,
    pub seed: u64,
    /// Simulation time of each measurement epoch, strictly increasing.
    pub epoch_times: Vec<F>,
    /// Post-fusion estimate per agent per epoch: `estimates[agent][epoch]`.
    pub estimates: Vec<Vec<FieldEstimate<F>>>,
    /// Every binary observation taken, in (epoch, agent) order.
    pub observations: Vec<BinaryObservation<F>>,
    /// Robot positions sampled at 1 Hz: (time, positions).
    pub trajectory: Vec<(F, Vec<Vec2<F>>)>,
    pub mode_changes: Vec<ModeChange>,
    pub collisions: Vec<CollisionEvent<F>>,
    /// Coverage percentage over time (CPP modes only): (time, percent).
    pub coverage_curve: Vec<(F, f64)>,
    pub plan: Option<CoveragePlan<F>>,
    /// Post-fusion weight sums per epoch per agent (unit up to round-off).
    pub weight_sums: Vec<F>,
    pub final_time: F,
    /// Odometry distance per robot.
    pub path_lengths: Vec<F>,
    /// Basis template the estimates refer to.
    pub template: BasisLayout<F>,
}

struct AgentCtl<F: Real> {
    particles: ParticleSet<F>,
    rng: ChaCha8Rng,
    state: RobotState<F>,
    /// Latest particle cloud heard from each neighbour since the last epoch.
    set_buffer: BTreeMap<usize, ParticleSet<F>>,
    prop_buffer: BTreeMap<usize, Proposal<F>>,
    own_prop: Option<Proposal<F>>,
    goal: Vec2<F>,
    scan: Vec<(F, F)>,
}

/// Execute one full mission and return its record.
pub fn run_mission<F: Real>(
    scenario: &WorldScenario<F>,
    config: &RunnerConfig<F>,
    seed: u64,
) -> Result<RunRecord<F>> {
    scenario.validate()?;
    let arena = scenario.arena;
    let tau = scenario.source.threshold();
    let template = make_basis_grid(arena, config.basis_count)?;
    let fusion = FusionParams::defaults(config.n_particles, tau);
    let flock = config.flock;
    // Lidar ranges clip at min_range, so an avoidance radius at or below it
    // could never trigger; keep a margin above the clip.
    let r_avoid = flock
        .r_avoidance
        .max(scenario.lidar.min_range + F::lit(0.25));
    let as_params = AsParams::defaults(arena);
    let free = FreeSpace::new(
        arena,
        scenario.static_obstacles.clone(),
        as_params.obstacle_inflation,
    );
    let n = scenario.robots.len();

    // Coverage plan (CPP modes only). Robot 0 leads.
    let plan = match config.mode {
        RunMode::AsOnly => None,
        _ => {
            let start = scenario.robots[0].position;
            let cell = match config.cell_size {
                Some(c) => c,
                None => {
                    select_cell_size(
                        arena,
                        &scenario.static_obstacles,
                        start,
                        scenario.budget_s,
                        scenario.leader_speed,
                        n,
                    )?
                    .cell_size
                }
            };
            let params = CoverageParams::new(cell, n, scenario.leader_speed);
            Some(plan_coverage(arena, &scenario.static_obstacles, start, &params)?)
        }
    };
    let mut tracker = plan.as_ref().map(|p| CoverageTracker::new(&p.grid));
    // Footprint radius for indirect coverage; widened to the actual
    // formation extent while covering.
    let mut footprint = scenario.robot_radius + config.formation_spacing;

    let mut world = World::new(scenario.clone(), seed)?;
    let mut agents: Vec<AgentCtl<F>> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1000 + i as u64);
            let mut particles = init_particles(config.basis_count, &fusion, &mut rng);
            particles.agent_id = i;
            let pose = &scenario.robots[i];
            AgentCtl {
                particles,
                rng,
                state: RobotState::at(pose.position, pose.heading),
                set_buffer: BTreeMap::new(),
                prop_buffer: BTreeMap::new(),
                own_prop: None,
                goal: pose.position,
                scan: Vec::new(),
            }
        })
        .collect();

    // Mission state machine.
    let table = TransitionTable::reduced_model();
    let mut mode = match config.mode {
        RunMode::AsOnly => MissionMode::ActiveSensing,
        _ => MissionMode::CppLowBudget,
    };
    let mut mode_changes: Vec<ModeChange> = Vec::new();
    let apply_event = |mode: &mut MissionMode,
                           changes: &mut Vec<ModeChange>,
                           time: F,
                           kind: EventKind,
                           table: &TransitionTable| {
        let ev = TransitionEvent {
            time: time.to_f64_lossy(),
            kind,
        };
        let next = mission::step(*mode, &ev, table);
        if next != *mode {
            changes.push(ModeChange {
                time: ev.time,
                from: *mode,
                to: next,
                event: kind,
            });
            *mode = next;
        }
    };

    let dt = scenario.dt;
    let meas_ticks = (scenario.measurement_period / dt)
        .to_f64_lossy()
        .round()
        .max(1.0) as u64;
    let scan_ticks = ((F::one() / (scenario.lidar.rate_hz * dt))
        .to_f64_lossy()
        .round()
        .max(1.0)) as u64;
    let log_ticks = ((F::one() / dt).to_f64_lossy().round().max(1.0)) as u64;
    let quota = scenario.measurement_quota.max(1);
    // During active sensing a measurement is taken on arrival at the agreed
    // waypoint; the cadence is only a floor on the update rate. Travel time
    // therefore bounds mission length, so cap simulated time at a multiple
    // of the coverage budget instead of quota * period.
    let sim_cap_s = scenario.budget_s * F::lit(3.0);
    let hard_cap_ticks = (sim_cap_s / dt).to_f64_lossy().ceil().max(1.0) as u64;
    let as_arrival = F::lit(0.4);
    let as_timeout_ticks = (F::lit(60.0) / dt).to_f64_lossy().round().max(1.0) as u64;
    let mut last_epoch_tick = 0u64;

    let mut record = RunRecord {
        scenario: scenario.name.clone(),
        mode: config.mode,
        seed,
        epoch_times: Vec::new(),
        estimates: vec![Vec::new(); n],
        observations: Vec::new(),
        trajectory: Vec::new(),
        mode_changes: Vec::new(),
        collisions: Vec::new(),
        coverage_curve: Vec::new(),
        plan: plan.clone(),
        weight_sums: Vec::new(),
        final_time: F::zero(),
        path_lengths: vec![F::zero(); n],
        template: template.clone(),
    };

    let mut wp_index = 0usize;
    let mut epochs_done = 0usize;
    let mut awaiting_consensus = false;
    let mut budget_fired = false;
    let mut prev_positions: Vec<Vec2<F>> = scenario.robots.iter().map(|r| r.position).collect();
    // The tour is closed; cpp-only keeps looping it.
    let waypoints: &[Vec2<F>] = plan.as_ref().map(|p| p.waypoints.as_slice()).unwrap_or(&[]);

    for tick in 0..hard_cap_ticks {
        if mode == MissionMode::Stopped {
            break;
        }
        let now = world.time;

        // Drain inboxes into per-agent buffers.
        for i in 0..n {
            for msg in world.take_inbox(i) {
                match msg.payload {
                    Payload::Particles(ps) => {
                        agents[i].set_buffer.insert(msg.sender, ps);
                    }
                    Payload::Proposal(p) => {
                        agents[i].prop_buffer.insert(p.agent_id, p);
                    }
                }
            }
        }

        // Consensus one tick after the proposals went out, once delivered.
        if awaiting_consensus && mode == MissionMode::ActiveSensing {
            for a in agents.iter_mut() {
                let mut props: Vec<Proposal<F>> = a.prop_buffer.values().cloned().collect();
                if let Some(own) = a.own_prop.clone() {
                    props.push(own);
                }
                props.sort_by_key(|p| p.agent_id);
                if let Some(goal) = consensus_select(&props) {
                    a.goal = goal;
                }
                a.prop_buffer.clear();
            }
            awaiting_consensus = false;
        }

        // Measurement epoch: sense, fuse, estimate, broadcast, propose.
        // CPP phases measure on the fixed cadence while the formation sweeps;
        // active sensing measures when the flock reaches the consensus
        // waypoint (cadence as a rate floor, a timeout against blockage).
        let since_epoch = tick - last_epoch_tick;
        let epoch_due = tick > 0
            && epochs_done < quota
            && since_epoch >= meas_ticks
            && if mode == MissionMode::ActiveSensing {
                // The flock measures once it reaches the agreed waypoint;
                // the first robot to arrive releases the epoch.
                agents
                    .iter()
                    .any(|a| a.state.position.dist(a.goal) <= as_arrival)
                    || since_epoch >= as_timeout_ticks
            } else {
                true
            };
        if epoch_due {
            last_epoch_tick = tick;
            record.epoch_times.push(now);
            let mut broadcasts: Vec<Payload<F>> = Vec::with_capacity(n);
            for i in 0..n {
                let obs = world.sense(i);
                let a = &mut agents[i];
                let neighbor_sets: Vec<ParticleSet<F>> = a
                    .set_buffer
                    .iter()
                    .filter(|(&s, _)| s != i)
                    .map(|(_, ps)| ps.clone())
                    .collect();
                let refs: Vec<&ParticleSet<F>> = neighbor_sets.iter().collect();
                a.particles = fuse_and_update(
                    &a.particles,
                    &refs,
                    &obs,
                    &fusion,
                    &template,
                    tau,
                    &mut a.rng,
                );
                a.set_buffer.clear();
                record.weight_sums.push(a.particles.weight_sum());
                record.estimates[i].push(estimate_field(&a.particles));
                record.observations.push(obs);
                broadcasts.push(Payload::Particles(a.particles.clone()));
                if mode == MissionMode::ActiveSensing {
                    let prop = select_waypoint(
                        a.state.position,
                        &a.particles,
                        &as_params,
                        &free,
                        &template,
                        tau,
                        &mut a.rng,
                    );
                    broadcasts.push(Payload::Proposal(prop.clone()));
                    a.own_prop = Some(prop);
                }
            }
            for (i, payloads) in broadcasts.chunks(if mode == MissionMode::ActiveSensing { 2 } else { 1 }).enumerate() {
                for p in payloads {
                    world.broadcast(i, p.clone());
                }
            }
            if mode == MissionMode::ActiveSensing {
                awaiting_consensus = true;
            }
            epochs_done += 1;
            if epochs_done >= quota {
                apply_event(
                    &mut mode,
                    &mut mode_changes,
                    now,
                    EventKind::MeasurementQuotaReached,
                    &table,
                );
            }
        }

        // Budget check while covering (cpp-as only; cpp-only keeps looping).
        if config.mode == RunMode::CppAs
            && mode == MissionMode::CppLowBudget
            && !budget_fired
            && now >= scenario.budget_s
        {
            budget_fired = true;
            apply_event(
                &mut mode,
                &mut mode_changes,
                now,
                EventKind::BudgetExhausted,
                &table,
            );
        }

        // Refresh cached lidar scans at the sensor rate.
        if tick % scan_ticks == 0 {
            for i in 0..n {
                agents[i].scan = world.lidar_scan(i);
            }
        }

        // Control.
        let snapshot: Vec<RobotState<F>> = agents.iter().map(|a| a.state).collect();
        let mut commands = vec![(F::zero(), F::zero()); n];
        match mode {
            MissionMode::Stopped => {}
            MissionMode::CppLowBudget | MissionMode::CppHighBudget => {
                let p = plan.as_ref().expect("cpp mode requires a plan");
                // Leader: waypoint tracking at the survey speed.
                let target = waypoints[wp_index.min(waypoints.len() - 1)];
                let me = snapshot[0];
                if me.position.dist(target) <= config.arrival_radius {
                    if wp_index + 1 < waypoints.len() {
                        wp_index += 1;
                    } else if config.mode == RunMode::CppOnly {
                        wp_index = 0;
                    } else {
                        apply_event(
                            &mut mode,
                            &mut mode_changes,
                            now,
                            EventKind::CoveragePassComplete,
                            &table,
                        );
                        for a in agents.iter_mut() {
                            a.goal = a.state.position;
                        }
                    }
                }
                let to = target - me.position;
                let err = wrap_angle(to.angle() - me.heading);
                let mut v = scenario
                    .leader_speed
                    .min(to.norm() / dt)
                    .min(flock.max_speed);
                if err.abs() > F::lit(0.5) {
                    v = v * F::lit(0.2);
                }
                let omega = (err * flock.turn_gain)
                    .max(-flock.max_turn_rate)
                    .min(flock.max_turn_rate);
                commands[0] = (v, omega);
                // Obstacle avoidance pre-empts waypoint tracking so dynamic
                // movers crossing the tour cannot run the leader down.
                let (avoid0, _) = avoidance_force(&agents[0].scan, me.heading, r_avoid);
                if avoid0.norm() > F::zero() {
                    commands[0] = to_velocity_cmd(avoid0.scale(F::lit(0.1)), me.heading, &flock);
                }
                // Yield to followers caught in the leader's path: they can
                // only sidestep as fast as the turn-rate limit allows.
                let closest = (1..n)
                    .map(|j| me.position.dist(snapshot[j].position))
                    .fold(F::infinity(), F::min);
                if closest < F::lit(0.5) {
                    commands[0].0 = commands[0].0 * F::lit(0.25);
                }

                // Followers: formation spring + separation + walls + lidar.
                let block = block_of_point(&p.blocks, target);
                let tag = p.formations[block];
                let half_w = p.blocks[block].rect.width() * F::lit(0.5);
                let offsets =
                    formation_offsets(tag, n.saturating_sub(1), config.formation_spacing, half_w);
                footprint = offsets
                    .iter()
                    .map(|o| o.norm())
                    .fold(F::zero(), F::max)
                    + scenario.robot_radius;
                for i in 1..n {
                    let me = snapshot[i];
                    let neighbors = comm_neighbors(&world, &snapshot, i);
                    let (_, mut sep, _) = boids_forces(&me, &neighbors, &flock);
                    // A follower caught in front of the leader must slide
                    // around it, not park at the spring/separation force
                    // equilibrium inside the leader's safety corridor.
                    let rel = me.position - snapshot[0].position;
                    let d = rel.norm();
                    let lead_fwd = Vec2::from_angle(snapshot[0].heading);
                    if d > F::zero() && d < F::lit(1.2) && rel.dot(lead_fwd) > F::zero() {
                        let sign = if lead_fwd.cross(rel) >= F::zero() {
                            F::one()
                        } else {
                            -F::one()
                        };
                        let tang = Vec2::new(-rel.y, rel.x).unit_or_zero().scale(sign);
                        let boost = (F::lit(1.2) - d) * F::lit(4.0);
                        sep = sep + (rel.unit_or_zero() + tang).scale(boost);
                    }
                    let (avoid, _) = avoidance_force(&agents[i].scan, me.heading, r_avoid);
                    let comps = ForceComponents {
                        separation: sep,
                        wall: wall_force(me.position, arena, flock.w_wall),
                        goal: spring_formation_force(
                            me.position,
                            snapshot[0].position,
                            snapshot[0].heading,
                            offsets[i - 1],
                            flock.spring_k,
                        ),
                        avoidance: avoid,
                        ..ForceComponents::default()
                    };
                    let threat = threat_bearing(&agents[i].scan, me.heading, r_avoid);
                    commands[i] = steer(&mut agents[i].state, &comps, &flock, threat);
                }
            }
            MissionMode::ActiveSensing => {
                for i in 0..n {
                    let me = snapshot[i];
                    let neighbors = comm_neighbors(&world, &snapshot, i);
                    let (coh, sep, ali) = boids_forces(&me, &neighbors, &flock);
                    let (avoid, _) = avoidance_force(&agents[i].scan, me.heading, r_avoid);
                    let comps = ForceComponents {
                        cohesion: coh,
                        separation: sep,
                        alignment: ali,
                        wall: wall_force(me.position, arena, flock.w_wall),
                        goal: goal_force(me.position, agents[i].goal),
                        avoidance: avoid,
                    };
                    let threat = threat_bearing(&agents[i].scan, me.heading, r_avoid);
                    commands[i] = steer(&mut agents[i].state, &comps, &flock, threat);
                }
            }
        }

        // Panic escape: an obstacle return closing inside the panic radius
        // overrides every other force — a mover can run down a robot that
        // holds its slot or goal, so the robot must flee, not hold.
        let r_panic = scenario.lidar.min_range + F::lit(0.25);
        let mut panicking = vec![false; n];
        for i in 0..n {
            let me = snapshot[i];
            let hit_on_robot = |a: F, r: F| {
                let hit = me.position + Vec2::from_angle(me.heading + a).scale(r);
                (0..n).any(|j| {
                    j != i && hit.dist(snapshot[j].position)
                        <= scenario.robot_radius + F::lit(0.05)
                })
            };
            let closest = agents[i]
                .scan
                .iter()
                .filter(|&&(a, r)| r < r_panic && !hit_on_robot(a, r))
                .min_by(|x, y| x.1.partial_cmp(&y.1).expect("finite ranges"))
                .copied();
            if let Some((a, _)) = closest {
                panicking[i] = true;
                // Flee straight away from the threat when that corridor is
                // clear (beams outside the FOV count as clear); otherwise
                // fall back to the closest safe angle.
                let rel_away = wrap_angle(a + F::PI());
                let away_clear = agents[i]
                    .scan
                    .iter()
                    .filter(|&&(b, _)| wrap_angle(b - rel_away).abs() <= F::lit(0.35))
                    .all(|&(_, r)| r >= r_avoid);
                let dir = if away_clear {
                    Vec2::from_angle(me.heading + rel_away)
                } else {
                    let (avoid, _) = avoidance_force(&agents[i].scan, me.heading, r_avoid);
                    if avoid.norm() > F::zero() {
                        avoid
                    } else {
                        -Vec2::from_angle(me.heading + a)
                    }
                };
                let (v, w) = to_velocity_cmd(dir.scale(F::lit(10.0)), me.heading, &flock);
                let err = wrap_angle(dir.angle() - me.heading);
                commands[i] = (v * err.cos().max(F::zero()), w);
            }
        }

        // Safety governor: never drive forward at a robot or obstacle that
        // is already inside the close-quarters margin. Turning in place
        // stays allowed, so jams resolve once headings rotate clear.
        let stop_dist = scenario.robot_radius * F::lit(2.0) + F::lit(0.12);
        // Lidar clips at min_range, so a reading at the clip means "at or
        // inside" — stop before the remaining hull clearance is gone.
        let lidar_stop = scenario.lidar.min_range + F::lit(0.1);
        let front_cone = F::lit(1.1);
        for i in 0..n {
            if commands[i].0 <= F::zero() {
                continue;
            }
            let me = &world.robots[i];
            let fwd = Vec2::from_angle(me.heading);
            // Returns whose hit point lies on another robot fall under the
            // (less strict) robot-robot rule, not the obstacle stop.
            let on_robot = |a: F, r: F| {
                let hit = me.position + Vec2::from_angle(me.heading + a).scale(r);
                (0..n).any(|j| {
                    j != i && hit.dist(world.robots[j].position)
                        <= scenario.robot_radius + F::lit(0.05)
                })
            };
            // Cone, not half-plane: a pinched robot must stay free to slide
            // tangentially past a neighbour while fleeing a mover.
            // A fleeing robot keeps moving along its escape bearing even with
            // a close return in the wide cone — standing still is what gets
            // it run down; only a dead-ahead return still stops it.
            let obstacle_cone = if panicking[i] {
                F::lit(0.35)
            } else {
                front_cone
            };
            let blocked = (0..n).any(|j| {
                let to = world.robots[j].position - me.position;
                j != i && to.norm() < stop_dist && to.dot(fwd) > to.norm() * F::lit(0.3)
            }) || agents[i]
                .scan
                .iter()
                .any(|&(a, r)| a.abs() <= obstacle_cone && r <= lidar_stop && !on_robot(a, r));
            if blocked {
                commands[i].0 = F::zero();
            }
        }

        world.tick(&commands);

        // Mirror world state back into the controllers.
        for i in 0..n {
            let w = &world.robots[i];
            record.path_lengths[i] =
                record.path_lengths[i] + prev_positions[i].dist(w.position);
            prev_positions[i] = w.position;
            let a = &mut agents[i];
            a.state.position = w.position;
            a.state.heading = w.heading;
            a.state.velocity = Vec2::from_angle(w.heading).scale(w.linear);
        }

        // 1 Hz logging.
        if tick % log_ticks == 0 {
            record
                .trajectory
                .push((now, world.robots.iter().map(|r| r.position).collect()));
            if let (Some(tr), Some(p)) = (tracker.as_mut(), plan.as_ref()) {
                for r in &world.robots {
                    tr.record(&p.grid, r.position, footprint);
                }
                record.coverage_curve.push((now, tr.percentage()));
            }
        }
    }

    record.final_time = world.time;
    record.mode_changes = mode_changes;
    record.collisions = world.collisions.clone();
    Ok(record)
}

fn comm_neighbors<F: Real>(
    world: &World<F>,
    snapshot: &[RobotState<F>],
    i: usize,
) -> Vec<Neighbor<F>> {
    world
        .comm
        .neighbors(i)
        .into_iter()
        .map(|j| Neighbor {
            position: snapshot[j].position,
            velocity: snapshot[j].velocity,
            heading: snapshot[j].heading,
        })
        .collect()
}

/// World bearing of the closest blocked lidar return, if any.
fn threat_bearing<F: Real>(scan: &[(F, F)], heading: F, r_avoid: F) -> Option<F> {
    scan.iter()
        .filter(|&&(_, r)| r < r_avoid)
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("lidar ranges are finite"))
        .map(|&(a, _)| heading + a)
}

fn steer<F: Real>(
    state: &mut RobotState<F>,
    comps: &ForceComponents<F>,
    flock: &FlockParams<F>,
    threat: Option<F>,
) -> (F, F) {
    state.force_accum = crate::swarm::fuse_forces(state.force_accum, comps, flock);
    let (mut v, w) = to_velocity_cmd(state.force_accum, state.heading, flock);
    // Gate forward speed on heading alignment: a unicycle facing away from
    // its resultant force must turn in place, not plough ahead.
    if state.force_accum.norm() > F::zero() {
        let err = wrap_angle(state.force_accum.angle() - state.heading);
        v = v * err.cos().max(F::zero());
    }
    // Creep while steering toward the closest threat: turning onto the safe
    // bearing at full speed closes the gap too fast. Motion pointing away
    // from the threat keeps full speed so slow movers cannot overtake.
    if comps.avoidance.norm() > F::zero() {
        let toward = match threat {
            Some(t) => {
                wrap_angle(state.force_accum.angle() - t).abs() < F::PI() * F::lit(0.5)
            }
            None => true,
        };
        if toward {
            v = v * F::lit(0.3);
        }
    }
    state.linear_cmd = v;
    state.angular_cmd = w;
    (v, w)
}
