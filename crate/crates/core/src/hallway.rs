//! Discrete-time simulator for two agents passing in a narrow corridor.
//!
//! A robot and a human start at opposite ends and walk toward each other.
//! The robot always yields to its left (the north half, +y); the human's
//! untrained intuition is to yield to their right, which is the same half —
//! a guaranteed conflict unless the human reads the robot's turn signal and
//! takes the south half instead.
//!
//! The corridor is a two-lane abstraction: each agent occupies a lateral
//! band `body_width` wide, lanes sit at ±width/4, and every rule (the full
//! stop, the blocked-human pause, the conflict taxonomy) is expressed in
//! terms of band overlap. Separations that gate behavior are measured
//! along the corridor axis; the reported minimum separation is the
//! Euclidean distance over the ticks where the bands overlapped, i.e.
//! while the two were actually on a collision course.
//!
//! Whether a human understands the signal is a single Bernoulli draw per
//! trial — the first draw from a trial-indexed generator, so raising
//! `p_comply` can only convert conflict trials into clean ones, never the
//! reverse. Compliance probabilities under each policy are calibration
//! inputs, not predictions this simulator validates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// z for a two-sided 95% interval.
pub const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum HallwayError {
    #[error("invalid corridor setup: {0}")]
    InvalidSpec(String),
}

/// Corridor geometry and motion parameters. Distances in meters, durations
/// in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub robot_speed: f64,
    pub human_speed: f64,
    pub dt: f64,
    /// The robot commits its left turn at this along-corridor separation.
    pub turn_commit_distance: f64,
    /// Permanent halt when this close to a human blocking the robot's band.
    pub full_stop_distance: f64,
    /// An undecided human picks a side on intuition at this separation.
    pub intuition_distance: f64,
    pub lane_change_duration: f64,
    /// The robot pivots in place this long before sliding into its lane.
    pub robot_turn_duration: f64,
    /// Length of the demonstration wiggle performed at the start line.
    pub demo_duration: f64,
    /// Lateral band each agent occupies; bands overlapping = same lane.
    pub body_width: f64,
    /// A walking human pauses this far behind an obstruction in their band.
    pub block_distance: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        CorridorSpec {
            length_m: 17.5,
            width_m: 1.85,
            robot_speed: 0.5,
            human_speed: 1.0,
            dt: 0.1,
            turn_commit_distance: 2.75,
            full_stop_distance: 1.0,
            intuition_distance: 6.0,
            lane_change_duration: 0.8,
            robot_turn_duration: 0.5,
            demo_duration: 2.0,
            body_width: 0.5,
            block_distance: 0.6,
        }
    }
}

impl CorridorSpec {
    /// Lane centerlines sit halfway into each half of the corridor.
    pub fn lane_offset(&self) -> f64 {
        self.width_m / 4.0
    }

    pub fn validate(&self) -> Result<(), HallwayError> {
        let positive = [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("robot_speed", self.robot_speed),
            ("human_speed", self.human_speed),
            ("dt", self.dt),
            ("turn_commit_distance", self.turn_commit_distance),
            ("full_stop_distance", self.full_stop_distance),
            ("intuition_distance", self.intuition_distance),
            ("lane_change_duration", self.lane_change_duration),
            ("robot_turn_duration", self.robot_turn_duration),
            ("body_width", self.body_width),
            ("block_distance", self.block_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HallwayError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if self.demo_duration < 0.0 || !self.demo_duration.is_finite() {
            return Err(HallwayError::InvalidSpec("demo_duration must be non-negative".into()));
        }
        if self.full_stop_distance >= self.turn_commit_distance {
            return Err(HallwayError::InvalidSpec(
                "full_stop_distance must be smaller than turn_commit_distance".into(),
            ));
        }
        if self.turn_commit_distance >= self.intuition_distance {
            return Err(HallwayError::InvalidSpec(
                "turn_commit_distance must be smaller than intuition_distance".into(),
            ));
        }
        // the demonstration must finish before the encounter zone begins
        if self.length_m - self.human_speed * self.demo_duration <= self.intuition_distance {
            return Err(HallwayError::InvalidSpec(
                "corridor too short for the demonstration to finish before the encounter".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    North,
    South,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::North => 1.0,
            Side::South => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::North => Side::South,
            Side::South => Side::North,
        }
    }
}

/// The side the robot always yields to: its left, the north half.
pub const ROBOT_TURN_SIDE: Side = Side::North;

/// Behavioral parameters of the simulated human.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanModel {
    /// Where intuition sends them: their right, which faces the robot's left.
    pub side_preference: Side,
    /// Probability of correctly reading the signal and yielding the other way.
    pub p_comply: f64,
    /// Reaction time: from signal perception to acting on it, and from being
    /// blocked to sidestepping.
    pub latency_s: f64,
}

impl Default for HumanModel {
    fn default() -> Self {
        HumanModel { side_preference: Side::North, p_comply: 0.5, latency_s: 0.5 }
    }
}

impl HumanModel {
    pub fn with_p_comply(p_comply: f64) -> Self {
        HumanModel { p_comply, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPolicy {
    /// No signal: the human never learns the robot's intent.
    None,
    /// LED turn signal lit from the start of the trial.
    TurnSignal,
    /// Turn signal plus a demonstration wiggle at the start line, performed
    /// before the encounter so observers see the signal used in context.
    TurnSignalWithPassiveDemo,
}

impl SignalPolicy {
    fn signals(self) -> bool {
        !matches!(self, SignalPolicy::None)
    }
}

impl fmt::Display for SignalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SignalPolicy::None => "none",
            SignalPolicy::TurnSignal => "turn_signal",
            SignalPolicy::TurnSignalWithPassiveDemo => "turn_signal_with_passive_demo",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictCause {
    /// The safety rule halted the robot for the rest of the trial.
    RobotFullStop,
    /// The human's band overlapped the robot's committed lane inside the
    /// turn-commit zone, but cleared before the stop rule fired.
    HumanCrossedIntoRobotPath,
    None,
}

impl fmt::Display for ConflictCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConflictCause::RobotFullStop => "robot_full_stop",
            ConflictCause::HumanCrossedIntoRobotPath => "human_crossed_into_robot_path",
            ConflictCause::None => "none",
        };
        f.write_str(s)
    }
}

/// One sampled instant of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickState {
    pub t: u64,
    pub robot_x: f64,
    pub robot_y: f64,
    pub human_x: f64,
    pub human_y: f64,
    pub robot_stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub conflict: bool,
    pub cause: ConflictCause,
    /// Minimum Euclidean separation over the ticks where the agents' lateral
    /// bands overlapped. A clean pass keeps this comfortably above the
    /// full-stop distance.
    pub min_separation_m: f64,
    /// Whether this trial's human understood and obeyed the signal.
    pub complied: bool,
    pub ticks: u64,
    pub full_stop_tick: Option<u64>,
    /// Per-tick positions; empty for batch runs.
    #[serde(default)]
    pub trace: Vec<TickState>,
}

const MAX_TICKS: u64 = 10_000;

/// Run one seeded trial. The seed fixes the single compliance draw; the
/// rest of the trial is deterministic kinematics.
pub fn run_trial(
    spec: &CorridorSpec,
    human: &HumanModel,
    policy: SignalPolicy,
    seed: u64,
) -> Result<TrialOutcome, HallwayError> {
    run_trial_impl(spec, human, policy, seed, true)
}

fn run_trial_impl(
    spec: &CorridorSpec,
    human: &HumanModel,
    policy: SignalPolicy,
    seed: u64,
    keep_trace: bool,
) -> Result<TrialOutcome, HallwayError> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&human.p_comply) {
        return Err(HallwayError::InvalidSpec("p_comply must lie in [0, 1]".into()));
    }
    if human.latency_s < 0.0 {
        return Err(HallwayError::InvalidSpec("latency_s must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complied = policy.signals() && rng.random::<f64>() < human.p_comply;

    let dt = spec.dt;
    let off = spec.lane_offset();
    let lane_rate = off / spec.lane_change_duration;
    let demo_end = if policy == SignalPolicy::TurnSignalWithPassiveDemo {
        spec.demo_duration
    } else {
        0.0
    };

    let (mut rx, mut ry) = (0.0_f64, 0.0_f64);
    let (mut hx, mut hy) = (spec.length_m, 0.0_f64);
    let mut committed_at: Option<f64> = None;
    let mut stopped = false;
    let mut full_stop_tick = None;
    let mut crossed = false;
    let mut human_target: Option<Side> = None;
    let mut sidestep_done = false;
    let mut blocked_time = 0.0_f64;
    let mut min_sep = f64::INFINITY;
    let mut trace = Vec::new();
    let mut ticks = 0;

    for t in 0..MAX_TICKS {
        let time = t as f64 * dt;
        let sep = hx - rx;
        let bands_overlap = (ry - hy).abs() < spec.body_width;
        if bands_overlap {
            min_sep = min_sep.min(((hx - rx).powi(2) + (hy - ry).powi(2)).sqrt());
        }
        if keep_trace {
            trace.push(TickState {
                t,
                robot_x: rx,
                robot_y: ry,
                human_x: hx,
                human_y: hy,
                robot_stopped: stopped,
            });
        }
        ticks = t + 1;
        if hx <= 0.0 {
            break;
        }

        // robot: commit, safety stop, then move
        if committed_at.is_none() && sep <= spec.turn_commit_distance {
            committed_at = Some(time);
        }
        if !stopped && (0.0..=spec.full_stop_distance).contains(&sep) && bands_overlap {
            stopped = true;
            full_stop_tick = Some(t);
        }
        if !stopped {
            match committed_at {
                None => {
                    if time >= demo_end {
                        rx += spec.robot_speed * dt;
                    }
                }
                Some(tc) if time < tc + spec.robot_turn_duration => {} // pivoting in place
                Some(_) => {
                    rx += spec.robot_speed * dt;
                    ry = (ry + lane_rate * dt).min(off);
                }
            }
        }

        // human: decide a side, then walk unless blocked
        if complied && time >= human.latency_s {
            human_target = Some(ROBOT_TURN_SIDE.opposite());
        }
        if human_target.is_none() && sep <= spec.intuition_distance {
            human_target = Some(human.side_preference);
        }
        let blocked = (0.0..=spec.block_distance).contains(&sep) && bands_overlap;
        if blocked {
            blocked_time += dt;
            if blocked_time >= human.latency_s && !sidestep_done {
                sidestep_done = true;
                human_target = Some(if ry >= 0.0 { Side::South } else { Side::North });
            }
        } else {
            hx -= spec.human_speed * dt;
        }
        if let Some(side) = human_target {
            let target_y = side.sign() * off;
            let step = lane_rate * dt;
            if (target_y - hy).abs() <= step {
                hy = target_y;
            } else {
                hy += step * (target_y - hy).signum();
            }
        }

        // did the human occupy the robot's committed lane inside the zone?
        let sep_now = hx - rx;
        if committed_at.is_some()
            && !stopped
            && (0.0..spec.turn_commit_distance).contains(&sep_now)
            && hy + spec.body_width / 2.0 > 0.0
        {
            crossed = true;
        }
    }

    let cause = if stopped {
        ConflictCause::RobotFullStop
    } else if crossed {
        ConflictCause::HumanCrossedIntoRobotPath
    } else {
        ConflictCause::None
    };
    if !min_sep.is_finite() {
        min_sep = spec.length_m;
    }
    Ok(TrialOutcome {
        conflict: cause != ConflictCause::None,
        cause,
        min_separation_m: min_sep,
        complied,
        ticks,
        full_stop_tick,
        trace,
    })
}

/// Wilson score interval for a binomial proportion, 95% two-sided.
pub fn wilson_interval(successes: u64, n: u64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let z = WILSON_Z;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// The corridor and human parameters a batch ran under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallwayConfig {
    pub corridor: CorridorSpec,
    pub human: HumanModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CauseCounts {
    pub robot_full_stop: u64,
    pub human_crossed_into_robot_path: u64,
    pub none: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub spec: HallwayConfig,
    pub policy: SignalPolicy,
    pub n: u64,
    pub conflicts: u64,
    pub rate: f64,
    pub ci95: [f64; 2],
    pub causes: CauseCounts,
}

/// Run `n` independent trials seeded `seed`, `seed+1`, ... and summarize.
/// Trial `i` draws its compliance from generator `seed + i`, so two batches
/// at different `p_comply` but the same seed share the underlying uniforms:
/// the conflict rate is monotone non-increasing in `p_comply` by coupling.
pub fn run_batch(
    spec: &CorridorSpec,
    human: &HumanModel,
    policy: SignalPolicy,
    n: u64,
    seed: u64,
) -> Result<BatchReport, HallwayError> {
    if n == 0 {
        return Err(HallwayError::InvalidSpec("n must be positive".into()));
    }
    let mut conflicts = 0;
    let mut causes = CauseCounts::default();
    for i in 0..n {
        let outcome = run_trial_impl(spec, human, policy, seed.wrapping_add(i), false)?;
        if outcome.conflict {
            conflicts += 1;
        }
        match outcome.cause {
            ConflictCause::RobotFullStop => causes.robot_full_stop += 1,
            ConflictCause::HumanCrossedIntoRobotPath => causes.human_crossed_into_robot_path += 1,
            ConflictCause::None => causes.none += 1,
        }
    }
    Ok(BatchReport {
        spec: HallwayConfig { corridor: *spec, human: *human },
        policy,
        n,
        conflicts,
        rate: conflicts as f64 / n as f64,
        ci95: wilson_interval(conflicts, n),
        causes,
    })
}
