//! Task stack for a simulated domestic service robot.
//!
//! The crate is organised in three layers, mirroring the architecture of the
//! robot it models:
//!
//! * top: [`hfsm`] task scripts and the [`grammar`] that turns operator
//!   speech into command frames,
//! * middle: the open-world [`kb`], the forward-search [`planner`] and the
//!   replanning/diagnosing [`executor`],
//! * bottom: [`sim`] skill primitives over a ground-truth world.
//!
//! Two self-contained subsystems ride along: [`prism`] registers planar
//! landmarks (door placards and the like) into a metric map from camera
//! detections, and [`hallway`] studies corridor passing between the robot and
//! a human under different turn-signalling policies.
//!
//! Everything is deterministic under a caller-supplied seed; there is no wall
//! clock anywhere in the crate.

pub mod executor;
pub mod fixtures;
pub mod grammar;
pub mod hallway;
pub mod hfsm;
pub mod kb;
pub mod ontology;
pub mod planner;
pub mod prism;
pub mod scenario;
pub mod sim;
