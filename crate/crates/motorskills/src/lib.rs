//! Planar motor-skill learning workbench.
//!
//! The pipeline: plan a path for an articulated object in its own
//! configuration space, lift it through a grasp frame to an end-effector
//! path, track it with robot inverse kinematics to produce demonstration
//! trajectories, fit a parametric policy to the demonstrations, and refine
//! the policy with episodic policy search against a kinematic reward.
//!
//! Modules mirror the stages:
//! - [`kinematics`]: chains, forward/inverse kinematics, Jacobians
//! - [`world`]: deterministic planar simulator and the three benchmark tasks
//! - [`planner`]: object-space planning and demonstration synthesis
//! - [`policy`]: dynamic movement primitives and Gaussian MLP policies
//! - [`optimize`]: LWR, behavioral cloning, PI2-CMA, NPG and DAPG
//! - [`harness`]: experiment orchestration, persistence, metrics, plotting

pub mod harness;
pub mod kinematics;
pub mod optimize;
pub mod planner;
pub mod policy;
pub mod world;
