//! Cost-based Stackelberg security investment for networked control systems.
//!
//! The pipeline runs bottom-up: [`lincontrol`] synthesizes structured H₂
//! controllers, [`lossmap`] turns every attack pattern into a performance
//! loss, [`game`] solves the attacker/defender investment game over those
//! losses, and [`robust`] repeats the exercise over a set of uncertain
//! models. [`modelio`] handles files.

pub mod game;
pub mod lincontrol;
pub mod lossmap;
pub mod modelio;
pub mod robust;
