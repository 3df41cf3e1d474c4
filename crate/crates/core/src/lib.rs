pub mod nn;
pub mod envsim;
pub mod ppo;
pub mod ppopt;
pub mod dyna;
pub mod harness;
