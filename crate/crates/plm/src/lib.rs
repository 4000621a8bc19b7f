pub mod asymptotics;
pub mod cyclefinder;
pub mod dist;
pub mod harness;
pub mod matching;
pub mod model;
pub mod paths;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod lap;
