//! Policy-aware abstraction of labeled grid worlds and LTL planning over
//! compositions of task policies.

pub mod cli;
pub mod gridworld;
pub mod ltl;
pub mod mvpolicy;
pub mod pipeline;
pub mod product;
pub mod pruner;
pub mod tsys;
