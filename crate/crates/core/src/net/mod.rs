//! The semantically conditioned LSTM generator: parameters, forward pass,
//! exact gradients and persistence.

mod backward;
mod forward;
pub mod gradcheck;
pub mod io;
mod params;

pub use backward::{accumulate_gradients, backprop_sentence};
pub use forward::{
    forward_sentence, heuristic_gate_step, heuristic_reading_gate, inputs_and_targets,
    reverse_for_reranker, step, Dropout, ForwardTrace, LayerTrace, State, StepMasks, StepTrace,
};
pub use params::{
    heuristic_rules, GatingMode, Gradients, LayerParams, NetConfig, NetworkParams, INIT_SCALE,
};
