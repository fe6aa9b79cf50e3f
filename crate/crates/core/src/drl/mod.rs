//! Deep Q-learning machinery: tensors, convolutional networks with
//! backpropagation, Adam, replay memory and the agent loop.

pub mod adam;
pub mod agent;
pub mod network;
pub mod replay;
pub mod tensor;
pub mod train_loop;

pub use adam::{Adam, AdamConfig};
pub use agent::{select_action, td_target, DqnAgent, Experience, Hyperparams};
pub use network::{coordination_net_spec, formation_net_spec, LayerSpec, NetSpec, Network, Workspace};
pub use replay::ReplayBuffer;
pub use tensor::{Input, Shape, Tensor};
