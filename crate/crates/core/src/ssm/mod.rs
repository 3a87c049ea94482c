pub mod auto;
pub mod nonauto;
