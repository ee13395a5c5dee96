pub mod evaluate;
pub mod gradcheck;
pub mod predict;
pub mod prepare;
pub mod train;
