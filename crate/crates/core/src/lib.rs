pub mod poly;
pub mod system;
pub mod sliding;
pub mod integrate;
pub mod semiflow;
pub mod poincare;
pub mod conley;
pub mod regularization;
