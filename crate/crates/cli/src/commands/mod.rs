pub mod gradcheck;
pub mod landscape;
pub mod perturb;
pub mod regimes;
pub mod train;
