pub mod linalg;
pub mod net;
pub mod optim;
pub mod theory;
pub mod data;
pub mod dynamics;
pub mod io;
