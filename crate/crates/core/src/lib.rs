pub mod cartan;
pub mod cech;
pub mod cli;
pub mod linalg;
pub mod models;
pub mod padic;
pub mod points;
pub mod series;
pub mod val;
